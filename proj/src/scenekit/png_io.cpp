#include <png.h>

#include <cstdio>
#include <memory>

#include "wmerge/scenekit/image.hpp"

namespace wmerge::scenekit {

Image crop(const Image& im, const BBox& box) {
    if (box.empty() || box.x < 0 || box.y < 0 || box.x + box.w > im.w || box.y + box.h > im.h)
        throw ArgumentError("crop: box outside image");
    Image out;
    out.w = box.w;
    out.h = box.h;
    out.rgb.resize(static_cast<std::size_t>(3 * box.w * box.h));
    for (int y = 0; y < box.h; ++y)
        for (int x = 0; x < box.w; ++x) out.set(x, y, im.at(box.x + x, box.y + y));
    return out;
}

void write_png(const Image& im, const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"),
                                                       &std::fclose);
    if (!fp) throw IoError("write_png: cannot open '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("write_png: encode failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(im.w), static_cast<png_uint_32>(im.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_write_info(png, info);
    for (int y = 0; y < im.h; ++y)
        png_write_row(png, const_cast<png_bytep>(im.rgb.data() + static_cast<std::size_t>(3 * y * im.w)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"),
                                                       &std::fclose);
    if (!fp) throw IoError("read_png: cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("read_png: decode failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Image im;
    im.w = static_cast<int>(png_get_image_width(png, info));
    im.h = static_cast<int>(png_get_image_height(png, info));
    im.rgb.resize(static_cast<std::size_t>(3 * im.w * im.h));
    for (int y = 0; y < im.h; ++y)
        png_read_row(png, im.rgb.data() + static_cast<std::size_t>(3 * y * im.w), nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

}  // namespace wmerge::scenekit
