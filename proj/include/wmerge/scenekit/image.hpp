#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmerge/errors.hpp"
#include "wmerge/scenekit/vocab.hpp"

namespace wmerge::scenekit {

// Plain RGB8 raster.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<std::uint8_t> rgb;  // 3 * w * h, row-major

    static Image filled(int w, int h, Rgb c) {
        Image im;
        im.w = w;
        im.h = h;
        im.rgb.resize(static_cast<std::size_t>(3 * w * h));
        for (int i = 0; i < w * h; ++i) {
            im.rgb[static_cast<std::size_t>(3 * i)] = c.r;
            im.rgb[static_cast<std::size_t>(3 * i + 1)] = c.g;
            im.rgb[static_cast<std::size_t>(3 * i + 2)] = c.b;
        }
        return im;
    }

    Rgb at(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(3 * (y * w + x));
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }

    void set(int x, int y, Rgb c) {
        const std::size_t i = static_cast<std::size_t>(3 * (y * w + x));
        rgb[i] = c.r;
        rgb[i + 1] = c.g;
        rgb[i + 2] = c.b;
    }
};

// Integer pixel rectangle, half-open is avoided: w/h are inclusive extents.
struct BBox {
    int x = 0, y = 0, w = 0, h = 0;

    bool empty() const { return w <= 0 || h <= 0; }
    int area() const { return w * h; }
    bool contains(int px, int py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }

    static int overlap_area(const BBox& a, const BBox& b) {
        const int ox = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
        const int oy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
        return ox * oy;
    }
};

Image crop(const Image& im, const BBox& box);

// Deterministic PNG round trip (fixed libpng settings, no ancillary chunks).
void write_png(const Image& im, const std::string& path);
Image read_png(const std::string& path);

}  // namespace wmerge::scenekit
