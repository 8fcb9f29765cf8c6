#include "wmerge/diffusion/latent_codec.hpp"

namespace wmerge::diffusion {

LatentCodec::LatentCodec(int h, int w, int d, double gain) : h_(h), w_(w), d_(d), gain_(gain) {
    if (d < 3) throw ArgumentError("LatentCodec: d must be >= 3");
    Rng rng(0x1a7e47c0dec0ull);
    lift_ = rng.gaussian_grid(3, d);
    // Gram-Schmidt to orthonormal rows.
    for (int r = 0; r < 3; ++r) {
        for (int p = 0; p < r; ++p) lift_.row(r) -= lift_.row(r).dot(lift_.row(p)) * lift_.row(p);
        lift_.row(r) /= lift_.row(r).norm();
    }
}

Grid LatentCodec::encode(const scenekit::Image& im) const {
    if (im.w % w_ != 0 || im.h % h_ != 0)
        throw ShapeError("LatentCodec::encode: image size not a multiple of the grid");
    const int cw = im.w / w_, ch = im.h / h_;
    Grid latent(h_ * w_, d_);
    for (int gy = 0; gy < h_; ++gy) {
        for (int gx = 0; gx < w_; ++gx) {
            double rgb[3] = {0, 0, 0};
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x) {
                    const scenekit::Rgb px = im.at(gx * cw + x, gy * ch + y);
                    rgb[0] += px.r;
                    rgb[1] += px.g;
                    rgb[2] += px.b;
                }
            Eigen::RowVector3d v;
            for (int k = 0; k < 3; ++k) v(k) = rgb[k] / (cw * ch) / 127.5 - 1.0;
            latent.row(gy * w_ + gx) = gain_ * (v * lift_);
        }
    }
    return latent;
}

scenekit::Image LatentCodec::decode(const Grid& latent, int pixels_per_cell) const {
    if (latent.rows() != h_ * w_ || latent.cols() != d_)
        throw ShapeError("LatentCodec::decode: latent " + numkit::shape_str(latent));
    scenekit::Image im =
        scenekit::Image::filled(w_ * pixels_per_cell, h_ * pixels_per_cell, {0, 0, 0});
    for (int gy = 0; gy < h_; ++gy) {
        for (int gx = 0; gx < w_; ++gx) {
            const Eigen::RowVector3d v =
                latent.row(gy * w_ + gx) * lift_.transpose() / gain_;
            scenekit::Rgb c;
            auto to_byte = [](double x) {
                return static_cast<std::uint8_t>(std::clamp((x + 1.0) * 127.5, 0.0, 255.0));
            };
            c.r = to_byte(v(0));
            c.g = to_byte(v(1));
            c.b = to_byte(v(2));
            for (int y = 0; y < pixels_per_cell; ++y)
                for (int x = 0; x < pixels_per_cell; ++x)
                    im.set(gx * pixels_per_cell + x, gy * pixels_per_cell + y, c);
        }
    }
    return im;
}

}  // namespace wmerge::diffusion
