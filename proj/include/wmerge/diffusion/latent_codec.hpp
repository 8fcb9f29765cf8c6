#pragma once

#include "wmerge/numkit/rng.hpp"
#include "wmerge/scenekit/image.hpp"

namespace wmerge::diffusion {

// Fixed linear image <-> latent map standing in for a VAE: cell-average the
// 64x64 canvas to an h*w grid of RGB values in [-1, 1], then lift each cell
// through a fixed orthonormal 3 x d basis. Seeded from a constant so every
// model shares the same codec.
class LatentCodec {
public:
    LatentCodec(int h, int w, int d, double gain = 3.0);

    // image (h*cell x w*cell pixels) -> (h*w) x d latent.
    Grid encode(const scenekit::Image& im) const;

    // (h*w) x d latent -> decoded image, each cell rendered as a flat block.
    scenekit::Image decode(const Grid& latent, int pixels_per_cell = 8) const;

    int h() const { return h_; }
    int w() const { return w_; }
    int d() const { return d_; }

private:
    int h_, w_, d_;
    double gain_;
    Grid lift_;  // 3 x d, orthonormal rows
};

}  // namespace wmerge::diffusion
