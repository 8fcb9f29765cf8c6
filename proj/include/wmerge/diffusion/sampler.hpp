#pragma once

#include "wmerge/diffusion/model.hpp"
#include "wmerge/diffusion/schedule.hpp"

namespace wmerge::diffusion {

// eps_uncond + scale * (eps_cond - eps_uncond). scale == 1 short-circuits to
// eps_cond so guidance 1.0 is exactly the conditional path.
inline Grid cfg_combine(const Grid& eps_uncond, const Grid& eps_cond, double scale) {
    if (eps_uncond.rows() != eps_cond.rows() || eps_uncond.cols() != eps_cond.cols())
        throw ShapeError("cfg_combine: " + numkit::shape_str(eps_uncond) + " vs " +
                         numkit::shape_str(eps_cond));
    if (scale == 1.0) return eps_cond;
    return eps_uncond + scale * (eps_cond - eps_uncond);
}

struct SampleOptions {
    int steps = 50;
    double guidance = 7.5;
    std::uint64_t seed = 0;
    // Recompute relevance maps at every timestep (default) or freeze the maps
    // captured on the first denoiser call of the run.
    bool freeze_relevance = false;
    const ForwardHooks* hooks = nullptr;  // applied to the conditional branch
};

// Pluggable noise predictor so tests can run the sampler against a
// ground-truth-eps oracle instead of the network.
using NoisePredictor = std::function<Grid(const Grid& x_t, int t)>;

// Deterministic DDIM (eta = 0) over a uniform stride subset of [1, T].
Grid ddim_sample_with(const NoisePredictor& predict, const DiffusionSchedule& sched,
                      Eigen::Index rows, Eigen::Index cols, int steps, std::uint64_t seed);

// Full model sampler with classifier-free guidance; unconditional branch runs
// with both conditions dropped.
Grid ddim_sample(DenoiserParams& params, const DiffusionSchedule& sched, const Conditions& cond,
                 const SampleOptions& opt);

}  // namespace wmerge::diffusion
