#include "wmerge/diffusion/sampler.hpp"

namespace wmerge::diffusion {

namespace {

std::vector<int> ddim_timesteps(int t_steps, int steps) {
    if (steps < 1) throw ArgumentError("ddim_sample: steps must be >= 1");
    if (steps > t_steps) throw ArgumentError("ddim_sample: steps must be <= T");
    std::vector<int> ts(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const double frac = static_cast<double>(steps - k) / steps;
        ts[static_cast<std::size_t>(k)] = std::max(1, static_cast<int>(std::llround(t_steps * frac)));
    }
    return ts;
}

}  // namespace

Grid ddim_sample_with(const NoisePredictor& predict, const DiffusionSchedule& sched,
                      Eigen::Index rows, Eigen::Index cols, int steps, std::uint64_t seed) {
    const std::vector<int> ts = ddim_timesteps(sched.t_steps, steps);
    Rng rng = Rng(seed).derive("ddim_init");
    Grid x = rng.gaussian_grid(rows, cols);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int t = ts[k];
        const int t_next = k + 1 < ts.size() ? ts[k + 1] : 0;
        const Grid eps = predict(x, t);
        const Grid x0_pred = (x - sched.sigma[t] * eps) / sched.alpha[t];
        x = sched.alpha[t_next] * x0_pred + sched.sigma[t_next] * eps;
    }
    return x;
}

Grid ddim_sample(DenoiserParams& params, const DiffusionSchedule& sched, const Conditions& cond,
                 const SampleOptions& opt) {
    Conditions uncond;
    uncond.prompt_tokens = {0};  // null token
    uncond.text_dropped = true;
    uncond.img_dropped = true;

    // Optional relevance freezing: capture maps on the first conditional
    // forward, feed them back on every later one.
    std::vector<std::vector<Vec>> frozen;
    bool have_frozen = false;

    auto predict = [&](const Grid& x_t, int t) {
        ForwardHooks hooks;
        if (opt.hooks) hooks = *opt.hooks;
        if (opt.freeze_relevance) {
            if (have_frozen)
                hooks.relevance_frozen = &frozen;
            else
                hooks.relevance_out = &frozen;
        }
        const Grid eps_cond = denoiser_forward(params, cond, x_t, t, &hooks);
        if (opt.freeze_relevance) have_frozen = true;
        if (opt.guidance == 1.0) return eps_cond;
        const Grid eps_uncond = denoiser_forward(params, uncond, x_t, t, nullptr);
        return cfg_combine(eps_uncond, eps_cond, opt.guidance);
    };
    return ddim_sample_with(predict, sched, params.cfg.positions(), params.cfg.d, opt.steps,
                            opt.seed);
}

}  // namespace wmerge::diffusion
