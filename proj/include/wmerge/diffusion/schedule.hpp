#pragma once

#include <vector>

#include "wmerge/numkit/grid.hpp"

namespace wmerge::diffusion {

// DDPM schedule: alpha[t]^2 + sigma[t]^2 = 1, alpha non-increasing,
// alpha[0] = 1. Index 0 is the clean image.
struct DiffusionSchedule {
    int t_steps = 0;          // T
    std::vector<double> alpha;  // length T+1
    std::vector<double> sigma;  // length T+1
};

// Linear-beta schedule, beta in [1e-4, 0.02]:
// alpha_t = sqrt(prod_{s<=t}(1 - beta_s)), sigma_t = sqrt(1 - alpha_t^2).
inline DiffusionSchedule make_schedule(int t_steps) {
    if (t_steps < 1) throw ArgumentError("make_schedule: T must be >= 1");
    DiffusionSchedule s;
    s.t_steps = t_steps;
    s.alpha.resize(t_steps + 1);
    s.sigma.resize(t_steps + 1);
    s.alpha[0] = 1.0;
    s.sigma[0] = 0.0;
    double alpha_bar = 1.0;
    for (int t = 1; t <= t_steps; ++t) {
        const double frac = t_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (t_steps - 1);
        const double beta = 1e-4 + frac * (0.02 - 1e-4);
        alpha_bar *= 1.0 - beta;
        s.alpha[t] = std::sqrt(alpha_bar);
        s.sigma[t] = std::sqrt(1.0 - alpha_bar);
    }
    return s;
}

// x_t = alpha_t * x0 + sigma_t * eps.
inline Grid add_noise(const Grid& x0, const Grid& eps, int t, const DiffusionSchedule& sched) {
    if (t < 0 || t > sched.t_steps) throw ArgumentError("add_noise: t out of [0, T]");
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
        throw ShapeError("add_noise: x0 " + numkit::shape_str(x0) + " vs eps " +
                         numkit::shape_str(eps));
    return sched.alpha[t] * x0 + sched.sigma[t] * eps;
}

}  // namespace wmerge::diffusion
