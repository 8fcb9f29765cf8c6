#pragma once

#include <functional>
#include <vector>

#include "wmerge/numkit/tape.hpp"

namespace wmerge::numkit {

// Builds a scalar loss from leaf inputs on a fresh Graph.
using LossBuilder = std::function<tape::Var(tape::Graph&, const std::vector<tape::Var>&)>;

// Compares tape gradients against central differences on every entry of
// every input. Returns max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const LossBuilder& build, const std::vector<Grid>& inputs, double eps) {
    if (eps < 1e-7 || eps > 1e-3) throw ArgumentError("grad_check: eps must be in [1e-7, 1e-3]");

    auto eval = [&](const std::vector<Grid>& xs) {
        tape::Graph g;
        std::vector<tape::Var> leaves;
        leaves.reserve(xs.size());
        for (const auto& x : xs) leaves.push_back(g.leaf(x, false));
        return build(g, leaves)->val(0, 0);
    };

    // Analytic pass.
    tape::Graph g;
    std::vector<tape::Var> leaves;
    leaves.reserve(inputs.size());
    for (const auto& x : inputs) leaves.push_back(g.leaf(x, true));
    g.backward(build(g, leaves));

    double max_rel = 0.0;
    std::vector<Grid> xs = inputs;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Grid analytic = leaves[i]->grad.size() ? leaves[i]->grad
                                                     : Grid::Zero(xs[i].rows(), xs[i].cols());
        for (Eigen::Index r = 0; r < xs[i].rows(); ++r) {
            for (Eigen::Index c = 0; c < xs[i].cols(); ++c) {
                const double orig = xs[i](r, c);
                xs[i](r, c) = orig + eps;
                const double fp = eval(xs);
                xs[i](r, c) = orig - eps;
                const double fm = eval(xs);
                xs[i](r, c) = orig;
                const double numeric = (fp - fm) / (2.0 * eps);
                const double a = analytic(r, c);
                const double rel = std::abs(a - numeric) /
                                   std::max({std::abs(a), std::abs(numeric), 1e-8});
                max_rel = std::max(max_rel, rel);
            }
        }
    }
    return max_rel;
}

}  // namespace wmerge::numkit
