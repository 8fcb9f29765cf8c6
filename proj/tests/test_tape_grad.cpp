#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wmerge/numkit/grad_check.hpp"
#include "wmerge/numkit/rng.hpp"

using namespace wmerge;
using numkit::tape::Graph;
using numkit::tape::Var;

namespace {
constexpr double kTol = 1e-6;  // unit-level ops are tighter than the 1e-4 end-to-end bar
constexpr double kEps = 1e-5;

Grid rand_grid(std::uint64_t seed, int r, int c) {
    numkit::Rng rng(seed);
    return rng.gaussian_grid(r, c);
}
}  // namespace

TEST_CASE("grad: matmul") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mean_all(g.matmul(in[0], in[1]));
        },
        {rand_grid(1, 3, 4), rand_grid(2, 4, 5)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: add/sub/scale/cmul/transpose chain") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            auto t = g.transpose(g.cmul(g.add(in[0], in[1]), g.sub(in[0], g.scale(in[1], 0.3))));
            return g.mean_all(t);
        },
        {rand_grid(3, 4, 3), rand_grid(4, 4, 3)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: softmax_rows with scale") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            auto y = g.softmax_rows(in[0], std::sqrt(5.0));
            return g.mse(y, g.constant(Grid::Zero(4, 5)));
        },
        {rand_grid(5, 4, 5)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: sigmoid and tanh") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mean_all(g.cmul(g.sigmoid(in[0]), g.tanh(in[1])));
        },
        {rand_grid(6, 3, 3), rand_grid(7, 3, 3)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: rmsnorm_rows") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mse(g.rmsnorm_rows(in[0]), g.constant(rand_grid(99, 4, 6)));
        },
        {rand_grid(8, 4, 6)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: row_scale in both arguments") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mean_all(g.row_scale(in[0], in[1]));
        },
        {rand_grid(9, 5, 3), rand_grid(10, 5, 1)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: col_mean, div_scalar, add_scalar") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            auto m = g.col_mean(in[0]);               // 1 x c
            auto s = g.mean_all(in[1]);               // 1 x 1
            auto d = g.div_scalar(m, g.add_scalar(s, g.constant(Grid::Constant(1, 1, 2.0))));
            return g.mean_all(d);
        },
        {rand_grid(11, 4, 3), rand_grid(12, 2, 2)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: add_row broadcast") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mse(g.add_row(in[0], in[1]), g.constant(rand_grid(98, 5, 4)));
        },
        {rand_grid(13, 5, 4), rand_grid(14, 1, 4)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: rows_select scatter-add with repeated indices") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) {
            return g.mse(g.rows_select(in[0], {2, 0, 2, 1}), g.constant(rand_grid(97, 4, 3)));
        },
        {rand_grid(15, 4, 3)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad: mse in both arguments") {
    const auto rel = numkit::grad_check(
        [](Graph& g, const std::vector<Var>& in) { return g.mse(in[0], in[1]); },
        {rand_grid(16, 3, 4), rand_grid(17, 3, 4)}, kEps);
    CHECK(rel < kTol);
}

TEST_CASE("grad_check rejects out-of-range eps") {
    const auto build = [](Graph& g, const std::vector<Var>& in) { return g.mean_all(in[0]); };
    CHECK_THROWS_AS(numkit::grad_check(build, {rand_grid(18, 2, 2)}, 1e-8), ArgumentError);
    CHECK_THROWS_AS(numkit::grad_check(build, {rand_grid(18, 2, 2)}, 1e-2), ArgumentError);
}

TEST_CASE("backward requires a scalar loss") {
    Graph g;
    auto x = g.leaf(rand_grid(19, 2, 2));
    CHECK_THROWS_AS(g.backward(g.sigmoid(x)), ArgumentError);
}

TEST_CASE("gradients accumulate across reuse of a node") {
    Graph g;
    auto x = g.leaf(Grid::Constant(1, 1, 3.0));
    auto y = g.cmul(x, x);  // d/dx x^2 = 2x
    g.backward(g.mean_all(y));
    CHECK(x->grad(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}
