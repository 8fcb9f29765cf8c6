#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wmerge/merge/merge.hpp"
#include "wmerge/numkit/grad_check.hpp"
#include "wmerge/numkit/rng.hpp"

using namespace wmerge;
using attn::LatentFeatures;
using attn::RelevanceMap;

namespace {

LatentFeatures rand_feat(numkit::Rng& rng, int hw, int d) {
    return {1, hw, rng.gaussian_grid(hw, d)};
}

}  // namespace

TEST_CASE("uniform_merge: empty list, zero streams, independent sum") {
    numkit::Rng rng(1);
    const auto zt = rand_feat(rng, 6, 4);
    CHECK((merge::uniform_merge(zt, {}).z - zt.z).cwiseAbs().maxCoeff() == 0.0);

    std::vector<LatentFeatures> zeros{{1, 6, Grid::Zero(6, 4)}, {1, 6, Grid::Zero(6, 4)}};
    CHECK((merge::uniform_merge(zt, zeros).z - zt.z).cwiseAbs().maxCoeff() == 0.0);

    std::vector<LatentFeatures> imgs{rand_feat(rng, 6, 4), rand_feat(rng, 6, 4)};
    const Grid want = zt.z + imgs[0].z + imgs[1].z;
    CHECK((merge::uniform_merge(zt, imgs).z - want).cwiseAbs().maxCoeff() == 0.0);

    std::vector<LatentFeatures> bad{rand_feat(rng, 5, 4)};
    CHECK_THROWS_AS(merge::uniform_merge(zt, bad), ShapeError);
}

TEST_CASE("weighted_merge with uniform maps equals uniform_merge bitwise") {
    numkit::Rng rng(2);
    const auto zt = rand_feat(rng, 8, 5);
    std::vector<LatentFeatures> imgs{rand_feat(rng, 8, 5), rand_feat(rng, 8, 5),
                                     rand_feat(rng, 8, 5)};
    std::vector<RelevanceMap> maps(3, RelevanceMap{Vec::Constant(8, 0.125)});
    const Grid a = merge::weighted_merge(zt, imgs, maps).z;
    const Grid b = merge::uniform_merge(zt, imgs).z;
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a(i) == b(i));  // bitwise
}

TEST_CASE("weighted_merge hand case: map [1,0] doubles row 0, zeroes row 1") {
    LatentFeatures zt{1, 2, Grid::Zero(2, 3)};
    numkit::Rng rng(3);
    std::vector<LatentFeatures> imgs{rand_feat(rng, 2, 3)};
    Vec m(2);
    m << 1.0, 0.0;
    std::vector<RelevanceMap> maps{RelevanceMap{m}};
    const Grid out = merge::weighted_merge(zt, imgs, maps).z;
    CHECK((out.row(0) - 2.0 * imgs[0].z.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted_merge: normalization invariance and reorder invariance") {
    numkit::Rng rng(4);
    const auto zt = rand_feat(rng, 6, 4);
    std::vector<LatentFeatures> imgs{rand_feat(rng, 6, 4), rand_feat(rng, 6, 4)};
    std::vector<RelevanceMap> maps{
        RelevanceMap{(rng.uniform_grid(6, 1).array() + 0.1).matrix().col(0)},
        RelevanceMap{(rng.uniform_grid(6, 1).array() + 0.1).matrix().col(0)}};

    const Grid base = merge::weighted_merge(zt, imgs, maps).z;

    std::vector<RelevanceMap> scaled{RelevanceMap{Vec(7.3 * maps[0].values)},
                                     RelevanceMap{Vec(0.01 * maps[1].values)}};
    CHECK((merge::weighted_merge(zt, imgs, scaled).z - base).cwiseAbs().maxCoeff() < 1e-12);

    std::vector<LatentFeatures> imgs_r{imgs[1], imgs[0]};
    std::vector<RelevanceMap> maps_r{maps[1], maps[0]};
    CHECK((merge::weighted_merge(zt, imgs_r, maps_r).z - base).cwiseAbs().maxCoeff() < 1e-12);

    std::vector<RelevanceMap> degen{maps[0], RelevanceMap{Vec::Zero(6)}};
    CHECK_THROWS_AS(merge::weighted_merge(zt, imgs, degen), DegenerateMapError);
    CHECK_THROWS_AS(merge::weighted_merge(zt, {}, {}), ArgumentError);
}

TEST_CASE("M=1 with uniform map reduces to decoupled cross-attention") {
    numkit::Rng rng(5);
    attn::AttnProjections p;
    p.w_q = rng.gaussian_grid(4, 3);
    p.w_k_text = rng.gaussian_grid(5, 3);
    p.w_v_text = rng.gaussian_grid(5, 4);
    p.w_k_img = rng.gaussian_grid(2, 3);
    p.w_v_img = rng.gaussian_grid(2, 4);
    LatentFeatures z{2, 3, rng.gaussian_grid(6, 4)};
    const Grid ct = rng.gaussian_grid(3, 5), ci = rng.gaussian_grid(2, 2);

    const auto zt = attn::cross_attention(z, ct, p.w_k_text, p.w_v_text, p.w_q);
    const auto zi = attn::cross_attention(z, ci, p.w_k_img, p.w_v_img, p.w_q);
    std::vector<LatentFeatures> imgs{zi};
    std::vector<RelevanceMap> maps{RelevanceMap{Vec::Constant(6, 1.0 / 6.0)}};

    const Grid merged = merge::weighted_merge(zt, imgs, maps).z;
    const Grid decoupled = attn::decoupled_cross_attention(z, ct, ci, p).z;
    for (Eigen::Index i = 0; i < merged.size(); ++i) CHECK(merged(i) == decoupled(i));
}

TEST_CASE("text_weight: zero init gives all ones; hand case [0, ln3] -> [0.8, 1.2]") {
    numkit::Rng rng(6);
    const auto zt = rand_feat(rng, 5, 3);
    merge::TextWeightLayer f0{Grid::Zero(3, 1), 0.0};
    const Vec w0 = merge::text_weight(zt, f0);
    for (Eigen::Index i = 0; i < w0.size(); ++i) CHECK(w0(i) == 1.0);  // exact

    LatentFeatures z1{1, 2, Grid(2, 1)};
    z1.z << 0.0, std::log(3.0);
    merge::TextWeightLayer f1{Grid::Ones(1, 1), 0.0};
    const Vec w1 = merge::text_weight(z1, f1);
    CHECK(w1(0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(w1(1) == doctest::Approx(1.2).epsilon(1e-12));

    merge::TextWeightLayer fr{rng.gaussian_grid(3, 1), 0.3};
    CHECK(std::abs(merge::text_weight(zt, fr).mean() - 1.0) < 1e-9);
}

TEST_CASE("trained_weighted_merge: zero-init f equals weighted_merge bitwise; M=0 identity") {
    numkit::Rng rng(7);
    const auto zt = rand_feat(rng, 8, 4);
    std::vector<LatentFeatures> imgs{rand_feat(rng, 8, 4), rand_feat(rng, 8, 4)};
    std::vector<RelevanceMap> maps{
        RelevanceMap{(rng.uniform_grid(8, 1).array() + 0.1).matrix().col(0)},
        RelevanceMap{(rng.uniform_grid(8, 1).array() + 0.1).matrix().col(0)}};
    merge::TextWeightLayer f0{Grid::Zero(4, 1), 0.0};

    const Grid a = merge::trained_weighted_merge(zt, imgs, maps, f0).z;
    const Grid b = merge::weighted_merge(zt, imgs, maps).z;
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a(i) == b(i));

    const Grid id = merge::trained_weighted_merge(zt, {}, {}, f0).z;
    for (Eigen::Index i = 0; i < id.size(); ++i) CHECK(id(i) == zt.z(i));
}

TEST_CASE("trained_weighted_merge random case recomputed independently") {
    numkit::Rng rng(8);
    const auto zt = rand_feat(rng, 6, 4);
    std::vector<LatentFeatures> imgs{rand_feat(rng, 6, 4)};
    std::vector<RelevanceMap> maps{
        RelevanceMap{(rng.uniform_grid(6, 1).array() + 0.2).matrix().col(0)}};
    merge::TextWeightLayer f{rng.gaussian_grid(4, 1), -0.2};

    const Vec tw = merge::text_weight(zt, f);
    const Vec nm = maps[0].values / maps[0].values.mean();
    Grid want(6, 4);
    for (int r = 0; r < 6; ++r) want.row(r) = zt.z.row(r) * tw(r) + imgs[0].z.row(r) * nm(r);
    const Grid got = merge::trained_weighted_merge(zt, imgs, maps, f).z;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tape merge variants match value paths and pass grad_check") {
    numkit::Rng rng(9);
    const Grid zt = rng.gaussian_grid(5, 3);
    const Grid zi = rng.gaussian_grid(5, 3);
    const Grid map = (rng.uniform_grid(5, 1).array() + 0.1).matrix();
    const Grid wf = rng.gaussian_grid(3, 1);
    const Grid bf = Grid::Constant(1, 1, 0.1);

    {
        tape::Graph g;
        auto vt = g.constant(zt), vi = g.constant(zi), vm = g.constant(map);
        auto vw = g.constant(wf), vb = g.constant(bf);
        std::vector<tape::Var> imgs{vi}, maps{vm};
        const Grid got = merge::trained_weighted_merge_t(g, vt, imgs, maps, vw, vb)->val;
        const Grid want =
            merge::trained_weighted_merge({1, 5, zt}, {{{1, 5, zi}}},
                                          {{attn::RelevanceMap{map.col(0)}}},
                                          {wf, bf(0, 0)})
                .z;
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
    }

    const auto rel = numkit::grad_check(
        [](tape::Graph& g, const std::vector<tape::Var>& in) {
            std::vector<tape::Var> imgs{in[1]}, maps{in[2]};
            auto out = merge::trained_weighted_merge_t(g, in[0], imgs, maps, in[3], in[4]);
            return g.mse(out, g.constant(Grid::Zero(5, 3)));
        },
        {zt, zi, map, wf, bf}, 1e-5);
    CHECK(rel < 1e-6);
}
