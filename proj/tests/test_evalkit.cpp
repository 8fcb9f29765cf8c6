#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "wmerge/evalkit/evalkit.hpp"
#include "wmerge/scenekit/scene.hpp"

using namespace wmerge;
using namespace wmerge::evalkit;

TEST_CASE("inject_noise: uniform strategy adds the raw perturbation") {
    numkit::Rng rng(11);
    const Grid z = rng.gaussian_grid(6, 4);
    const Grid eps = rng.gaussian_grid(6, 4);
    const Grid out = inject_noise(z, eps, NoiseStrategy::Uniform, nullptr);
    CHECK((out - (z + eps)).norm() == 0.0);

    const Grid zero = Grid::Zero(6, 4);
    CHECK((inject_noise(z, zero, NoiseStrategy::Uniform, nullptr) - z).norm() == 0.0);

    const Grid bad = rng.gaussian_grid(5, 4);
    CHECK_THROWS_AS(inject_noise(z, bad, NoiseStrategy::Uniform, nullptr), ShapeError);
}

TEST_CASE("inject_noise: weighted with a uniform map equals the uniform strategy") {
    numkit::Rng rng(12);
    const Grid z = rng.gaussian_grid(8, 5);
    const Grid eps = rng.gaussian_grid(8, 5);
    const Vec map = Vec::Constant(8, 0.125);
    const Grid w = inject_noise(z, eps, NoiseStrategy::Weighted, &map);
    const Grid u = inject_noise(z, eps, NoiseStrategy::Uniform, nullptr);
    CHECK((w - u).norm() == 0.0);
}

TEST_CASE("inject_noise: weighted perturbation keeps the noise energy") {
    numkit::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Grid z = rng.gaussian_grid(10, 6);
        const Grid eps = rng.gaussian_grid(10, 6);
        Vec map(10);
        for (Eigen::Index i = 0; i < map.size(); ++i) map(i) = rng.uniform(0.01, 1.0);
        const Grid out = inject_noise(z, eps, NoiseStrategy::Weighted, &map);
        CHECK(std::abs((out - z).norm() - eps.norm()) < 1e-9);
    }
}

TEST_CASE("inject_noise: weighted concentrates change where the map is large") {
    const Grid z = Grid::Zero(2, 3);
    Grid eps(2, 3);
    eps << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
    Vec map(2);
    map << 1.0, 0.0;
    const Grid out = inject_noise(z, eps, NoiseStrategy::Weighted, &map);
    CHECK(out.row(1).norm() == 0.0);
    CHECK(std::abs(out.row(0).norm() - eps.norm()) < 1e-12);
}

TEST_CASE("inject_noise: weighted argument errors") {
    numkit::Rng rng(14);
    const Grid z = rng.gaussian_grid(4, 3);
    const Grid eps = rng.gaussian_grid(4, 3);
    CHECK_THROWS_AS(inject_noise(z, eps, NoiseStrategy::Weighted, nullptr), ArgumentError);
    const Vec short_map = Vec::Constant(3, 1.0);
    CHECK_THROWS_AS(inject_noise(z, eps, NoiseStrategy::Weighted, &short_map), ShapeError);
    const Vec map = Vec::Constant(4, 1.0);
    const Grid zero = Grid::Zero(4, 3);
    CHECK_THROWS_AS(inject_noise(z, zero, NoiseStrategy::Weighted, &map), NumericError);
}

TEST_CASE("parse_noise_strategy") {
    CHECK(parse_noise_strategy("uniform") == NoiseStrategy::Uniform);
    CHECK(parse_noise_strategy("weighted") == NoiseStrategy::Weighted);
    CHECK_THROWS_AS(parse_noise_strategy("both"), ArgumentError);
}

TEST_CASE("bbox_delta: hand-built 4x4 case") {
    using scenekit::Rgb;
    scenekit::Image a = scenekit::Image::filled(4, 4, Rgb{0, 0, 0});
    scenekit::Image b = a;
    // Change one pixel inside the box by (30,0,0) and one outside by (0,60,0).
    b.set(1, 1, Rgb{30, 0, 0});
    b.set(3, 3, Rgb{0, 60, 0});
    const scenekit::BBox box{0, 0, 2, 2};
    const auto d = bbox_delta(b, a, box);
    REQUIRE(d.has_value());
    // Inside: 4 pixels, one changed by mean 10/255 per channel -> 10/(255*4).
    CHECK(d->in_box == doctest::Approx(10.0 / 255.0 / 4.0).epsilon(1e-12));
    // Outside: 12 pixels, one changed by mean 20/255.
    CHECK(d->out_box == doctest::Approx(20.0 / 255.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("bbox_delta: identical images and inside-only change") {
    using scenekit::Rgb;
    scenekit::Image a = scenekit::Image::filled(8, 8, Rgb{10, 20, 30});
    const scenekit::BBox box{2, 2, 3, 3};
    const auto same = bbox_delta(a, a, box);
    REQUIRE(same.has_value());
    CHECK(same->in_box == 0.0);
    CHECK(same->out_box == 0.0);

    scenekit::Image b = a;
    b.set(3, 3, Rgb{255, 255, 255});
    const auto d = bbox_delta(b, a, box);
    REQUIRE(d.has_value());
    CHECK(d->in_box > 0.0);
    CHECK(d->out_box == 0.0);
}

TEST_CASE("bbox_delta: full-frame box is a skip signal; bad inputs throw") {
    using scenekit::Rgb;
    scenekit::Image a = scenekit::Image::filled(4, 4, Rgb{0, 0, 0});
    CHECK_FALSE(bbox_delta(a, a, scenekit::BBox{0, 0, 4, 4}).has_value());
    scenekit::Image small = scenekit::Image::filled(3, 4, Rgb{0, 0, 0});
    CHECK_THROWS_AS(bbox_delta(a, small, scenekit::BBox{0, 0, 2, 2}), ShapeError);
    CHECK_THROWS_AS(bbox_delta(a, a, scenekit::BBox{0, 0, 0, 0}), ArgumentError);
}

TEST_CASE("detect_color_bbox: exact recovery on rendered single-object scenes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        numkit::Rng rng(numkit::Rng::derive_seed(900, "detect", seed));
        const auto scene = scenekit::gen_scene(rng, 1);
        const auto& obj = scene.spec.objects[0];
        const auto box = detect_color_bbox(scene.image, obj.color);
        REQUIRE(box.has_value());
        CHECK(box->x == obj.bbox.x);
        CHECK(box->y == obj.bbox.y);
        CHECK(box->w == obj.bbox.w);
        CHECK(box->h == obj.bbox.h);
        // A color not present in the scene yields no box.
        const int absent = (obj.color + 1) % scenekit::kNumColors;
        bool present = false;
        for (const auto& o : scene.spec.objects) present |= o.color == absent;
        if (!present) CHECK_FALSE(detect_color_bbox(scene.image, absent).has_value());
    }
    scenekit::Image im = scenekit::Image::filled(4, 4, scenekit::kBackground);
    CHECK_THROWS_AS(detect_color_bbox(im, -1), ArgumentError);
    CHECK_THROWS_AS(detect_color_bbox(im, scenekit::kNumColors), ArgumentError);
}

TEST_CASE("attention_overlap: hand cases, bounds, symmetry") {
    Vec a(4), b(4);
    a << 0.5, 0.5, 0.0, 0.0;
    b << 0.0, 0.5, 0.5, 0.0;
    CHECK(attention_overlap(a, b) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(attention_overlap(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    Vec c(4);
    c << 0.0, 0.0, 0.7, 0.3;
    CHECK(attention_overlap(a, c) == doctest::Approx(0.0).epsilon(1e-12));
    // Sum-normalization makes the measure scale invariant.
    CHECK(attention_overlap(a * 13.0, b * 0.01) ==
          doctest::Approx(attention_overlap(a, b)).epsilon(1e-12));

    numkit::Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        Vec u(6), v(6);
        for (int i = 0; i < 6; ++i) {
            u(i) = rng.uniform(0.0, 1.0) + 1e-6;
            v(i) = rng.uniform(0.0, 1.0) + 1e-6;
        }
        const double o = attention_overlap(u, v);
        CHECK(o >= 0.0);
        CHECK(o <= 1.0 + 1e-12);
        CHECK(o == doctest::Approx(attention_overlap(v, u)).epsilon(1e-12));
    }

    Vec len5 = Vec::Constant(5, 0.2);
    CHECK_THROWS_AS(attention_overlap(a, len5), ShapeError);
    const Vec zero = Vec::Zero(4);
    CHECK_THROWS_AS(attention_overlap(a, zero), DegenerateMapError);
}

TEST_CASE("eval report: aggregate over heterogeneous rows") {
    EvalReport rep;
    rep.rows.push_back({"u", {{"text_match", 0.2}, {"image_match", 0.4}}});
    rep.rows.push_back({"w", {{"text_match", 0.6}, {"image_match", 0.8}, {"overlap", 0.5}}});
    rep.recompute_aggregate();
    CHECK(rep.aggregate.at("text_match") == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(rep.aggregate.at("image_match") == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rep.aggregate.at("overlap") == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("eval report: csv round trip") {
    EvalReport rep;
    rep.rows.push_back({"uniform", {{"image_match", 0.123456789012345}, {"text_match", 0.5}}});
    rep.rows.push_back({"weighted", {{"image_match", 0.9}, {"overlap", 1.0 / 3.0}}});
    rep.recompute_aggregate();
    const std::string path = "test_evalkit_report.csv";
    rep.to_csv(path);
    const EvalReport back = EvalReport::from_csv(path);
    std::remove(path.c_str());

    REQUIRE(back.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(back.rows[i].label == rep.rows[i].label);
        REQUIRE(back.rows[i].metrics.size() == rep.rows[i].metrics.size());
        for (const auto& [k, v] : rep.rows[i].metrics)
            CHECK(back.rows[i].metrics.at(k) == v);  // 17 digits round-trip exactly
    }
    for (const auto& [k, v] : rep.aggregate)
        CHECK(back.aggregate.at(k) == doctest::Approx(v).epsilon(1e-9));

    CHECK_THROWS_AS(EvalReport::from_csv("no_such_report.csv"), IoError);
}

TEST_CASE("relevance harness: input validation happens before any sampling") {
    diffusion::ModelConfig mc;
    mc.h = 2;
    mc.w = 2;
    mc.d = 8;
    mc.d_text = 6;
    mc.d_img = 6;
    mc.n_layers = 2;
    mc.mlp_hidden = 12;
    mc.max_text_len = 8;
    mc.t_steps = 50;
    numkit::Rng init_rng(1);
    auto params = diffusion::DenoiserParams::init(mc, init_rng);
    const auto sched = diffusion::make_schedule(mc.t_steps);

    RelevanceExperimentConfig cfg;
    CHECK_THROWS_AS(relevance_score_harness(params, sched, {}, cfg), ArgumentError);

    std::vector<BenchCase> bench(1);
    cfg.noise_scale = 0.0;
    CHECK_THROWS_AS(relevance_score_harness(params, sched, bench, cfg), ArgumentError);
    cfg.noise_scale = -1.0;
    CHECK_THROWS_AS(relevance_score_harness(params, sched, bench, cfg), ArgumentError);
}
