#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "wmerge/scenekit/dataset.hpp"
#include "wmerge/scenekit/scene.hpp"

using namespace wmerge;
using namespace wmerge::scenekit;
namespace fs = std::filesystem;

TEST_CASE("gen_scene: same seed gives identical pixels and spec") {
    numkit::Rng a(7), b(7);
    const Scene sa = gen_scene(a, 3);
    const Scene sb = gen_scene(b, 3);
    CHECK(sa.image.rgb == sb.image.rgb);
    REQUIRE(sa.spec.objects.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(sa.spec.objects[i].shape == sb.spec.objects[i].shape);
        CHECK(sa.spec.objects[i].bbox.x == sb.spec.objects[i].bbox.x);
    }
}

TEST_CASE("single object: one box, prompt names it") {
    numkit::Rng rng(9);
    const Scene s = gen_scene(rng, 1);
    REQUIRE(s.spec.objects.size() == 1);
    const auto& o = s.spec.objects[0];
    CHECK(s.spec.prompt == "a " + o.label());
}

TEST_CASE("bbox invariants hold over a 1000-scene sweep") {
    numkit::Rng rng(11);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const Scene s = gen_scene(rng, n);
        REQUIRE(static_cast<int>(s.spec.objects.size()) == n);
        for (std::size_t a = 0; a < s.spec.objects.size(); ++a) {
            const BBox& box = s.spec.objects[a].bbox;
            // Inside the canvas and non-empty.
            if (box.empty() || box.x < 0 || box.y < 0 || box.x + box.w > kCanvas ||
                box.y + box.h > kCanvas)
                ++violations;
            // Tight: the object's color appears on every box edge row/column
            // is not guaranteed after occlusion, but the box must contain at
            // least one pixel of the object's color.
            const Rgb want = color_values()[static_cast<std::size_t>(s.spec.objects[a].color)];
            bool found = false;
            for (int y = box.y; y < box.y + box.h && !found; ++y)
                for (int x = box.x; x < box.x + box.w && !found; ++x) {
                    const std::size_t o = static_cast<std::size_t>(3 * (y * kCanvas + x));
                    found = s.image.rgb[o] == want.r && s.image.rgb[o + 1] == want.g &&
                            s.image.rgb[o + 2] == want.b;
                }
            if (!found) ++violations;
            // Pairwise overlap at most 20% of the smaller box.
            for (std::size_t b = a + 1; b < s.spec.objects.size(); ++b) {
                const BBox& ob = s.spec.objects[b].bbox;
                const int smaller = std::min(box.area(), ob.area());
                if (BBox::overlap_area(box, ob) * 5 > smaller) ++violations;
            }
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("stub embedder: cosine contracts") {
    StubEmbedder emb;
    numkit::Rng rng(13);
    double min_match = 1.0, max_mismatch = -1.0;
    for (int trial = 0; trial < 60; ++trial) {
        const Scene s = gen_scene(rng, 1);
        const auto& o = s.spec.objects[0];
        const Vec ti = emb.embed_image(crop(s.image, o.bbox));
        min_match = std::min(min_match, cosine(emb.embed_text(o.label()), ti));
        // A label disagreeing in both shape and color.
        const int other_shape = (o.shape + 1) % kNumShapes;
        const int other_color = (o.color + 3) % kNumColors;
        max_mismatch =
            std::max(max_mismatch, cosine(emb.embed_text(object_label(other_shape, other_color)),
                                          ti));
    }
    CHECK(min_match >= 0.95);
    CHECK(max_mismatch <= 0.3);

    const Vec t = emb.embed_text("red circle");
    CHECK(cosine(t, t) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(emb.embed_text("mauve dodecahedron"), ArgumentError);
}

TEST_CASE("png round trip preserves bytes") {
    numkit::Rng rng(15);
    const Scene s = gen_scene(rng, 2);
    write_png(s.image, "png_rt.png");
    const Image back = read_png("png_rt.png");
    CHECK(back.w == s.image.w);
    CHECK(back.rgb == s.image.rgb);
    std::remove("png_rt.png");
}

TEST_CASE("build_dataset: files exist, reload matches, byte-identical per seed") {
    DatasetOptions opt;
    opt.n_images = 10;
    opt.seed = 21;
    StubEmbedder emb;
    const Manifest m = build_dataset(opt, emb, "ds_a");
    REQUIRE(m.records.size() == 10);
    for (const auto& r : m.records) CHECK(fs::exists(fs::path("ds_a") / r.image_path));

    const Manifest back = load_manifest("ds_a/manifest.jsonl");
    REQUIRE(back.records.size() == 10);
    CHECK(back.embeddings.size() == m.embeddings.size());
    for (std::size_t i = 0; i < back.embeddings.size(); ++i)
        CHECK((back.embeddings[i] - m.embeddings[i]).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(back.records[i].prompt == m.records[i].prompt);
        CHECK(back.records[i].objects.size() == m.records[i].objects.size());
    }

    build_dataset(opt, emb, "ds_b");
    auto bytes = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    CHECK(bytes("ds_a/manifest.jsonl") == bytes("ds_b/manifest.jsonl"));
    CHECK(bytes("ds_a/manifest.jsonl.emb") == bytes("ds_b/manifest.jsonl.emb"));
    CHECK(bytes("ds_a/img_000000.png") == bytes("ds_b/img_000000.png"));
    fs::remove_all("ds_a");
    fs::remove_all("ds_b");
}

TEST_CASE("build_dataset: object-count histogram within 3 sigma of the mixture") {
    DatasetOptions opt;
    opt.n_images = 2000;
    opt.seed = 33;
    StubEmbedder emb;
    const Manifest m = build_dataset(opt, emb, "ds_hist");
    std::map<std::size_t, int> counts;
    for (const auto& r : m.records) counts[r.objects.size()]++;
    const double n = 2000.0;
    const std::vector<double> p{0.25, 0.40, 0.20, 0.15};
    for (std::size_t k = 1; k <= 4; ++k) {
        const double mean = n * p[k - 1];
        const double sigma = std::sqrt(n * p[k - 1] * (1.0 - p[k - 1]));
        CHECK(std::abs(counts[k] - mean) <= 3.0 * sigma);
    }
    fs::remove_all("ds_hist");
}

TEST_CASE("tokenizer round trip over the scene vocabulary") {
    const auto toks = tokenize("a red circle and a blue star");
    const std::vector<int> want{1, 7, 3, 2, 1, 9, 6};
    CHECK(toks == want);
    CHECK_THROWS_AS(tokenize("unknown words here"), ArgumentError);
}
