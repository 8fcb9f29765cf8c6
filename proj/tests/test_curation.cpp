#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wmerge/curation/curation.hpp"

using namespace wmerge;
using curation::ObjectEmbeddings;

namespace {

Vec unit(int dim, int axis) {
    Vec v = Vec::Zero(dim);
    v(axis) = 1.0;
    return v;
}

}  // namespace

TEST_CASE("quality score hand cases: 1+0=1.0 and 1+(-1)=0.0") {
    // Perfect text-image match, orthogonal images.
    std::vector<ObjectEmbeddings> distinct{{unit(4, 0), unit(4, 0)}, {unit(4, 1), unit(4, 1)}};
    const auto s1 = curation::object_quality_score(distinct);
    CHECK(s1.single_object == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s1.object_pair == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s1.total == doctest::Approx(1.0).epsilon(1e-12));

    // Perfect match, identical duplicate objects.
    std::vector<ObjectEmbeddings> dup{{unit(4, 0), unit(4, 0)}, {unit(4, 0), unit(4, 0)}};
    const auto s2 = curation::object_quality_score(dup);
    CHECK(s2.single_object == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s2.object_pair == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s2.total == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single object: pair term is defined as zero") {
    std::vector<ObjectEmbeddings> one{{unit(3, 0), unit(3, 0)}};
    const auto s = curation::object_quality_score(one);
    CHECK(s.object_pair == 0.0);
    CHECK(s.total == s.single_object);
}

TEST_CASE("three-object pair score averages ordered pairs") {
    // Image embeddings with known pairwise cosines: e0.e1 = 0.6, e0.e2 = 0,
    // e1.e2 computed from construction.
    Vec a = unit(3, 0);
    Vec b(3);
    b << 0.6, 0.8, 0.0;
    Vec c = unit(3, 2);
    std::vector<ObjectEmbeddings> objs{{a, a}, {b, b}, {c, c}};
    const double c01 = 0.6, c02 = 0.0, c12 = 0.0;
    const double want = -(2.0 * (c01 + c02 + c12)) / 6.0;  // ordered pairs, n(n-1)=6
    const auto s = curation::object_quality_score(objs);
    CHECK(s.object_pair == doctest::Approx(want).epsilon(1e-12));
    CHECK(s.total == s.single_object + s.object_pair);  // same-precision addition
}

TEST_CASE("score_manifest + select_top_k: ordering, ties, errors") {
    scenekit::Manifest m;
    // Three synthetic records with controlled embeddings.
    auto add_record = [&](double match) {
        scenekit::ManifestRecord r;
        r.image_path = "x.png";
        scenekit::ManifestObject o;
        o.text = "red circle";
        Vec t = unit(2, 0);
        Vec i(2);
        i << match, std::sqrt(1.0 - match * match);
        o.text_emb = static_cast<int>(m.embeddings.size());
        m.embeddings.push_back(t);
        o.img_emb = static_cast<int>(m.embeddings.size());
        m.embeddings.push_back(i);
        r.objects.push_back(o);
        m.records.push_back(r);
    };
    add_record(0.5);
    add_record(0.9);
    add_record(0.5);  // tie with record 0

    curation::score_manifest(m);
    REQUIRE(m.records[0].scores.has_value());
    CHECK(m.records[1].scores->total == doctest::Approx(0.9).epsilon(1e-12));

    const auto top = curation::select_top_k(m, 3, curation::ScoreField::Total);
    CHECK(top.records[0].scores->total == doctest::Approx(0.9));
    // Tie broken by original index: record 0 before record 2.
    CHECK(top.records[1].scores->total == doctest::Approx(0.5));
    CHECK(&top.records[1] != &top.records[2]);

    const auto one = curation::select_top_k(m, 1, curation::ScoreField::Total);
    CHECK(one.records.size() == 1);
    CHECK(one.records[0].scores->total == doctest::Approx(0.9));

    CHECK_THROWS_AS(curation::select_top_k(m, 4, curation::ScoreField::Total), ArgumentError);
}

TEST_CASE("parse_score_field accepts the documented names") {
    CHECK(curation::parse_score_field("total") == curation::ScoreField::Total);
    CHECK(curation::parse_score_field("pair") == curation::ScoreField::ObjectPair);
    CHECK(curation::parse_score_field("single") == curation::ScoreField::SingleObject);
    CHECK_THROWS_AS(curation::parse_score_field("bogus"), ArgumentError);
}

TEST_CASE("duplicated-object scenes score below distinct-object scenes") {
    numkit::Rng rng(5);
    scenekit::StubEmbedder emb;
    double min_distinct = 1e9, max_dup = -1e9;
    for (int i = 0; i < 40; ++i) {
        // Distinct pair vs duplicated pair of the same shape+color.
        const int sh = static_cast<int>(rng.below(4));
        const int co = static_cast<int>(rng.below(8));
        const int sh2 = (sh + 2) % 4;
        const int co2 = (co + 4) % 8;
        auto eval = [&](const std::vector<std::pair<int, int>>& spec) {
            const auto scene = scenekit::gen_scene_with_objects(rng, spec);
            std::vector<ObjectEmbeddings> objs;
            for (const auto& o : scene.spec.objects)
                objs.push_back({emb.embed_text(o.label()),
                                emb.embed_image(scenekit::crop(scene.image, o.bbox))});
            return curation::object_quality_score(objs).total;
        };
        min_distinct = std::min(min_distinct, eval({{sh, co}, {sh2, co2}}));
        max_dup = std::max(max_dup, eval({{sh, co}, {sh, co}}));
    }
    CHECK(max_dup < min_distinct);
}
