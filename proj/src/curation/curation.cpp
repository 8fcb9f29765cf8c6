#include "wmerge/curation/curation.hpp"

#include <algorithm>
#include <numeric>

#include "wmerge/scenekit/embedder.hpp"

namespace wmerge::curation {

double single_object_score(const std::vector<ObjectEmbeddings>& objects) {
    if (objects.empty()) throw ArgumentError("single_object_score: no objects");
    double sum = 0.0;
    for (const auto& o : objects) sum += scenekit::cosine(o.text, o.image);
    return sum / static_cast<double>(objects.size());
}

double object_pair_score(const std::vector<ObjectEmbeddings>& objects) {
    if (objects.empty()) throw ArgumentError("object_pair_score: no objects");
    const std::size_t n = objects.size();
    if (n == 1) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) sum += scenekit::cosine(objects[i].image, objects[j].image);
    return -sum / static_cast<double>(n * (n - 1));
}

Scores object_quality_score(const std::vector<ObjectEmbeddings>& objects) {
    Scores s;
    s.single_object = single_object_score(objects);
    s.object_pair = object_pair_score(objects);
    s.total = s.single_object + s.object_pair;
    return s;
}

void score_manifest(Manifest& m) {
    for (auto& rec : m.records) {
        std::vector<ObjectEmbeddings> objs;
        for (const auto& o : rec.objects) {
            if (o.text_emb < 0 || o.img_emb < 0)
                throw DataError("score_manifest: record '" + rec.image_path +
                                "' is missing embeddings");
            objs.push_back({m.embedding(o.text_emb), m.embedding(o.img_emb)});
        }
        rec.scores = object_quality_score(objs);
    }
}

ScoreField parse_score_field(const std::string& s) {
    if (s == "total") return ScoreField::Total;
    if (s == "pair") return ScoreField::ObjectPair;
    if (s == "single") return ScoreField::SingleObject;
    throw ArgumentError("unknown score field '" + s + "' (expected total, pair or single)");
}

Manifest select_top_k(const Manifest& m, std::size_t k, ScoreField field) {
    if (k > m.records.size())
        throw ArgumentError("select_top_k: k=" + std::to_string(k) + " exceeds " +
                            std::to_string(m.records.size()) + " records");
    auto value = [&](const scenekit::ManifestRecord& r) {
        if (!r.scores) throw DataError("select_top_k: record '" + r.image_path + "' is unscored");
        switch (field) {
            case ScoreField::Total: return r.scores->total;
            case ScoreField::ObjectPair: return r.scores->object_pair;
            case ScoreField::SingleObject: return r.scores->single_object;
        }
        throw ArgumentError("select_top_k: bad score field");
    };
    std::vector<std::size_t> idx(m.records.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return value(m.records[a]) > value(m.records[b]);
    });
    Manifest out;
    out.dir = m.dir;
    out.embeddings = m.embeddings;
    for (std::size_t i = 0; i < k; ++i) out.records.push_back(m.records[idx[i]]);
    return out;
}

}  // namespace wmerge::curation
