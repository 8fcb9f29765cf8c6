#pragma once

#include <map>
#include <optional>

#include "wmerge/scenekit/embedder.hpp"

namespace wmerge::scenekit {

struct ManifestObject {
    std::string text;
    BBox bbox;
    int shape = -1;
    int color = -1;
    int text_emb = -1;  // index into the embedding cache
    int img_emb = -1;
};

struct Scores {
    double single_object = 0.0;
    double object_pair = 0.0;
    double total = 0.0;
};

struct ManifestRecord {
    std::string image_path;  // relative to the manifest directory
    std::string prompt;
    std::vector<ManifestObject> objects;
    std::optional<Scores> scores;
};

// Newline-delimited JSON records plus a flat binary embedding cache
// ("<manifest>.emb": u32 count, u32 dim, f32 data).
struct Manifest {
    std::vector<ManifestRecord> records;
    std::vector<Vec> embeddings;
    std::string dir;  // directory the image paths resolve against

    const Vec& embedding(int idx) const {
        if (idx < 0 || idx >= static_cast<int>(embeddings.size()))
            throw DataError("manifest: embedding index " + std::to_string(idx) + " out of range");
        return embeddings[static_cast<std::size_t>(idx)];
    }
};

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// The embedding cache stores 32-bit floats; snapping cached vectors to that
// grid up front makes save/load a bit-exact round trip.
inline Vec f32_snap(const Vec& v) {
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out(i) = static_cast<double>(static_cast<float>(v(i)));
    return out;
}

struct DatasetOptions {
    int n_images = 0;
    std::uint64_t seed = 0;
    int max_objects = 4;
    // Mixture over object counts 1..max_objects; normalized internally.
    std::vector<double> count_mixture{0.25, 0.40, 0.20, 0.15};
};

// Renders scenes, writes PNGs + manifest + embedding cache into out_dir.
// Deterministic for a given (seed, options): per-image streams are derived
// from hash(seed, index).
Manifest build_dataset(const DatasetOptions& opt, Embedder& embedder, const std::string& out_dir);

}  // namespace wmerge::scenekit
