#pragma once

#include <map>
#include <optional>

#include "wmerge/diffusion/pipeline.hpp"
#include "wmerge/diffusion/sampler.hpp"

namespace wmerge::evalkit {

using diffusion::Conditions;
using diffusion::DenoiserParams;
using diffusion::DiffusionSchedule;
using scenekit::BBox;
using scenekit::Image;

enum class NoiseStrategy { Uniform, Weighted };

NoiseStrategy parse_noise_strategy(const std::string& s);

// Adds eps_object into z_text; weighted distributes it by the normalized
// relevance map, rescaled so that the added noise keeps the norm of
// eps_object (equal-norm comparison across strategies).
Grid inject_noise(const Grid& z_text, const Grid& eps_object, NoiseStrategy strategy,
                  const Vec* map);

struct BboxDelta {
    double in_box = 0.0;
    double out_box = 0.0;
};

// Mean absolute per-pixel RGB difference inside / outside the box (pixels in
// [0,1]). nullopt when the box covers the full frame (skip signal).
std::optional<BboxDelta> bbox_delta(const Image& img_noise, const Image& img_no_noise,
                                    const BBox& box);

// Tight bbox of the pixels whose nearest palette entry (colors + background)
// is the given color; nullopt when nothing matches. The exact-color analogue
// of a detector on this synthetic image family.
std::optional<BBox> detect_color_bbox(const Image& im, int color_idx);

// Histogram intersection of two sum-normalized maps; 1 identical, 0 disjoint.
double attention_overlap(const Vec& map_a, const Vec& map_b);

struct RelevanceExperimentConfig {
    NoiseStrategy strategy = NoiseStrategy::Uniform;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;
    std::vector<int> layers;     // empty = all layers
    int target_object = 0;
    bool every_step = true;      // inject at every sampler step vs only the first
    int ddim_steps = 50;
    double guidance = 7.5;
};

struct BenchCase {
    Conditions cond;
    std::string prompt;
    std::vector<int> object_colors;  // palette index per object
    int target = 0;
};

BenchCase bench_case_from_record(const scenekit::ManifestRecord& rec,
                                 const scenekit::Manifest& m,
                                 const diffusion::ModelConfig& cfg);

struct HarnessResult {
    double score = 0.0;  // mean over used prompts of delta_bbox / delta_non_bbox
    int used = 0;
    int skipped = 0;
    std::vector<double> per_image;
    std::vector<int> used_prompts;  // bench indices aligned with per_image
};

// The noise-injection verification: for each prompt generate a same-seed
// (noise, no-noise) pair, locate the target object in the no-noise image,
// and average the in-box / out-of-box pixel-change ratio.
HarnessResult relevance_score_harness(DenoiserParams& params, const DiffusionSchedule& sched,
                                      const std::vector<BenchCase>& bench,
                                      const RelevanceExperimentConfig& cfg);

// Mean cosine between text embeddings of the listed object labels and the
// image embedding of each generated image.
double text_match_score(const std::vector<Image>& images,
                        const std::vector<std::vector<std::string>>& labels,
                        scenekit::Embedder& embedder);

// Mean cosine between each generated image and its reference embeddings.
// When a reference's palette color is supplied, the cosine is taken against
// the detected region of that color (whole image as fallback).
double image_match_score(const std::vector<Image>& images,
                         const std::vector<std::vector<Vec>>& refs,
                         scenekit::Embedder& embedder,
                         const std::vector<std::vector<int>>* ref_colors = nullptr);

struct EvalRow {
    std::string label;
    std::map<std::string, double> metrics;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::map<std::string, double> aggregate;  // mean of each metric over rows

    void recompute_aggregate();
    void to_csv(const std::string& path) const;
    static EvalReport from_csv(const std::string& path);
};

struct AblationOptions {
    int n_prompts = 50;
    int samples_per_prompt = 5;
    int ddim_steps = 50;
    double guidance = 7.5;
    std::uint64_t seed = 0;
};

// Per-checkpoint generation metrics (text_match / image_match /
// attention_overlap) over a shared bench; one report row per variant.
EvalReport run_merge_ablation(const std::vector<std::pair<std::string, std::string>>& variant_ckpts,
                              const scenekit::Manifest& bench, const AblationOptions& opt);

// Generation metrics for a single model over a bench manifest.
EvalRow eval_model(DenoiserParams& params, const std::string& label,
                   const scenekit::Manifest& bench, const AblationOptions& opt);

}  // namespace wmerge::evalkit
