#pragma once

#include "wmerge/diffusion/latent_codec.hpp"
#include "wmerge/diffusion/train.hpp"
#include "wmerge/scenekit/dataset.hpp"

namespace wmerge::diffusion {

// Conditions (prompt tokens, per-object text tokens, cached reference
// embeddings, latent-space bbox masks) for one manifest record.
Conditions make_conditions(const scenekit::ManifestRecord& rec, const scenekit::Manifest& m,
                           const ModelConfig& cfg);

// 0/1 mask over latent cells whose pixel block intersects the bbox.
Vec latent_mask(const scenekit::BBox& box, const ModelConfig& cfg, int image_size);

struct TrainRunOptions {
    int steps = 1000;
    int batch_size = 8;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::Pretrain;
    DropoutConfig dropout;
    std::string loss_csv;       // optional CSV log path
    int ckpt_every = 0;         // optional periodic checkpointing
    std::string ckpt_path;      // required when ckpt_every > 0 or for the final save
};

struct TrainRunResult {
    std::vector<double> losses;
};

// Deterministic training loop over a manifest: latents are pre-encoded once,
// batches are drawn from a seed-derived stream, condition dropout applied per
// batch. Raises NumericError on non-finite loss (last good checkpoint is kept
// when periodic checkpointing is on).
TrainRunResult run_training(DenoiserParams& params, const scenekit::Manifest& manifest,
                            const DiffusionSchedule& sched, const TrainRunOptions& opt);

}  // namespace wmerge::diffusion
