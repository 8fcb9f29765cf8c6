#pragma once

#include "wmerge/diffusion/model.hpp"
#include "wmerge/diffusion/schedule.hpp"

namespace wmerge::diffusion {

// One training example: clean latent, timestep, target noise, conditions.
struct TrainSample {
    Grid x0;
    int t = 1;
    Grid eps;  // noise realisation used for x_t and as the regression target
    Conditions cond;
};

struct TrainBatch {
    std::vector<TrainSample> samples;
};

// Mutually exclusive dropout events so each configured probability is the
// exact empirical frequency of its event: one uniform draw selects
// text-only / image-only / both with the given probabilities.
struct DropoutConfig {
    double p_text = 0.05;
    double p_img = 0.05;
    double p_both = 0.05;
};

// Applies condition dropout in place; dropped text becomes the null prompt,
// dropped images an empty reference list. Flags are recorded on Conditions.
void condition_dropout(TrainBatch& batch, const DropoutConfig& cfg, Rng& rng);

// Mean over the batch of ||eps - eps_theta(x_t, c, t)||^2 (MSE over entries).
tape::Var training_loss_t(tape::Graph& g, const ParamVars& vars, const ModelConfig& cfg,
                          const TrainBatch& batch, const DiffusionSchedule& sched);

double training_loss(DenoiserParams& params, const TrainBatch& batch,
                     const DiffusionSchedule& sched);

// AdamW state per trainable tensor.
struct AdamWState {
    struct Moments {
        Grid m, v;
    };
    std::map<std::string, Moments> moments;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// One forward/backward plus an AdamW update restricted to the tensors
// trainable under `mode`; frozen tensors stay bit-identical. Returns the
// batch loss. Non-finite loss raises NumericError before touching params.
double train_step(DenoiserParams& params, const TrainBatch& batch,
                  const DiffusionSchedule& sched, AdamWState& state, double lr, TrainMode mode);

}  // namespace wmerge::diffusion
