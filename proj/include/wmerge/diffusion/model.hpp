#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmerge/merge/merge.hpp"
#include "wmerge/numkit/rng.hpp"

namespace wmerge::diffusion {

enum class MergeMode {
    Uniform,       // Z_text + sum Z_img
    Local,         // ablation baseline: each Z_img restricted to its bbox rows
    Weighted,      // image relevance weights
    TextWeighted,  // text weight only, uniform image add
    Trained,       // image relevance + trained text weight
};

enum class TrainMode { Pretrain, Finetune };

// Representation of a dropped image condition inside the denoiser.
enum class NullImageMode { LearnedToken, ZeroValues };

MergeMode parse_merge_mode(const std::string& s);
std::string merge_mode_name(MergeMode m);

struct ModelConfig {
    int h = 8;
    int w = 8;
    int d = 64;
    int d_text = 32;
    int d_img = 32;
    int n_layers = 4;
    int mlp_hidden = 128;
    int vocab = 16;
    int max_text_len = 16;
    int t_steps = 1000;
    int max_refs = 4;
    MergeMode merge_mode = MergeMode::Weighted;
    NullImageMode null_image_mode = NullImageMode::LearnedToken;

    int positions() const { return h * w; }
};

struct TextWeightParams {
    Grid w_f;  // d x 1
    Grid b_f;  // 1 x 1
};

struct LayerParams {
    Grid self_w_q, self_w_k, self_w_v;  // d x d
    attn::AttnProjections cross;
    TextWeightParams tw;
    Grid mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct DenoiserParams {
    ModelConfig cfg;
    Grid token_embed;  // vocab x d_text
    Grid text_pos;     // max_text_len x d_text
    Grid lat_pos;      // (h*w) x d
    Grid time_embed;   // (T+1) x d
    Grid null_img;     // 1 x d_img
    Grid head_w;       // d x d
    Grid head_b;       // 1 x d
    std::vector<LayerParams> layers;

    // Visits every tensor with its canonical checkpoint name, in a fixed order.
    void for_each_tensor(const std::function<void(const std::string&, Grid&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Grid&)>& fn) const;

    static DenoiserParams init(const ModelConfig& cfg, Rng& rng);
};

// True if the named tensor updates under the given training mode. Finetune
// trains only the shared image projections and the text-weight layer.
bool is_trainable(const std::string& name, TrainMode mode);

// One reference image condition with the token ids of its object text.
struct RefCondition {
    Grid feats;                   // S_img x d_img
    std::vector<int> obj_tokens;  // object text ids, used for the relevance map
    Vec local_mask;               // h*w 0/1 rows, only used by MergeMode::Local
};

struct Conditions {
    std::vector<int> prompt_tokens;
    std::vector<RefCondition> refs;
    bool text_dropped = false;
    bool img_dropped = false;
};

// Optional instrumentation of the forward pass (noise injection into Z_text,
// relevance-map capture). Only active on non-training forwards.
struct ForwardHooks {
    // Replaces Z_text in layer `layer`; raw_maps are the per-ref relevance
    // distributions of that layer (each sums to 1 over positions).
    std::function<Grid(int layer, const Grid& z_text, const std::vector<Vec>& raw_maps)>
        z_text_override;
    // If set, receives per-layer per-ref raw relevance maps.
    std::vector<std::vector<Vec>>* relevance_out = nullptr;
    // If set, freezes relevance maps captured on the first forward of a
    // sampler run and reuses them afterwards (set by the sampler).
    const std::vector<std::vector<Vec>>* relevance_frozen = nullptr;
};

// Tape leaves for every parameter, built once per graph.
struct ParamVars {
    tape::Var token_embed, text_pos, lat_pos, time_embed, null_img, head_w, head_b;
    struct Layer {
        tape::Var self_w_q, self_w_k, self_w_v;
        tape::Var w_q, w_k_text, w_v_text, w_k_img, w_v_img;
        tape::Var tw_w_f, tw_b_f;
        tape::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    };
    std::vector<Layer> layers;
};

ParamVars make_param_vars(tape::Graph& g, DenoiserParams& p,
                          std::optional<TrainMode> train_mode);

// After backward(), copies accumulated parameter gradients out by name.
std::map<std::string, Grid> collect_grads(const ParamVars& vars, const DenoiserParams& p);

// Full denoiser: per layer self-attention, decoupled/weighted cross-attention
// with per-object relevance maps, MLP, residuals and pre-normalization
// throughout; linear head back to the latent shape.
tape::Var denoiser_forward_t(tape::Graph& g, const ParamVars& vars, const ModelConfig& cfg,
                             const Conditions& cond, const tape::Var& x_t, int t,
                             const ForwardHooks* hooks = nullptr);

// Value-only forward (no gradients recorded as trainable).
Grid denoiser_forward(DenoiserParams& params, const Conditions& cond, const Grid& x_t, int t,
                      const ForwardHooks* hooks = nullptr);

}  // namespace wmerge::diffusion
