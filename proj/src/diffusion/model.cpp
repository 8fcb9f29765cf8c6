#include "wmerge/diffusion/model.hpp"

namespace wmerge::diffusion {

MergeMode parse_merge_mode(const std::string& s) {
    if (s == "uniform") return MergeMode::Uniform;
    if (s == "local") return MergeMode::Local;
    if (s == "weighted") return MergeMode::Weighted;
    if (s == "text_weighted") return MergeMode::TextWeighted;
    if (s == "trained") return MergeMode::Trained;
    throw ConfigError("unknown merge mode '" + s + "'");
}

std::string merge_mode_name(MergeMode m) {
    switch (m) {
        case MergeMode::Uniform: return "uniform";
        case MergeMode::Local: return "local";
        case MergeMode::Weighted: return "weighted";
        case MergeMode::TextWeighted: return "text_weighted";
        case MergeMode::Trained: return "trained";
    }
    throw ConfigError("bad merge mode value");
}

namespace {

template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
    fn("token_embed", p.token_embed);
    fn("text_pos", p.text_pos);
    fn("lat_pos", p.lat_pos);
    fn("time_embed", p.time_embed);
    fn("null_img", p.null_img);
    fn("head_w", p.head_w);
    fn("head_b", p.head_b);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        const std::string pre = "layers." + std::to_string(l) + ".";
        fn(pre + "self_w_q", lay.self_w_q);
        fn(pre + "self_w_k", lay.self_w_k);
        fn(pre + "self_w_v", lay.self_w_v);
        fn(pre + "cross.w_q", lay.cross.w_q);
        fn(pre + "cross.w_k_text", lay.cross.w_k_text);
        fn(pre + "cross.w_v_text", lay.cross.w_v_text);
        fn(pre + "cross.w_k_img", lay.cross.w_k_img);
        fn(pre + "cross.w_v_img", lay.cross.w_v_img);
        fn(pre + "tw.w_f", lay.tw.w_f);
        fn(pre + "tw.b_f", lay.tw.b_f);
        fn(pre + "mlp.w1", lay.mlp_w1);
        fn(pre + "mlp.b1", lay.mlp_b1);
        fn(pre + "mlp.w2", lay.mlp_w2);
        fn(pre + "mlp.b2", lay.mlp_b2);
    }
}

// All tensors snap to the f32 grid at init so checkpoints round-trip
// bit-exactly from a fresh model.
Grid f32_snap(Grid g) {
    for (Eigen::Index i = 0; i < g.size(); ++i)
        g.data()[i] = static_cast<double>(static_cast<float>(g.data()[i]));
    return g;
}

Grid init_weight(Rng& rng, int rows, int cols) {
    const double std = 1.0 / std::sqrt(static_cast<double>(rows));
    return f32_snap(rng.gaussian_grid(rows, cols) * std);
}

}  // namespace

void DenoiserParams::for_each_tensor(const std::function<void(const std::string&, Grid&)>& fn) {
    visit_tensors(*this, fn);
}

void DenoiserParams::for_each_tensor(
    const std::function<void(const std::string&, const Grid&)>& fn) const {
    visit_tensors(*this, fn);
}

DenoiserParams DenoiserParams::init(const ModelConfig& cfg, Rng& rng) {
    DenoiserParams p;
    p.cfg = cfg;
    p.token_embed = f32_snap(rng.gaussian_grid(cfg.vocab, cfg.d_text) * 0.5);
    p.text_pos = f32_snap(rng.gaussian_grid(cfg.max_text_len, cfg.d_text) * 0.1);
    p.lat_pos = f32_snap(rng.gaussian_grid(cfg.positions(), cfg.d) * 0.1);
    p.time_embed = f32_snap(rng.gaussian_grid(cfg.t_steps + 1, cfg.d) * 0.1);
    p.null_img = f32_snap(rng.gaussian_grid(1, cfg.d_img) * 0.5);
    p.head_w = init_weight(rng, cfg.d, cfg.d);
    p.head_b = Grid::Zero(1, cfg.d);
    p.layers.resize(cfg.n_layers);
    for (auto& lay : p.layers) {
        lay.self_w_q = init_weight(rng, cfg.d, cfg.d);
        lay.self_w_k = init_weight(rng, cfg.d, cfg.d);
        lay.self_w_v = init_weight(rng, cfg.d, cfg.d);
        lay.cross.w_q = init_weight(rng, cfg.d, cfg.d);
        lay.cross.w_k_text = init_weight(rng, cfg.d_text, cfg.d);
        lay.cross.w_v_text = init_weight(rng, cfg.d_text, cfg.d);
        lay.cross.w_k_img = init_weight(rng, cfg.d_img, cfg.d);
        lay.cross.w_v_img = init_weight(rng, cfg.d_img, cfg.d);
        // Zero init: training starts exactly at the training-free
        // weighted-merge behaviour.
        lay.tw.w_f = Grid::Zero(cfg.d, 1);
        lay.tw.b_f = Grid::Zero(1, 1);
        lay.mlp_w1 = init_weight(rng, cfg.d, cfg.mlp_hidden);
        lay.mlp_b1 = Grid::Zero(1, cfg.mlp_hidden);
        lay.mlp_w2 = init_weight(rng, cfg.mlp_hidden, cfg.d);
        lay.mlp_b2 = Grid::Zero(1, cfg.d);
    }
    return p;
}

bool is_trainable(const std::string& name, TrainMode mode) {
    if (mode == TrainMode::Pretrain) return true;
    return name.find("cross.w_k_img") != std::string::npos ||
           name.find("cross.w_v_img") != std::string::npos ||
           name.find("tw.w_f") != std::string::npos ||
           name.find("tw.b_f") != std::string::npos;
}

ParamVars make_param_vars(tape::Graph& g, DenoiserParams& p,
                          std::optional<TrainMode> train_mode) {
    auto var = [&](const std::string& name, Grid& t) {
        const bool req = train_mode && is_trainable(name, *train_mode);
        return g.leaf(t, req);
    };
    ParamVars v;
    v.token_embed = var("token_embed", p.token_embed);
    v.text_pos = var("text_pos", p.text_pos);
    v.lat_pos = var("lat_pos", p.lat_pos);
    v.time_embed = var("time_embed", p.time_embed);
    v.null_img = var("null_img", p.null_img);
    v.head_w = var("head_w", p.head_w);
    v.head_b = var("head_b", p.head_b);
    v.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        auto& lv = v.layers[l];
        const std::string pre = "layers." + std::to_string(l) + ".";
        lv.self_w_q = var(pre + "self_w_q", lay.self_w_q);
        lv.self_w_k = var(pre + "self_w_k", lay.self_w_k);
        lv.self_w_v = var(pre + "self_w_v", lay.self_w_v);
        lv.w_q = var(pre + "cross.w_q", lay.cross.w_q);
        lv.w_k_text = var(pre + "cross.w_k_text", lay.cross.w_k_text);
        lv.w_v_text = var(pre + "cross.w_v_text", lay.cross.w_v_text);
        lv.w_k_img = var(pre + "cross.w_k_img", lay.cross.w_k_img);
        lv.w_v_img = var(pre + "cross.w_v_img", lay.cross.w_v_img);
        lv.tw_w_f = var(pre + "tw.w_f", lay.tw.w_f);
        lv.tw_b_f = var(pre + "tw.b_f", lay.tw.b_f);
        lv.mlp_w1 = var(pre + "mlp.w1", lay.mlp_w1);
        lv.mlp_b1 = var(pre + "mlp.b1", lay.mlp_b1);
        lv.mlp_w2 = var(pre + "mlp.w2", lay.mlp_w2);
        lv.mlp_b2 = var(pre + "mlp.b2", lay.mlp_b2);
    }
    return v;
}

std::map<std::string, Grid> collect_grads(const ParamVars& vars, const DenoiserParams& p) {
    std::map<std::string, Grid> out;
    auto grab = [&](const std::string& name, const tape::Var& v) {
        if (!v->requires_grad) return;
        out[name] = v->grad.size() ? v->grad : Grid::Zero(v->val.rows(), v->val.cols());
    };
    grab("token_embed", vars.token_embed);
    grab("text_pos", vars.text_pos);
    grab("lat_pos", vars.lat_pos);
    grab("time_embed", vars.time_embed);
    grab("null_img", vars.null_img);
    grab("head_w", vars.head_w);
    grab("head_b", vars.head_b);
    for (std::size_t l = 0; l < vars.layers.size(); ++l) {
        const auto& lv = vars.layers[l];
        const std::string pre = "layers." + std::to_string(l) + ".";
        grab(pre + "self_w_q", lv.self_w_q);
        grab(pre + "self_w_k", lv.self_w_k);
        grab(pre + "self_w_v", lv.self_w_v);
        grab(pre + "cross.w_q", lv.w_q);
        grab(pre + "cross.w_k_text", lv.w_k_text);
        grab(pre + "cross.w_v_text", lv.w_v_text);
        grab(pre + "cross.w_k_img", lv.w_k_img);
        grab(pre + "cross.w_v_img", lv.w_v_img);
        grab(pre + "tw.w_f", lv.tw_w_f);
        grab(pre + "tw.b_f", lv.tw_b_f);
        grab(pre + "mlp.w1", lv.mlp_w1);
        grab(pre + "mlp.b1", lv.mlp_b1);
        grab(pre + "mlp.w2", lv.mlp_w2);
        grab(pre + "mlp.b2", lv.mlp_b2);
    }
    (void)p;
    return out;
}

namespace {

// Token embedding + positions for a token id sequence.
tape::Var embed_tokens(tape::Graph& g, const ParamVars& vars, const std::vector<int>& tokens) {
    if (tokens.empty()) throw ArgumentError("denoiser_forward: empty token sequence");
    std::vector<int> pos(tokens.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    return g.add(g.rows_select(vars.token_embed, tokens), g.rows_select(vars.text_pos, pos));
}

}  // namespace

tape::Var denoiser_forward_t(tape::Graph& g, const ParamVars& vars, const ModelConfig& cfg,
                             const Conditions& cond, const tape::Var& x_t, int t,
                             const ForwardHooks* hooks) {
    if (t < 0 || t > cfg.t_steps) throw ArgumentError("denoiser_forward: t out of range");
    if (x_t->val.rows() != cfg.positions() || x_t->val.cols() != cfg.d)
        throw ShapeError("denoiser_forward: x_t " + numkit::shape_str(x_t->val) + ", expected " +
                         std::to_string(cfg.positions()) + "x" + std::to_string(cfg.d));
    if (static_cast<int>(cond.refs.size()) > cfg.max_refs)
        throw ArgumentError("denoiser_forward: too many reference streams");

    const auto c_text = embed_tokens(g, vars, cond.prompt_tokens);

    // Image condition streams; a fully dropped image list maps to the learned
    // null-image token (or is skipped entirely in ZeroValues mode).
    struct Stream {
        tape::Var feats;
        std::vector<int> obj_tokens;
        const Vec* mask = nullptr;
    };
    std::vector<Stream> streams;
    if (cond.refs.empty()) {
        if (cfg.null_image_mode == NullImageMode::LearnedToken)
            streams.push_back({vars.null_img, {0}, nullptr});
    } else {
        for (const auto& r : cond.refs) {
            if (r.feats.cols() != cfg.d_img)
                throw ShapeError("denoiser_forward: ref feats " + numkit::shape_str(r.feats));
            streams.push_back({g.constant(r.feats), r.obj_tokens, &r.local_mask});
        }
    }

    const double self_scale = std::sqrt(static_cast<double>(cfg.d));
    tape::Var z = g.add_row(g.add(x_t, vars.lat_pos),
                            g.rows_select(vars.time_embed, {t}));

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lv = vars.layers[static_cast<std::size_t>(l)];

        // Self-attention over spatial positions.
        {
            const auto zn = g.rmsnorm_rows(z);
            const auto q = g.matmul(zn, lv.self_w_q);
            const auto k = g.matmul(zn, lv.self_w_k);
            const auto v = g.matmul(zn, lv.self_w_v);
            const auto att = g.matmul(g.softmax_rows(g.matmul(q, g.transpose(k)), self_scale), v);
            z = g.add(z, att);
        }

        // Decoupled cross-attention with per-object relevance maps.
        {
            const auto zn = g.rmsnorm_rows(z);
            tape::Var z_text = attn::cross_attention_t(g, zn, c_text, lv.w_k_text, lv.w_v_text,
                                                       lv.w_q);
            std::vector<tape::Var> z_imgs, raw_maps;
            std::vector<Vec> map_values;
            for (std::size_t i = 0; i < streams.size(); ++i) {
                z_imgs.push_back(attn::cross_attention_t(g, zn, streams[i].feats, lv.w_k_img,
                                                         lv.w_v_img, lv.w_q));
                tape::Var m;
                if (hooks && hooks->relevance_frozen) {
                    const auto& fr = *hooks->relevance_frozen;
                    if (fr.size() <= static_cast<std::size_t>(l) || fr[static_cast<std::size_t>(l)].size() <= i)
                        throw ArgumentError("denoiser_forward: frozen relevance maps missing");
                    m = g.constant(Grid(fr[static_cast<std::size_t>(l)][i]));
                } else {
                    m = attn::relevance_map_t(g, zn, embed_tokens(g, vars, streams[i].obj_tokens),
                                              lv.w_q, lv.w_k_text);
                }
                raw_maps.push_back(m);
                map_values.push_back(Vec(m->val.col(0)));
            }
            if (hooks && hooks->relevance_out) {
                if (hooks->relevance_out->size() != static_cast<std::size_t>(cfg.n_layers))
                    hooks->relevance_out->resize(static_cast<std::size_t>(cfg.n_layers));
                (*hooks->relevance_out)[static_cast<std::size_t>(l)] = map_values;
            }
            if (hooks && hooks->z_text_override)
                z_text = g.constant(hooks->z_text_override(l, z_text->val, map_values));

            tape::Var merged;
            switch (cfg.merge_mode) {
                case MergeMode::Uniform:
                    merged = z_text;
                    for (const auto& zi : z_imgs) merged = g.add(merged, zi);
                    break;
                case MergeMode::Local:
                    merged = z_text;
                    for (std::size_t i = 0; i < z_imgs.size(); ++i) {
                        const Vec* mask = streams[i].mask;
                        if (!mask || mask->size() != cfg.positions())
                            throw ArgumentError("merge mode 'local' needs per-ref spatial masks");
                        merged = g.add(merged, g.row_scale(z_imgs[i], g.constant(Grid(*mask))));
                    }
                    break;
                case MergeMode::Weighted:
                    merged = merge::weighted_merge_t(g, z_text, z_imgs, raw_maps);
                    break;
                case MergeMode::TextWeighted:
                    merged = g.row_scale(z_text, merge::text_weight_t(g, z_text, lv.tw_w_f,
                                                                      lv.tw_b_f));
                    for (const auto& zi : z_imgs) merged = g.add(merged, zi);
                    break;
                case MergeMode::Trained:
                    merged = merge::trained_weighted_merge_t(g, z_text, z_imgs, raw_maps,
                                                             lv.tw_w_f, lv.tw_b_f);
                    break;
            }
            z = g.add(z, merged);
        }

        // Position-wise MLP.
        {
            const auto zn = g.rmsnorm_rows(z);
            const auto h = g.tanh(g.add_row(g.matmul(zn, lv.mlp_w1), lv.mlp_b1));
            z = g.add(z, g.add_row(g.matmul(h, lv.mlp_w2), lv.mlp_b2));
        }
    }

    return g.add_row(g.matmul(g.rmsnorm_rows(z), vars.head_w), vars.head_b);
}

Grid denoiser_forward(DenoiserParams& params, const Conditions& cond, const Grid& x_t, int t,
                      const ForwardHooks* hooks) {
    tape::Graph g;
    const ParamVars vars = make_param_vars(g, params, std::nullopt);
    std::vector<std::vector<Vec>> maps(static_cast<std::size_t>(params.cfg.n_layers));
    ForwardHooks local;
    if (hooks) local = *hooks;
    if (!local.relevance_out) local.relevance_out = &maps;
    return denoiser_forward_t(g, vars, params.cfg, cond, g.constant(x_t), t, &local)->val;
}

}  // namespace wmerge::diffusion
