#include "wmerge/diffusion/train.hpp"

namespace wmerge::diffusion {

void condition_dropout(TrainBatch& batch, const DropoutConfig& cfg, Rng& rng) {
    if (cfg.p_text < 0 || cfg.p_img < 0 || cfg.p_both < 0 ||
        cfg.p_text + cfg.p_img + cfg.p_both > 1.0)
        throw ArgumentError("condition_dropout: probabilities must be >= 0 and sum to <= 1");
    for (auto& s : batch.samples) {
        const double u = rng.uniform();
        bool drop_text = false, drop_img = false;
        if (u < cfg.p_text) {
            drop_text = true;
        } else if (u < cfg.p_text + cfg.p_img) {
            drop_img = true;
        } else if (u < cfg.p_text + cfg.p_img + cfg.p_both) {
            drop_text = drop_img = true;
        }
        if (drop_text) {
            s.cond.prompt_tokens = {0};
            s.cond.text_dropped = true;
        }
        if (drop_img) {
            s.cond.refs.clear();
            s.cond.img_dropped = true;
        }
    }
}

tape::Var training_loss_t(tape::Graph& g, const ParamVars& vars, const ModelConfig& cfg,
                          const TrainBatch& batch, const DiffusionSchedule& sched) {
    if (batch.samples.empty()) throw ArgumentError("training_loss: empty batch");
    tape::Var total;
    for (const auto& s : batch.samples) {
        if (s.t < 1 || s.t > sched.t_steps)
            throw ArgumentError("training_loss: sample t out of [1, T]");
        const auto x_t = g.constant(add_noise(s.x0, s.eps, s.t, sched));
        const auto eps_hat = denoiser_forward_t(g, vars, cfg, s.cond, x_t, s.t);
        const auto l = g.mse(eps_hat, g.constant(s.eps));
        total = total ? g.add(total, l) : l;
    }
    return g.scale(total, 1.0 / static_cast<double>(batch.samples.size()));
}

double training_loss(DenoiserParams& params, const TrainBatch& batch,
                     const DiffusionSchedule& sched) {
    tape::Graph g;
    const ParamVars vars = make_param_vars(g, params, std::nullopt);
    return training_loss_t(g, vars, params.cfg, batch, sched)->val(0, 0);
}

double train_step(DenoiserParams& params, const TrainBatch& batch,
                  const DiffusionSchedule& sched, AdamWState& state, double lr, TrainMode mode) {
    tape::Graph g;
    const ParamVars vars = make_param_vars(g, params, mode);
    const tape::Var loss = training_loss_t(g, vars, params.cfg, batch, sched);
    const double loss_val = loss->val(0, 0);
    if (!std::isfinite(loss_val))
        throw NumericError("train_step: non-finite loss " + std::to_string(loss_val));
    g.backward(loss);
    const std::map<std::string, Grid> grads = collect_grads(vars, params);

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.for_each_tensor([&](const std::string& name, Grid& p) {
        if (!is_trainable(name, mode)) return;
        auto git = grads.find(name);
        if (git == grads.end()) return;
        const Grid& grad = git->second;
        auto& mom = state.moments[name];
        if (mom.m.size() == 0) {
            mom.m = Grid::Zero(p.rows(), p.cols());
            mom.v = Grid::Zero(p.rows(), p.cols());
        }
        mom.m = state.beta1 * mom.m + (1.0 - state.beta1) * grad;
        mom.v = (state.beta2 * mom.v.array() + (1.0 - state.beta2) * grad.array().square()).matrix();
        const Grid m_hat = mom.m / bc1;
        const Grid v_hat = mom.v / bc2;
        p.array() -= lr * state.weight_decay * p.array();  // decoupled decay
        p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
    });
    return loss_val;
}

}  // namespace wmerge::diffusion
