#include "wmerge/diffusion/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "wmerge/diffusion/checkpoint.hpp"
#include "wmerge/scenekit/vocab.hpp"

namespace wmerge::diffusion {

namespace fs = std::filesystem;

Vec latent_mask(const scenekit::BBox& box, const ModelConfig& cfg, int image_size) {
    const int cw = image_size / cfg.w, ch = image_size / cfg.h;
    Vec mask = Vec::Zero(cfg.positions());
    for (int gy = 0; gy < cfg.h; ++gy)
        for (int gx = 0; gx < cfg.w; ++gx) {
            const scenekit::BBox cell{gx * cw, gy * ch, cw, ch};
            if (scenekit::BBox::overlap_area(cell, box) > 0) mask(gy * cfg.w + gx) = 1.0;
        }
    return mask;
}

Conditions make_conditions(const scenekit::ManifestRecord& rec, const scenekit::Manifest& m,
                           const ModelConfig& cfg) {
    Conditions cond;
    cond.prompt_tokens = scenekit::tokenize(rec.prompt);
    if (static_cast<int>(cond.prompt_tokens.size()) > cfg.max_text_len)
        throw ArgumentError("make_conditions: prompt longer than max_text_len");
    for (const auto& obj : rec.objects) {
        RefCondition ref;
        if (obj.img_emb < 0) throw DataError("make_conditions: record missing image embedding");
        const Vec& e = m.embedding(obj.img_emb);
        if (e.size() != cfg.d_img)
            throw ShapeError("make_conditions: embedding dim " + std::to_string(e.size()) +
                             " != d_img " + std::to_string(cfg.d_img));
        ref.feats = Grid(e.transpose());
        ref.obj_tokens = scenekit::tokenize(obj.text);
        ref.local_mask = latent_mask(obj.bbox, cfg, scenekit::kCanvas);
        cond.refs.push_back(std::move(ref));
    }
    return cond;
}

TrainRunResult run_training(DenoiserParams& params, const scenekit::Manifest& manifest,
                            const DiffusionSchedule& sched, const TrainRunOptions& opt) {
    if (manifest.records.empty()) throw ArgumentError("run_training: empty manifest");
    if (opt.steps < 0) throw ArgumentError("run_training: negative step count");

    const LatentCodec codec(params.cfg.h, params.cfg.w, params.cfg.d);
    std::vector<Grid> latents;
    std::vector<Conditions> conds;
    latents.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) {
        const auto img = scenekit::read_png((fs::path(manifest.dir) / rec.image_path).string());
        latents.push_back(codec.encode(img));
        conds.push_back(make_conditions(rec, manifest, params.cfg));
    }

    std::ofstream log;
    if (!opt.loss_csv.empty()) {
        log.open(opt.loss_csv, std::ios::trunc);
        if (!log) throw IoError("run_training: cannot open loss log '" + opt.loss_csv + "'");
        log << "step,loss\n";
    }

    Rng batch_rng = Rng(opt.seed).derive("train_batches");
    Rng drop_rng = Rng(opt.seed).derive("train_dropout");
    AdamWState state;
    TrainRunResult result;
    result.losses.reserve(static_cast<std::size_t>(opt.steps));

    for (int step = 0; step < opt.steps; ++step) {
        TrainBatch batch;
        for (int b = 0; b < opt.batch_size; ++b) {
            const auto i = batch_rng.below(manifest.records.size());
            TrainSample s;
            s.x0 = latents[i];
            s.t = 1 + static_cast<int>(batch_rng.below(static_cast<std::uint64_t>(sched.t_steps)));
            s.eps = batch_rng.gaussian_grid(s.x0.rows(), s.x0.cols());
            s.cond = conds[i];
            batch.samples.push_back(std::move(s));
        }
        condition_dropout(batch, opt.dropout, drop_rng);
        const double loss = train_step(params, batch, sched, state, opt.lr, opt.mode);
        result.losses.push_back(loss);
        if (log) log << step << "," << loss << "\n";
        if (opt.ckpt_every > 0 && !opt.ckpt_path.empty() && (step + 1) % opt.ckpt_every == 0)
            save_checkpoint(params, opt.ckpt_path);
    }
    if (!opt.ckpt_path.empty()) save_checkpoint(params, opt.ckpt_path);
    return result;
}

}  // namespace wmerge::diffusion
