// Scratch experiment driver: trains variants and reports harness skip causes,
// relevance-map overlap vs timestep, and harness scores. Not part of the
// build by default.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "wmerge/diffusion/checkpoint.hpp"
#include "wmerge/diffusion/pipeline.hpp"
#include "wmerge/diffusion/sampler.hpp"
#include "wmerge/evalkit/evalkit.hpp"
#include "wmerge/scenekit/scene.hpp"

namespace fs = std::filesystem;
using namespace wmerge;

static scenekit::Manifest g_train, g_bench;
static diffusion::DiffusionSchedule g_sched = diffusion::make_schedule(1000);

std::vector<double> overlap_at(diffusion::DenoiserParams& params, int t, int n_prompts) {
    const diffusion::LatentCodec codec(params.cfg.h, params.cfg.w, params.cfg.d);
    std::vector<double> sum(static_cast<std::size_t>(params.cfg.n_layers), 0.0);
    long n = 0;
    int prompts = 0;
    for (const auto& rec : g_bench.records) {
        if (rec.objects.size() != 2) continue;
        if (++prompts > n_prompts) break;
        const auto cond = diffusion::make_conditions(rec, g_bench, params.cfg);
        const Grid x0 = codec.encode(
            scenekit::read_png((fs::path(g_bench.dir) / rec.image_path).string()));
        numkit::Rng nr(numkit::Rng::derive_seed(808, "overlap", prompts));
        const Grid x_t = diffusion::add_noise(x0, nr.gaussian_grid(x0.rows(), x0.cols()), t,
                                              g_sched);
        std::vector<std::vector<Vec>> maps(static_cast<std::size_t>(params.cfg.n_layers));
        diffusion::ForwardHooks hooks;
        hooks.relevance_out = &maps;
        diffusion::denoiser_forward(params, cond, x_t, t, &hooks);
        for (std::size_t l = 0; l < maps.size(); ++l)
            if (maps[l].size() == 2) sum[l] += evalkit::attention_overlap(maps[l][0], maps[l][1]);
        ++n;
    }
    for (auto& s : sum) s /= n ? n : 1;
    return sum;
}

// Mean ratio of relevance mass inside the object's true latent box to the
// box's area fraction (1.0 = no localization, >1 = mass concentrates).
void bbox_lift(diffusion::DenoiserParams& params, int t, int n_prompts) {
    const diffusion::LatentCodec codec(params.cfg.h, params.cfg.w, params.cfg.d);
    std::vector<double> lift(static_cast<std::size_t>(params.cfg.n_layers), 0.0);
    long n = 0;
    int prompts = 0;
    for (const auto& rec : g_bench.records) {
        if (rec.objects.empty()) continue;
        if (++prompts > n_prompts) break;
        const auto cond = diffusion::make_conditions(rec, g_bench, params.cfg);
        const Grid x0 = codec.encode(
            scenekit::read_png((fs::path(g_bench.dir) / rec.image_path).string()));
        numkit::Rng nr(numkit::Rng::derive_seed(909, "lift", prompts));
        const Grid x_t = diffusion::add_noise(x0, nr.gaussian_grid(x0.rows(), x0.cols()), t,
                                              g_sched);
        std::vector<std::vector<Vec>> maps(static_cast<std::size_t>(params.cfg.n_layers));
        diffusion::ForwardHooks hooks;
        hooks.relevance_out = &maps;
        diffusion::denoiser_forward(params, cond, x_t, t, &hooks);
        for (std::size_t i = 0; i < rec.objects.size(); ++i) {
            const Vec mask = diffusion::latent_mask(rec.objects[i].bbox, params.cfg, 64);
            const double frac = mask.sum() / static_cast<double>(params.cfg.positions());
            if (frac <= 0.0 || frac >= 1.0) continue;
            for (std::size_t l = 0; l < maps.size(); ++l)
                lift[l] += maps[l][i].dot(mask) / frac;
            ++n;
        }
    }
    std::printf("  bbox lift t=%d:", t);
    for (double v : lift) std::printf(" %.4f", n ? v / n : -1.0);
    std::printf("\n");
}

// Mean pairwise overlap measured on the model's own generated samples
// (forward at t=1 on the finished latent), the regime eval_model uses.
void sample_overlap(diffusion::DenoiserParams& params, int n_prompts) {
    std::vector<double> sum(static_cast<std::size_t>(params.cfg.n_layers), 0.0);
    long n = 0;
    int prompts = 0;
    for (const auto& rec : g_bench.records) {
        if (rec.objects.size() != 2) continue;
        if (++prompts > n_prompts) break;
        const auto cond = diffusion::make_conditions(rec, g_bench, params.cfg);
        diffusion::SampleOptions so;
        so.steps = 20;
        so.guidance = 7.5;
        so.seed = numkit::Rng::derive_seed(606, "sample_overlap", prompts);
        const Grid lat = diffusion::ddim_sample(params, g_sched, cond, so);
        std::vector<std::vector<Vec>> maps(static_cast<std::size_t>(params.cfg.n_layers));
        diffusion::ForwardHooks hooks;
        hooks.relevance_out = &maps;
        diffusion::denoiser_forward(params, cond, lat, 1, &hooks);
        for (std::size_t l = 0; l < maps.size(); ++l)
            if (maps[l].size() == 2) sum[l] += evalkit::attention_overlap(maps[l][0], maps[l][1]);
        ++n;
    }
    std::printf("  sample overlap (t=1 on own samples):");
    for (double v : sum) std::printf(" %.4f", n ? v / n : -1.0);
    std::printf("\n");
}

void skip_causes(diffusion::DenoiserParams& params, int n_prompts, double noise_scale) {
    std::vector<evalkit::BenchCase> cases;
    for (const auto& rec : g_bench.records) {
        if (rec.objects.empty()) continue;
        cases.push_back(evalkit::bench_case_from_record(rec, g_bench, params.cfg));
        if (static_cast<int>(cases.size()) == n_prompts) break;
    }
    const diffusion::LatentCodec codec(params.cfg.h, params.cfg.w, params.cfg.d);
    int no_box = 0, big_box = 0, ok = 0;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto& bc = cases[k];
        diffusion::SampleOptions base;
        base.steps = 50;
        base.guidance = 7.5;
        base.seed = numkit::Rng::derive_seed(303, "harness_pair", k);
        const Grid lat = diffusion::ddim_sample(params, g_sched, bc.cond, base);
        const auto img = codec.decode(lat);
        const int color = bc.object_colors[static_cast<std::size_t>(bc.target)];
        const auto box = evalkit::detect_color_bbox(img, color);
        if (!box)
            ++no_box;
        else if (box->area() * 5 > img.w * img.h * 3)
            ++big_box;
        else
            ++ok;
    }
    std::printf("  skip causes over %zu prompts (scale %.2f): ok=%d no_box=%d big_box=%d\n",
                cases.size(), noise_scale, ok, no_box, big_box);
}

void harness(diffusion::DenoiserParams& params, int n_prompts, double noise_scale) {
    std::vector<evalkit::BenchCase> cases;
    for (const auto& rec : g_bench.records) {
        if (rec.objects.empty()) continue;
        cases.push_back(evalkit::bench_case_from_record(rec, g_bench, params.cfg));
        if (static_cast<int>(cases.size()) == n_prompts) break;
    }
    evalkit::RelevanceExperimentConfig rc;
    rc.noise_scale = noise_scale;
    rc.seed = 303;
    try {
        rc.strategy = evalkit::NoiseStrategy::Uniform;
        const auto u = evalkit::relevance_score_harness(params, g_sched, cases, rc);
        rc.strategy = evalkit::NoiseStrategy::Weighted;
        const auto w = evalkit::relevance_score_harness(params, g_sched, cases, rc);
        std::printf("  harness scale=%.2f: uniform=%.4f weighted=%.4f used=%d/%d delta=%.4f\n",
                    noise_scale, u.score, w.score, u.used, n_prompts, w.score - u.score);
    } catch (const Error& e) {
        std::printf("  harness scale=%.2f: error %s\n", noise_scale, e.what());
    }
}

int main(int argc, char** argv) {
    // args: mode [steps] [lr] [batch] [init_ckpt] [out_ckpt]
    g_train = scenekit::load_manifest("acceptance_tmp/train/manifest.jsonl");
    g_bench = scenekit::load_manifest("acceptance_tmp/bench/manifest.jsonl");

    const std::string mode = argc > 1 ? argv[1] : "eval";
    diffusion::DenoiserParams params = [&] {
        if (argc > 5 && std::string(argv[5]) != "-")
            return diffusion::load_checkpoint(argv[5]);
        diffusion::ModelConfig cfg;
        numkit::Rng rng(numkit::Rng::derive_seed(11, "init", 0));
        return diffusion::DenoiserParams::init(cfg, rng);
    }();

    if (mode == "train") {
        diffusion::TrainRunOptions topt;
        topt.steps = argc > 2 ? std::atoi(argv[2]) : 5000;
        topt.lr = argc > 3 ? std::atof(argv[3]) : 1e-4;
        topt.batch_size = argc > 4 ? std::atoi(argv[4]) : 8;
        topt.seed = 11;
        if (argc > 6) topt.ckpt_path = argv[6];
        const auto t0 = std::chrono::steady_clock::now();
        auto res = diffusion::run_training(params, g_train, g_sched, topt);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 200; ++i) {
            head += res.losses[static_cast<std::size_t>(i)] / 200.0;
            tail += res.losses[res.losses.size() - 1 - static_cast<std::size_t>(i)] / 200.0;
        }
        std::printf("trained %d steps lr=%g batch=%d in %.0fs, loss %.4f -> %.4f\n",
                    topt.steps, topt.lr, topt.batch_size, secs, head, tail);
    }

    if (mode == "so") {
        sample_overlap(params, 30);
        return 0;
    }
    for (int t : {100, 300, 500, 800}) {
        const auto per_layer = overlap_at(params, t, 50);
        std::printf("  overlap t=%d:", t);
        for (double v : per_layer) std::printf(" %.4f", v);
        std::printf("\n");
    }
    for (int t : {100, 300, 500, 800}) bbox_lift(params, t, 50);
    sample_overlap(params, 30);
    skip_causes(params, 40, 1.0);
    harness(params, 40, 1.0);
    harness(params, 40, 2.0);
    return 0;
}
