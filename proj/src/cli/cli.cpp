#include "wmerge/cli/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wmerge/curation/curation.hpp"
#include "wmerge/diffusion/checkpoint.hpp"
#include "wmerge/diffusion/latent_codec.hpp"
#include "wmerge/diffusion/pipeline.hpp"
#include "wmerge/diffusion/sampler.hpp"
#include "wmerge/evalkit/evalkit.hpp"

namespace fs = std::filesystem;

namespace wmerge::cli {
namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << text;
}

// Every command drops its effective configuration (defaults + overrides) next
// to its outputs; re-running with `--config <echo>` reproduces the run.
void echo_config(const CLI::App& cmd, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "effective_config.txt").string(),
               cmd.config_to_str(true, false));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

// Re-resolve relative image paths when a manifest is saved into a new
// directory, so the copies keep pointing at the original PNGs.
void rebase_manifest(scenekit::Manifest& m, const std::string& new_path) {
    const fs::path new_dir = fs::absolute(fs::path(new_path)).parent_path();
    const fs::path old_dir = fs::absolute(m.dir.empty() ? "." : m.dir);
    if (new_dir == old_dir) return;
    for (auto& rec : m.records)
        rec.image_path = fs::absolute(old_dir / rec.image_path).string();
}

void ensure_embeddings(scenekit::Manifest& m, const std::string& embedder_kind) {
    if (!m.embeddings.empty()) return;
    auto embedder = scenekit::make_embedder(embedder_kind);
    const fs::path dir(m.dir.empty() ? "." : m.dir);
    for (auto& rec : m.records) {
        const scenekit::Image im = scenekit::read_png((dir / rec.image_path).string());
        for (auto& obj : rec.objects) {
            obj.text_emb = static_cast<int>(m.embeddings.size());
            m.embeddings.push_back(scenekit::f32_snap(embedder->embed_text(obj.text)));
            obj.img_emb = static_cast<int>(m.embeddings.size());
            m.embeddings.push_back(
                scenekit::f32_snap(embedder->embed_image(scenekit::crop(im, obj.bbox))));
        }
    }
}

struct Commands {
    CLI::App app{"multi-reference diffusion pipeline: data, curation, training, "
                 "sampling, verification, evaluation"};
    int threads = 1;

    // gen-data
    int gd_n = 0;
    std::uint64_t gd_seed = 0;
    std::string gd_out;
    int gd_max_objects = 4;
    std::string gd_embedder = "stub";

    // score / select
    std::string sc_manifest, sc_out, sc_embedder = "stub";
    std::string sl_manifest, sl_out, sl_by = "total", sl_k = "all";

    // train
    std::string tr_data, tr_ckpt_out, tr_init_ckpt, tr_loss_csv;
    std::string tr_merge = "weighted", tr_mode = "pretrain";
    int tr_steps = 1000, tr_batch = 8, tr_ckpt_every = 0, tr_t_steps = 1000;
    double tr_lr = 1e-4;
    std::uint64_t tr_seed = 0;

    // sample
    std::string sa_ckpt, sa_prompt, sa_refs, sa_merge, sa_out;
    int sa_steps = 50;
    double sa_guidance = 7.5;
    std::uint64_t sa_seed = 0;

    // verify-relevance
    std::string vr_ckpt, vr_bench, vr_strategy = "both", vr_layers, vr_out;
    int vr_n_prompts = 50, vr_steps = 50;
    double vr_noise_scale = 1.0, vr_guidance = 7.5;
    std::uint64_t vr_seed = 0;
    bool vr_single_step = false;

    // eval
    std::string ev_ckpt, ev_bench, ev_out;
    int ev_n_prompts = 50, ev_samples = 5, ev_steps = 50;
    double ev_guidance = 7.5;
    std::uint64_t ev_seed = 0;

    // report
    std::string rp_in, rp_out;

    CLI::App* gen_data = nullptr;
    CLI::App* score = nullptr;
    CLI::App* select = nullptr;
    CLI::App* train = nullptr;
    CLI::App* sample = nullptr;
    CLI::App* verify = nullptr;
    CLI::App* eval = nullptr;
    CLI::App* report = nullptr;
};

void build_commands(Commands& c) {
    auto& app = c.app;
    app.require_subcommand(1);
    app.add_option("--threads", c.threads, "worker cap (computation is single-threaded today)")
        ->default_val(1);

    auto add = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->set_config("--config", "", "key=value config file; flags override");
        return s;
    };

    c.gen_data = add("gen-data", "render a synthetic scene dataset with manifest");
    c.gen_data->add_option("--n", c.gd_n, "number of images")->required();
    c.gen_data->add_option("--seed", c.gd_seed, "master seed")->default_val(0);
    c.gen_data->add_option("--out", c.gd_out, "output directory")->required();
    c.gen_data->add_option("--max-objects", c.gd_max_objects, "objects per scene cap")
        ->default_val(4);
    c.gen_data->add_option("--embedder", c.gd_embedder, "stub | service")->default_val("stub");

    c.score = add("score", "attach quality scores to a manifest");
    c.score->add_option("--manifest", c.sc_manifest, "input manifest")->required();
    c.score->add_option("--embedder", c.sc_embedder, "stub | service (used when the "
                        "manifest has no embedding cache)")->default_val("stub");
    c.score->add_option("--out", c.sc_out, "scored manifest path")->required();

    c.select = add("select", "keep the top-k records by quality score");
    c.select->add_option("--manifest", c.sl_manifest, "scored manifest")->required();
    c.select->add_option("--k", c.sl_k, "how many records to keep, or 'all'")->required();
    c.select->add_option("--by", c.sl_by, "total | pair | single")->default_val("total");
    c.select->add_option("--out", c.sl_out, "filtered manifest path")->required();

    c.train = add("train", "train or finetune the denoiser on a manifest");
    c.train->add_option("--data", c.tr_data, "training manifest")->required();
    c.train->add_option("--steps", c.tr_steps, "optimizer steps")->default_val(1000);
    c.train->add_option("--merge", c.tr_merge,
                        "uniform | local | weighted | text-weighted | trained")
        ->default_val("weighted");
    c.train->add_option("--mode", c.tr_mode, "pretrain | finetune")->default_val("pretrain");
    c.train->add_option("--ckpt-out", c.tr_ckpt_out, "checkpoint path")->required();
    c.train->add_option("--init-ckpt", c.tr_init_ckpt, "start from this checkpoint");
    c.train->add_option("--batch-size", c.tr_batch, "")->default_val(8);
    c.train->add_option("--lr", c.tr_lr, "")->default_val(1e-4);
    c.train->add_option("--seed", c.tr_seed, "")->default_val(0);
    c.train->add_option("--t-steps", c.tr_t_steps, "diffusion steps T")->default_val(1000);
    c.train->add_option("--ckpt-every", c.tr_ckpt_every, "periodic checkpoint interval")
        ->default_val(0);
    c.train->add_option("--loss-csv", c.tr_loss_csv, "per-step loss log");

    c.sample = add("sample", "generate an image from a prompt and reference images");
    c.sample->add_option("--ckpt", c.sa_ckpt, "")->required();
    c.sample->add_option("--prompt", c.sa_prompt, "e.g. 'a red circle and a blue square'")
        ->required();
    c.sample->add_option("--refs", c.sa_refs,
                         "comma-separated 'label=path.png' reference crops");
    c.sample->add_option("--merge", c.sa_merge, "override the checkpoint's merge mode");
    c.sample->add_option("--steps", c.sa_steps, "")->default_val(50);
    c.sample->add_option("--guidance", c.sa_guidance, "")->default_val(7.5);
    c.sample->add_option("--seed", c.sa_seed, "")->default_val(0);
    c.sample->add_option("--out", c.sa_out, "output directory")->required();

    c.verify = add("verify-relevance",
                   "noise-injection check that relevance maps localize objects");
    c.verify->add_option("--ckpt", c.vr_ckpt, "")->required();
    c.verify->add_option("--bench", c.vr_bench, "bench manifest")->required();
    c.verify->add_option("--n-prompts", c.vr_n_prompts, "")->default_val(50);
    c.verify->add_option("--strategy", c.vr_strategy, "uniform | weighted | both")
        ->default_val("both");
    c.verify->add_option("--noise-scale", c.vr_noise_scale, "")->default_val(1.0);
    c.verify->add_option("--layers", c.vr_layers, "comma-separated layer indices (default all)");
    c.verify->add_flag("--single-step", c.vr_single_step,
                       "inject only on the first sampler step");
    c.verify->add_option("--steps", c.vr_steps, "")->default_val(50);
    c.verify->add_option("--guidance", c.vr_guidance, "")->default_val(7.5);
    c.verify->add_option("--seed", c.vr_seed, "")->default_val(0);
    c.verify->add_option("--out", c.vr_out, "output directory")->required();

    c.eval = add("eval", "generation metrics over a bench manifest");
    c.eval->add_option("--ckpt", c.ev_ckpt, "")->required();
    c.eval->add_option("--bench", c.ev_bench, "")->required();
    c.eval->add_option("--n-prompts", c.ev_n_prompts, "")->default_val(50);
    c.eval->add_option("--samples-per-prompt", c.ev_samples, "")->default_val(5);
    c.eval->add_option("--steps", c.ev_steps, "")->default_val(50);
    c.eval->add_option("--guidance", c.ev_guidance, "")->default_val(7.5);
    c.eval->add_option("--seed", c.ev_seed, "")->default_val(0);
    c.eval->add_option("--out", c.ev_out, "output directory")->required();

    c.report = add("report", "render an eval CSV as a text table and SVG charts");
    c.report->add_option("--in", c.rp_in, "eval CSV")->required();
    c.report->add_option("--out", c.rp_out, "output directory")->required();
}

int run_gen_data(Commands& c) {
    if (c.gd_n <= 0) throw ArgumentError("gen-data: --n must be positive");
    if (c.gd_max_objects < 1 || c.gd_max_objects > 4)
        throw ArgumentError("gen-data: --max-objects must be in [1,4]");
    scenekit::DatasetOptions opt;
    opt.n_images = c.gd_n;
    opt.seed = c.gd_seed;
    opt.max_objects = c.gd_max_objects;
    auto embedder = scenekit::make_embedder(c.gd_embedder);
    fs::create_directories(c.gd_out);
    scenekit::build_dataset(opt, *embedder, c.gd_out);
    echo_config(*c.gen_data, c.gd_out);
    return 0;
}

int run_score(Commands& c) {
    scenekit::Manifest m = scenekit::load_manifest(c.sc_manifest);
    ensure_embeddings(m, c.sc_embedder);
    curation::score_manifest(m);
    rebase_manifest(m, c.sc_out);
    scenekit::save_manifest(m, c.sc_out);
    echo_config(*c.score, fs::path(c.sc_out).parent_path().string());
    return 0;
}

int run_select(Commands& c) {
    scenekit::Manifest m = scenekit::load_manifest(c.sl_manifest);
    std::size_t k;
    if (c.sl_k == "all") {
        k = m.records.size();
    } else {
        long v = 0;
        try {
            v = std::stol(c.sl_k);
        } catch (const std::exception&) {
            throw ArgumentError("select: bad --k value '" + c.sl_k + "'");
        }
        if (v < 0) throw ArgumentError("select: --k must be non-negative");
        k = static_cast<std::size_t>(v);
    }
    scenekit::Manifest out = curation::select_top_k(m, k, curation::parse_score_field(c.sl_by));
    rebase_manifest(out, c.sl_out);
    scenekit::save_manifest(out, c.sl_out);
    echo_config(*c.select, fs::path(c.sl_out).parent_path().string());
    return 0;
}

int run_train(Commands& c) {
    scenekit::Manifest m = scenekit::load_manifest(c.tr_data);
    diffusion::DenoiserParams params = [&] {
        if (!c.tr_init_ckpt.empty()) return diffusion::load_checkpoint(c.tr_init_ckpt);
        diffusion::ModelConfig cfg;
        cfg.t_steps = c.tr_t_steps;
        numkit::Rng rng(numkit::Rng::derive_seed(c.tr_seed, "init", 0));
        return diffusion::DenoiserParams::init(cfg, rng);
    }();
    params.cfg.merge_mode = diffusion::parse_merge_mode(c.tr_merge);

    diffusion::TrainRunOptions opt;
    opt.steps = c.tr_steps;
    opt.batch_size = c.tr_batch;
    opt.lr = c.tr_lr;
    opt.seed = c.tr_seed;
    opt.mode = c.tr_mode == "finetune" ? diffusion::TrainMode::Finetune
             : c.tr_mode == "pretrain" ? diffusion::TrainMode::Pretrain
                                       : throw ArgumentError("train: bad --mode " + c.tr_mode);
    opt.loss_csv = c.tr_loss_csv;
    opt.ckpt_every = c.tr_ckpt_every;
    opt.ckpt_path = c.tr_ckpt_out;

    const auto sched = diffusion::make_schedule(params.cfg.t_steps);
    diffusion::run_training(params, m, sched, opt);
    echo_config(*c.train, fs::path(c.tr_ckpt_out).parent_path().string());
    return 0;
}

int run_sample(Commands& c) {
    diffusion::DenoiserParams params = diffusion::load_checkpoint(c.sa_ckpt);
    if (!c.sa_merge.empty()) params.cfg.merge_mode = diffusion::parse_merge_mode(c.sa_merge);
    const auto& cfg = params.cfg;

    diffusion::Conditions cond;
    cond.prompt_tokens = scenekit::tokenize(c.sa_prompt);
    if (!c.sa_refs.empty()) {
        auto embedder = scenekit::make_embedder("stub");
        for (const auto& spec : split(c.sa_refs, ',')) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos)
                throw ArgumentError("sample: refs must be 'label=path.png', got '" + spec + "'");
            diffusion::RefCondition ref;
            ref.obj_tokens = scenekit::tokenize(spec.substr(0, eq));
            const Vec emb = embedder->embed_image(scenekit::read_png(spec.substr(eq + 1)));
            ref.feats = emb.transpose();
            cond.refs.push_back(std::move(ref));
        }
    }
    if (static_cast<int>(cond.refs.size()) > cfg.max_refs)
        throw ArgumentError("sample: " + std::to_string(cond.refs.size()) +
                            " refs exceed the model's max of " + std::to_string(cfg.max_refs));

    diffusion::SampleOptions opt;
    opt.steps = c.sa_steps;
    opt.guidance = c.sa_guidance;
    opt.seed = c.sa_seed;
    const auto sched = diffusion::make_schedule(cfg.t_steps);
    const Grid lat = diffusion::ddim_sample(params, sched, cond, opt);

    fs::create_directories(c.sa_out);
    const diffusion::LatentCodec codec(cfg.h, cfg.w, cfg.d);
    scenekit::write_png(codec.decode(lat), (fs::path(c.sa_out) / "sample.png").string());
    {
        std::ofstream f(fs::path(c.sa_out) / "latent.csv");
        if (!f) throw IoError("cannot write latent.csv");
        f.precision(17);
        for (Eigen::Index i = 0; i < lat.rows(); ++i) {
            for (Eigen::Index j = 0; j < lat.cols(); ++j)
                f << (j ? "," : "") << lat(i, j);
            f << "\n";
        }
    }
    echo_config(*c.sample, c.sa_out);
    return 0;
}

int run_verify(Commands& c) {
    diffusion::DenoiserParams params = diffusion::load_checkpoint(c.vr_ckpt);
    scenekit::Manifest bench = scenekit::load_manifest(c.vr_bench);
    if (bench.records.empty()) throw ArgumentError("verify-relevance: empty bench");
    if (c.vr_n_prompts < 1) throw ArgumentError("verify-relevance: --n-prompts must be >= 1");

    std::vector<evalkit::BenchCase> cases;
    for (const auto& rec : bench.records) {
        if (rec.objects.empty()) continue;
        cases.push_back(evalkit::bench_case_from_record(rec, bench, params.cfg));
        if (static_cast<int>(cases.size()) == c.vr_n_prompts) break;
    }
    if (cases.empty()) throw ArgumentError("verify-relevance: no usable bench records");

    evalkit::RelevanceExperimentConfig rc;
    rc.noise_scale = c.vr_noise_scale;
    rc.seed = c.vr_seed;
    rc.every_step = !c.vr_single_step;
    rc.ddim_steps = c.vr_steps;
    rc.guidance = c.vr_guidance;
    if (!c.vr_layers.empty())
        for (const auto& tok : split(c.vr_layers, ',')) rc.layers.push_back(std::stoi(tok));

    std::vector<std::string> strategies;
    if (c.vr_strategy == "both")
        strategies = {"uniform", "weighted"};
    else
        strategies = {c.vr_strategy};

    const auto sched = diffusion::make_schedule(params.cfg.t_steps);
    evalkit::EvalReport rep;
    for (const auto& s : strategies) {
        rc.strategy = evalkit::parse_noise_strategy(s);
        const auto res = evalkit::relevance_score_harness(params, sched, cases, rc);
        evalkit::EvalRow row;
        row.label = s;
        row.metrics["object_relevance_score"] = res.score;
        row.metrics["used"] = res.used;
        row.metrics["skipped"] = res.skipped;
        row.metrics["skip_rate"] =
            static_cast<double>(res.skipped) / (res.used + res.skipped);
        rep.rows.push_back(std::move(row));
        std::cout << s << ": score=" << res.score << " used=" << res.used
                  << " skipped=" << res.skipped << "\n";
    }
    rep.recompute_aggregate();
    fs::create_directories(c.vr_out);
    rep.to_csv((fs::path(c.vr_out) / "verify.csv").string());
    echo_config(*c.verify, c.vr_out);
    return 0;
}

int run_eval(Commands& c) {
    diffusion::DenoiserParams params = diffusion::load_checkpoint(c.ev_ckpt);
    scenekit::Manifest bench = scenekit::load_manifest(c.ev_bench);
    evalkit::AblationOptions opt;
    opt.n_prompts = c.ev_n_prompts;
    opt.samples_per_prompt = c.ev_samples;
    opt.ddim_steps = c.ev_steps;
    opt.guidance = c.ev_guidance;
    opt.seed = c.ev_seed;
    evalkit::EvalReport rep;
    rep.rows.push_back(
        evalkit::eval_model(params, diffusion::merge_mode_name(params.cfg.merge_mode), bench, opt));
    rep.recompute_aggregate();
    fs::create_directories(c.ev_out);
    rep.to_csv((fs::path(c.ev_out) / "eval.csv").string());
    for (const auto& [k, v] : rep.rows[0].metrics) std::cout << k << "=" << v << "\n";
    echo_config(*c.eval, c.ev_out);
    return 0;
}

std::string svg_bar_chart(const std::string& metric,
                          const std::vector<std::pair<std::string, double>>& bars) {
    const int bar_h = 24, gap = 8, label_w = 140, chart_w = 360, pad = 20;
    const int h = pad * 2 + static_cast<int>(bars.size()) * (bar_h + gap) + 20;
    double vmax = 1e-12;
    for (const auto& [_, v] : bars) vmax = std::max(vmax, std::abs(v));
    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << label_w + chart_w + pad * 2
      << "' height='" << h << "'>\n";
    s << "<text x='" << pad << "' y='" << pad - 4 << "' font-family='monospace'>" << metric
      << "</text>\n";
    int y = pad + 10;
    for (const auto& [label, v] : bars) {
        const int w = static_cast<int>(std::abs(v) / vmax * chart_w);
        s << "<text x='" << pad << "' y='" << y + bar_h - 7
          << "' font-family='monospace' font-size='12'>" << label << "</text>\n";
        s << "<rect x='" << pad + label_w << "' y='" << y << "' width='" << std::max(w, 1)
          << "' height='" << bar_h << "' fill='" << (v < 0 ? "#c44" : "#48a") << "'/>\n";
        s << "<text x='" << pad + label_w + std::max(w, 1) + 4 << "' y='" << y + bar_h - 7
          << "' font-family='monospace' font-size='12'>" << v << "</text>\n";
        y += bar_h + gap;
    }
    s << "</svg>\n";
    return s.str();
}

int run_report(Commands& c) {
    const auto rep = evalkit::EvalReport::from_csv(c.rp_in);
    fs::create_directories(c.rp_out);

    std::set<std::string> keys;
    for (const auto& row : rep.rows)
        for (const auto& [k, _] : row.metrics) keys.insert(k);

    std::ostringstream table;
    table << "label";
    for (const auto& k : keys) table << "\t" << k;
    table << "\n";
    auto emit = [&](const std::string& label, const std::map<std::string, double>& m) {
        table << label;
        for (const auto& k : keys) {
            table << "\t";
            auto it = m.find(k);
            if (it != m.end()) table << it->second;
        }
        table << "\n";
    };
    for (const auto& row : rep.rows) emit(row.label, row.metrics);
    emit("(mean)", rep.aggregate);
    write_text((fs::path(c.rp_out) / "report.txt").string(), table.str());

    for (const auto& k : keys) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& row : rep.rows) {
            auto it = row.metrics.find(k);
            if (it != row.metrics.end()) bars.emplace_back(row.label, it->second);
        }
        write_text((fs::path(c.rp_out) / (k + ".svg")).string(), svg_bar_chart(k, bars));
    }
    echo_config(*c.report, c.rp_out);
    std::cout << "report: " << rep.rows.size() << " rows, " << keys.size() << " metrics\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    Commands c;
    build_commands(c);
    try {
        c.app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return c.app.exit(e) == 0 ? 0 : 2;
    }
    try {
        if (c.gen_data->parsed()) return run_gen_data(c);
        if (c.score->parsed()) return run_score(c);
        if (c.select->parsed()) return run_select(c);
        if (c.train->parsed()) return run_train(c);
        if (c.sample->parsed()) return run_sample(c);
        if (c.verify->parsed()) return run_verify(c);
        if (c.eval->parsed()) return run_eval(c);
        if (c.report->parsed()) return run_report(c);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace wmerge::cli
