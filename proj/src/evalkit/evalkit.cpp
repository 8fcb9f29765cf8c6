#include "wmerge/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wmerge/diffusion/checkpoint.hpp"
#include "wmerge/diffusion/latent_codec.hpp"
#include "wmerge/scenekit/embedder.hpp"

namespace wmerge::evalkit {

NoiseStrategy parse_noise_strategy(const std::string& s) {
    if (s == "uniform") return NoiseStrategy::Uniform;
    if (s == "weighted") return NoiseStrategy::Weighted;
    throw ArgumentError("unknown noise strategy: " + s);
}

Grid inject_noise(const Grid& z_text, const Grid& eps_object, NoiseStrategy strategy,
                  const Vec* map) {
    if (z_text.rows() != eps_object.rows() || z_text.cols() != eps_object.cols())
        throw ShapeError("inject_noise: " + numkit::shape_str(z_text) + " vs " +
                         numkit::shape_str(eps_object));
    if (strategy == NoiseStrategy::Uniform) return z_text + eps_object;
    if (!map) throw ArgumentError("inject_noise: weighted strategy needs a relevance map");
    if (map->size() != z_text.rows())
        throw ShapeError("inject_noise: map length " + std::to_string(map->size()) +
                         " vs " + std::to_string(z_text.rows()) + " positions");
    const Vec norm_map = attn::normalize_relevance(attn::RelevanceMap{*map}).values;
    Grid shaped = eps_object;
    for (Eigen::Index i = 0; i < shaped.rows(); ++i) shaped.row(i) *= norm_map(i);
    // Equal-norm comparison: the weighted perturbation carries the same
    // energy as the uniform one, only its spatial placement differs.
    const double target = eps_object.norm();
    const double actual = shaped.norm();
    if (actual < 1e-12) throw NumericError("inject_noise: shaped noise vanished");
    return z_text + shaped * (target / actual);
}

std::optional<BboxDelta> bbox_delta(const Image& img_noise, const Image& img_no_noise,
                                    const BBox& box) {
    if (img_noise.w != img_no_noise.w || img_noise.h != img_no_noise.h)
        throw ShapeError("bbox_delta: image size mismatch");
    if (box.empty()) throw ArgumentError("bbox_delta: empty bbox");
    if (box.x <= 0 && box.y <= 0 && box.x + box.w >= img_noise.w &&
        box.y + box.h >= img_noise.h)
        return std::nullopt;  // no outside region to compare against
    double in_sum = 0.0, out_sum = 0.0;
    long in_n = 0, out_n = 0;
    for (int y = 0; y < img_noise.h; ++y) {
        for (int x = 0; x < img_noise.w; ++x) {
            const std::size_t o = static_cast<std::size_t>(3 * (y * img_noise.w + x));
            double d = 0.0;
            for (int c = 0; c < 3; ++c)
                d += std::abs(static_cast<double>(img_noise.rgb[o + c]) -
                              static_cast<double>(img_no_noise.rgb[o + c]));
            d /= 3.0 * 255.0;
            if (box.contains(x, y)) {
                in_sum += d;
                ++in_n;
            } else {
                out_sum += d;
                ++out_n;
            }
        }
    }
    BboxDelta r;
    r.in_box = in_n ? in_sum / in_n : 0.0;
    r.out_box = out_n ? out_sum / out_n : 0.0;
    return r;
}

namespace {

int nearest_palette(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    // Entries 0..kNumColors-1 are the object colors, kNumColors is background.
    int best = scenekit::kNumColors;
    double best_d = 1e18;
    auto dist = [&](scenekit::Rgb c) {
        const double dr = r - c.r, dg = g - c.g, db = b - c.b;
        return dr * dr + dg * dg + db * db;
    };
    for (int i = 0; i < scenekit::kNumColors; ++i) {
        const double d = dist(scenekit::color_values()[static_cast<std::size_t>(i)]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (dist(scenekit::kBackground) < best_d) best = scenekit::kNumColors;
    return best;
}

}  // namespace

std::optional<BBox> detect_color_bbox(const Image& im, int color_idx) {
    if (color_idx < 0 || color_idx >= scenekit::kNumColors)
        throw ArgumentError("detect_color_bbox: bad color index " + std::to_string(color_idx));
    int x0 = im.w, y0 = im.h, x1 = -1, y1 = -1;
    for (int y = 0; y < im.h; ++y) {
        for (int x = 0; x < im.w; ++x) {
            const std::size_t o = static_cast<std::size_t>(3 * (y * im.w + x));
            if (nearest_palette(im.rgb[o], im.rgb[o + 1], im.rgb[o + 2]) != color_idx) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return std::nullopt;
    return BBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double attention_overlap(const Vec& map_a, const Vec& map_b) {
    if (map_a.size() != map_b.size())
        throw ShapeError("attention_overlap: length mismatch");
    const double sa = map_a.sum(), sb = map_b.sum();
    if (sa <= 0.0 || sb <= 0.0) throw DegenerateMapError("attention_overlap: non-positive mass");
    double o = 0.0;
    for (Eigen::Index i = 0; i < map_a.size(); ++i)
        o += std::min(map_a(i) / sa, map_b(i) / sb);
    return o;
}

BenchCase bench_case_from_record(const scenekit::ManifestRecord& rec,
                                 const scenekit::Manifest& m,
                                 const diffusion::ModelConfig& cfg) {
    BenchCase c;
    c.cond = diffusion::make_conditions(rec, m, cfg);
    c.prompt = rec.prompt;
    for (const auto& obj : rec.objects) c.object_colors.push_back(obj.color);
    c.target = 0;
    return c;
}

HarnessResult relevance_score_harness(DenoiserParams& params, const DiffusionSchedule& sched,
                                      const std::vector<BenchCase>& bench,
                                      const RelevanceExperimentConfig& cfg) {
    if (bench.empty()) throw ArgumentError("relevance harness: empty bench");
    if (cfg.noise_scale <= 0.0)
        throw ArgumentError("relevance harness: noise scale must be positive "
                            "(the per-image ratio is 0/0 at zero scale)");
    const auto& mc = params.cfg;
    const diffusion::LatentCodec codec(mc.h, mc.w, mc.d);
    std::set<int> layer_set(cfg.layers.begin(), cfg.layers.end());
    HarnessResult res;
    numkit::Rng root(cfg.seed);
    for (std::size_t k = 0; k < bench.size(); ++k) {
        const auto& bc = bench[k];
        if (bc.target < 0 || bc.target >= static_cast<int>(bc.cond.refs.size()))
            throw HarnessError("relevance harness: target ref out of range");
        const std::uint64_t pair_seed =
            numkit::Rng::derive_seed(cfg.seed, "harness_pair", static_cast<std::uint64_t>(k));

        diffusion::SampleOptions base;
        base.steps = cfg.ddim_steps;
        base.guidance = cfg.guidance;
        base.seed = pair_seed;
        const Grid lat_clean = diffusion::ddim_sample(params, sched, bc.cond, base);

        // One noise draw per layer, reused across timesteps so the two
        // strategies and both injection schedules see identical raw noise.
        std::vector<Grid> eps_layers;
        for (int l = 0; l < mc.n_layers; ++l) {
            numkit::Rng nr(numkit::Rng::derive_seed(pair_seed, "inject_eps",
                                                    static_cast<std::uint64_t>(l)));
            eps_layers.push_back(cfg.noise_scale *
                                 nr.gaussian_grid(mc.positions(), mc.d));
        }
        std::vector<int> calls(static_cast<std::size_t>(mc.n_layers), 0);
        diffusion::ForwardHooks hooks;
        hooks.z_text_override = [&](int layer, const Grid& z_text,
                                    const std::vector<Vec>& raw_maps) -> Grid {
            if (!layer_set.empty() && !layer_set.count(layer)) return z_text;
            const int call = calls[static_cast<std::size_t>(layer)]++;
            if (!cfg.every_step && call > 0) return z_text;
            const Vec* map = nullptr;
            if (cfg.strategy == NoiseStrategy::Weighted) {
                if (bc.target >= static_cast<int>(raw_maps.size()))
                    throw HarnessError("relevance harness: no relevance map for target");
                map = &raw_maps[static_cast<std::size_t>(bc.target)];
            }
            return inject_noise(z_text, eps_layers[static_cast<std::size_t>(layer)],
                                cfg.strategy, map);
        };
        diffusion::SampleOptions noisy = base;
        noisy.hooks = &hooks;
        const Grid lat_noisy = diffusion::ddim_sample(params, sched, bc.cond, noisy);

        const Image img_clean = codec.decode(lat_clean);
        const Image img_noisy = codec.decode(lat_noisy);
        const int color = bc.object_colors[static_cast<std::size_t>(bc.target)];
        const auto box = detect_color_bbox(img_clean, color);
        if (!box || box->area() * 5 > img_clean.w * img_clean.h * 3) {
            // Target color absent or smeared over most of the frame: the
            // object is not cleanly localized, so the ratio is meaningless.
            ++res.skipped;
            continue;
        }
        const auto delta = bbox_delta(img_noisy, img_clean, *box);
        if (!delta || delta->out_box < 1e-8) {
            ++res.skipped;  // degenerate denominator
            continue;
        }
        res.per_image.push_back(delta->in_box / delta->out_box);
        res.used_prompts.push_back(static_cast<int>(k));
        ++res.used;
    }
    if (res.used == 0) throw HarnessError("relevance harness: every prompt was skipped");
    res.score = 0.0;
    for (double v : res.per_image) res.score += v;
    res.score /= res.used;
    return res;
}

double text_match_score(const std::vector<Image>& images,
                        const std::vector<std::vector<std::string>>& labels,
                        scenekit::Embedder& embedder) {
    if (images.size() != labels.size())
        throw ArgumentError("text_match_score: images/labels size mismatch");
    double sum = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Vec img_emb = embedder.embed_image(images[i]);
        for (const auto& label : labels[i]) {
            sum += scenekit::cosine(embedder.embed_text(label), img_emb);
            ++n;
        }
    }
    if (n == 0) throw ArgumentError("text_match_score: no labels");
    return sum / n;
}

double image_match_score(const std::vector<Image>& images,
                         const std::vector<std::vector<Vec>>& refs,
                         scenekit::Embedder& embedder,
                         const std::vector<std::vector<int>>* ref_colors) {
    if (images.size() != refs.size())
        throw ArgumentError("image_match_score: images/refs size mismatch");
    double sum = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        Vec whole = embedder.embed_image(images[i]);
        for (std::size_t j = 0; j < refs[i].size(); ++j) {
            Vec gen = whole;
            if (ref_colors) {
                const int color = (*ref_colors)[i][j];
                if (auto box = detect_color_bbox(images[i], color))
                    gen = embedder.embed_image(scenekit::crop(images[i], *box));
            }
            sum += scenekit::cosine(refs[i][j], gen);
            ++n;
        }
    }
    if (n == 0) throw ArgumentError("image_match_score: no references");
    return sum / n;
}

void EvalReport::recompute_aggregate() {
    aggregate.clear();
    std::map<std::string, std::pair<double, long>> acc;
    for (const auto& row : rows)
        for (const auto& [k, v] : row.metrics) {
            acc[k].first += v;
            acc[k].second += 1;
        }
    for (const auto& [k, p] : acc) aggregate[k] = p.first / p.second;
}

void EvalReport::to_csv(const std::string& path) const {
    std::set<std::string> keys;
    for (const auto& row : rows)
        for (const auto& [k, _] : row.metrics) keys.insert(k);
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "label";
    for (const auto& k : keys) f << "," << k;
    f << "\n";
    f.precision(17);
    for (const auto& row : rows) {
        f << row.label;
        for (const auto& k : keys) {
            f << ",";
            auto it = row.metrics.find(k);
            if (it != row.metrics.end()) f << it->second;
        }
        f << "\n";
    }
}

EvalReport EvalReport::from_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("empty csv: " + path);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
    }
    if (cols.empty() || cols[0] != "label")
        throw FormatError("csv header must start with 'label': " + path);
    EvalReport rep;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        EvalRow row;
        std::size_t idx = 0;
        while (std::getline(ss, cell, ',')) {
            if (idx == 0)
                row.label = cell;
            else if (idx < cols.size() && !cell.empty())
                row.metrics[cols[idx]] = std::stod(cell);
            ++idx;
        }
        rep.rows.push_back(std::move(row));
    }
    rep.recompute_aggregate();
    return rep;
}

EvalRow eval_model(DenoiserParams& params, const std::string& label,
                   const scenekit::Manifest& bench, const AblationOptions& opt) {
    if (bench.records.empty()) throw ArgumentError("eval_model: empty bench");
    const auto& mc = params.cfg;
    const diffusion::LatentCodec codec(mc.h, mc.w, mc.d);
    auto embedder = scenekit::make_embedder("stub");

    const int n_prompts = std::min<int>(opt.n_prompts, static_cast<int>(bench.records.size()));
    std::vector<Image> images;
    std::vector<std::vector<std::string>> labels;
    std::vector<std::vector<Vec>> refs;
    std::vector<std::vector<int>> ref_colors;
    double overlap_sum = 0.0;
    long overlap_n = 0;

    for (int p = 0; p < n_prompts; ++p) {
        const auto& rec = bench.records[static_cast<std::size_t>(p)];
        const Conditions cond = diffusion::make_conditions(rec, bench, mc);
        std::vector<std::string> lab;
        std::vector<Vec> ref;
        std::vector<int> colors;
        for (const auto& obj : rec.objects) {
            lab.push_back(obj.text);
            ref.push_back(bench.embedding(obj.img_emb));
            colors.push_back(obj.color);
        }
        for (int s = 0; s < opt.samples_per_prompt; ++s) {
            diffusion::SampleOptions so;
            so.steps = opt.ddim_steps;
            so.guidance = opt.guidance;
            so.seed = numkit::Rng::derive_seed(
                opt.seed, "eval_sample",
                static_cast<std::uint64_t>(p) * 1000003u + static_cast<std::uint64_t>(s));
            const auto sched = diffusion::make_schedule(mc.t_steps);
            const Grid lat = diffusion::ddim_sample(params, sched, cond, so);
            images.push_back(codec.decode(lat));
            labels.push_back(lab);
            refs.push_back(ref);
            ref_colors.push_back(colors);

            if (cond.refs.size() >= 2) {
                // Pairwise relevance-map overlap on the finished sample.
                std::vector<std::vector<Vec>> maps(
                    static_cast<std::size_t>(mc.n_layers));
                diffusion::ForwardHooks hooks;
                hooks.relevance_out = &maps;
                diffusion::denoiser_forward(params, cond, lat, 1, &hooks);
                for (const auto& layer_maps : maps)
                    for (std::size_t a = 0; a < layer_maps.size(); ++a)
                        for (std::size_t b = a + 1; b < layer_maps.size(); ++b) {
                            overlap_sum += attention_overlap(layer_maps[a], layer_maps[b]);
                            ++overlap_n;
                        }
            }
        }
    }

    EvalRow row;
    row.label = label;
    row.metrics["text_match"] = text_match_score(images, labels, *embedder);
    row.metrics["image_match"] = image_match_score(images, refs, *embedder, &ref_colors);
    if (overlap_n) row.metrics["attention_overlap"] = overlap_sum / overlap_n;
    return row;
}

EvalReport run_merge_ablation(
    const std::vector<std::pair<std::string, std::string>>& variant_ckpts,
    const scenekit::Manifest& bench, const AblationOptions& opt) {
    if (variant_ckpts.empty()) throw ArgumentError("merge ablation: no variants");
    EvalReport rep;
    for (const auto& [label, path] : variant_ckpts) {
        DenoiserParams params = diffusion::load_checkpoint(path);
        rep.rows.push_back(eval_model(params, label, bench, opt));
    }
    rep.recompute_aggregate();
    return rep;
}

}  // namespace wmerge::evalkit
