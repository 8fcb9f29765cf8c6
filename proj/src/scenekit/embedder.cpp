#include "wmerge/scenekit/embedder.hpp"

#include <sstream>

#include "wmerge/numkit/rng.hpp"

namespace wmerge::scenekit {

namespace {

constexpr double kShapeWeight = 0.7;
constexpr double kColorWeight = 0.7;
constexpr double kResidualWeight = 0.10;
constexpr double kIouSigma = 0.1;

// Tight foreground mask of `shape` rendered into a (nw x nh) nominal box.
struct TightMask {
    int w = 0, h = 0;
    std::vector<std::uint8_t> mask;  // w*h, row-major
};

TightMask render_tight(int shape, int nw, int nh) {
    const int canvas_w = nw + 2, canvas_h = nh + 2;
    std::vector<std::uint8_t> full(static_cast<std::size_t>(canvas_w * canvas_h), 0);
    rasterize_shape(shape, BBox{1, 1, nw, nh}, full, canvas_w);
    int x0 = canvas_w, y0 = canvas_h, x1 = -1, y1 = -1;
    for (int y = 0; y < canvas_h; ++y)
        for (int x = 0; x < canvas_w; ++x)
            if (full[static_cast<std::size_t>(y * canvas_w + x)]) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    TightMask t;
    if (x1 < 0) return t;
    t.w = x1 - x0 + 1;
    t.h = y1 - y0 + 1;
    t.mask.resize(static_cast<std::size_t>(t.w * t.h));
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            t.mask[static_cast<std::size_t>(y * t.w + x)] =
                full[static_cast<std::size_t>((y + y0) * canvas_w + (x + x0))];
    return t;
}

// Intersection-over-union of two tight masks aligned at their top-left corners.
double mask_iou(const TightMask& a, const TightMask& b) {
    int inter = 0, uni = 0;
    const int w = std::max(a.w, b.w), h = std::max(a.h, b.h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool in_a = x < a.w && y < a.h && a.mask[static_cast<std::size_t>(y * a.w + x)];
            const bool in_b = x < b.w && y < b.h && b.mask[static_cast<std::size_t>(y * b.w + x)];
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

double color_dist2(Rgb a, Rgb b) {
    const double dr = static_cast<double>(a.r) - b.r;
    const double dg = static_cast<double>(a.g) - b.g;
    const double db = static_cast<double>(a.b) - b.b;
    return dr * dr + dg * dg + db * db;
}

Vec unit_or_uniform(Vec v) {
    const double n = v.norm();
    if (n < 1e-12) return Vec::Constant(v.size(), 1.0 / std::sqrt(static_cast<double>(v.size())));
    return v / n;
}

}  // namespace

StubEmbedder::StubEmbedder() {
    // Calibrate how much each shape's tight extent shrinks relative to its
    // nominal box, using a large reference render.
    constexpr int kRef = 40;
    for (int s = 0; s < kNumShapes; ++s) {
        const TightMask t = render_tight(s, kRef, kRef);
        tight_ratio_w_[static_cast<std::size_t>(s)] = static_cast<double>(t.w) / kRef;
        tight_ratio_h_[static_cast<std::size_t>(s)] = static_cast<double>(t.h) / kRef;
    }
}

Vec StubEmbedder::assemble(const Vec& shape_scores, const Vec& color_scores,
                           std::uint64_t residual_seed) const {
    Rng rng(residual_seed);
    Vec residual(kDim - kNumShapes - kNumColors);
    for (Eigen::Index i = 0; i < residual.size(); ++i) residual(i) = rng.gaussian();
    Vec e(kDim);
    e.head(kNumShapes) = kShapeWeight * unit_or_uniform(shape_scores);
    e.segment(kNumShapes, kNumColors) = kColorWeight * unit_or_uniform(color_scores);
    e.tail(residual.size()) = kResidualWeight * unit_or_uniform(residual);
    return e / e.norm();
}

Vec StubEmbedder::embed_text(const std::string& label) {
    std::istringstream is(label);
    std::string color_word, shape_word, extra;
    if (!(is >> color_word >> shape_word) || (is >> extra))
        throw ArgumentError("embed_text: label '" + label + "' is not '<color> <shape>'");
    int shape = -1, color = -1;
    for (int s = 0; s < kNumShapes; ++s)
        if (shape_word == shape_names()[static_cast<std::size_t>(s)]) shape = s;
    for (int c = 0; c < kNumColors; ++c)
        if (color_word == color_names()[static_cast<std::size_t>(c)]) color = c;
    if (shape < 0 || color < 0)
        throw ArgumentError("embed_text: label '" + label + "' not in vocabulary");

    Vec s = Vec::Zero(kNumShapes);
    s(shape) = 1.0;
    Vec c = Vec::Zero(kNumColors);
    c(color) = 1.0;
    return assemble(s, c, Rng::derive_seed(0x7e87u, "text:" + label));
}

Vec StubEmbedder::embed_image(const Image& crop) {
    if (crop.w <= 0 || crop.h <= 0 || crop.rgb.empty())
        throw ArgumentError("embed_image: empty crop");

    // Foreground mask: pixels far from the background color.
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(crop.w * crop.h), 0);
    Vec color_scores = Vec::Zero(kNumColors);
    int x0 = crop.w, y0 = crop.h, x1 = -1, y1 = -1;
    int area = 0;
    for (int y = 0; y < crop.h; ++y)
        for (int x = 0; x < crop.w; ++x) {
            const Rgb px = crop.at(x, y);
            if (color_dist2(px, kBackground) < 60.0 * 60.0) continue;
            mask[static_cast<std::size_t>(y * crop.w + x)] = 1;
            ++area;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
            int best = 0;
            double best_d = color_dist2(px, color_values()[0]);
            for (int c = 1; c < kNumColors; ++c) {
                const double d = color_dist2(px, color_values()[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            color_scores(best) += 1.0;
        }

    Vec shape_scores = Vec::Zero(kNumShapes);
    std::uint64_t residual_seed = 0x157edu;
    if (area > 0) {
        // Observed tight mask of the foreground.
        TightMask obs;
        obs.w = x1 - x0 + 1;
        obs.h = y1 - y0 + 1;
        obs.mask.resize(static_cast<std::size_t>(obs.w * obs.h));
        for (int y = 0; y < obs.h; ++y)
            for (int x = 0; x < obs.w; ++x)
                obs.mask[static_cast<std::size_t>(y * obs.w + x)] =
                    mask[static_cast<std::size_t>((y + y0) * crop.w + (x + x0))];
        // Score each shape by the best mask overlap across a few candidate
        // nominal sizes inferred from that shape's tight-extent ratio.
        for (int s = 0; s < kNumShapes; ++s) {
            const int nw0 = static_cast<int>(
                std::lround(obs.w / tight_ratio_w_[static_cast<std::size_t>(s)]));
            const int nh0 = static_cast<int>(
                std::lround(obs.h / tight_ratio_h_[static_cast<std::size_t>(s)]));
            double best = 0.0;
            for (int nw = std::max(1, nw0 - 1); nw <= nw0 + 1; ++nw)
                for (int nh = std::max(1, nh0 - 1); nh <= nh0 + 1; ++nh)
                    best = std::max(best, mask_iou(obs, render_tight(s, nw, nh)));
            const double d = (1.0 - best) / kIouSigma;
            shape_scores(s) = std::exp(-d * d);
        }
        // Residual keyed to coarse crop statistics so near-identical crops
        // stay near-identical.
        residual_seed = Rng::derive_seed(
            static_cast<std::uint64_t>(area), "img",
            static_cast<std::uint64_t>((x1 - x0 + 1) * 131 + (y1 - y0 + 1)));
    }
    return assemble(shape_scores, color_scores, residual_seed);
}

std::unique_ptr<Embedder> make_embedder(const std::string& kind) {
    if (kind == "stub") return std::make_unique<StubEmbedder>();
    if (kind == "service") return make_http_embedder(HttpEmbedderOptions{}, StubEmbedder::kDim);
    throw ConfigError("unknown embedder '" + kind + "' (expected stub or service)");
}

}  // namespace wmerge::scenekit
