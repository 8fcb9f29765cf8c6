#pragma once

#include <memory>

#include "wmerge/numkit/grid.hpp"
#include "wmerge/scenekit/scene.hpp"

namespace wmerge::scenekit {

// Cross-modal embedder interface. The stub is deterministic and hermetic;
// the HTTP client talks to an external embedding service.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Vec embed_text(const std::string& label) = 0;
    virtual Vec embed_image(const Image& crop) = 0;
    virtual int dim() const = 0;
};

inline double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ShapeError("cosine: vector sizes differ");
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ArgumentError("cosine: zero vector");
    return a.dot(b) / (na * nb);
}

// Unit-normalized [shape block | color block | low-amplitude residual].
// Text side uses exact one-hots from the label; image side classifies the
// crop's pixels (palette histogram for color, mask overlap against re-rendered
// shape templates for shape), so it degrades gracefully on generated images.
class StubEmbedder : public Embedder {
public:
    StubEmbedder();
    Vec embed_text(const std::string& label) override;
    Vec embed_image(const Image& crop) override;
    int dim() const override { return kDim; }

    static constexpr int kDim = kNumShapes + kNumColors + 20;

private:
    Vec assemble(const Vec& shape_scores, const Vec& color_scores, std::uint64_t residual_seed) const;
    // Per shape: tight-crop extent of a rendered shape relative to its nominal
    // box, calibrated from the renderer (stars are tighter than their box).
    std::array<double, kNumShapes> tight_ratio_w_{};
    std::array<double, kNumShapes> tight_ratio_h_{};
};

struct HttpEmbedderOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string path = "/embed";
    int timeout_sec = 5;
    int retries = 2;
};

// POSTs {"kind": "text"|"image", "payload": <label | base64 PNG bytes>} and
// expects {"vector": [..]}.
std::unique_ptr<Embedder> make_http_embedder(const HttpEmbedderOptions& opt, int dim);

std::unique_ptr<Embedder> make_embedder(const std::string& kind);  // "stub" | "service"

}  // namespace wmerge::scenekit
