#pragma once

#include "wmerge/numkit/grid.hpp"
#include "wmerge/numkit/tape.hpp"

namespace wmerge::attn {

// Spatial latent features of one denoiser layer: z has (h*w) rows, D cols.
struct LatentFeatures {
    int h = 0;
    int w = 0;
    Grid z;

    Eigen::Index positions() const { return z.rows(); }
};

// One layer's cross-attention projections. w_k_img / w_v_img are a single
// shared pair applied to every reference image stream.
struct AttnProjections {
    Grid w_q;       // D x d
    Grid w_k_text;  // D_text x d
    Grid w_v_text;  // D_text x d
    Grid w_k_img;   // D_img x d
    Grid w_v_img;   // D_img x d

    Eigen::Index head_dim() const { return w_q.cols(); }
};

// Non-negative spatial distribution over the h*w positions; sums to 1 as
// produced by relevance_map, mean 1 after normalize_relevance.
struct RelevanceMap {
    Vec values;
};

// Softmax(ZWq (cWk)^T / sqrt(d)) (cWv), softmax over the key axis.
inline Grid cross_attention_z(const Grid& z, const Grid& c, const Grid& proj_k,
                              const Grid& proj_v, const Grid& proj_q) {
    const Grid q = numkit::matmul(z, proj_q);
    const Grid k = numkit::matmul(c, proj_k);
    const Grid v = numkit::matmul(c, proj_v);
    const double scale = std::sqrt(static_cast<double>(proj_q.cols()));
    const Grid logits = numkit::matmul(q, Grid(k.transpose()));
    return numkit::matmul(numkit::softmax_rows(logits, scale), v);
}

inline LatentFeatures cross_attention(const LatentFeatures& z, const Grid& c, const Grid& proj_k,
                                      const Grid& proj_v, const Grid& proj_q) {
    return {z.h, z.w, cross_attention_z(z.z, c, proj_k, proj_v, proj_q)};
}

// Z_text + Z_img, each term a cross_attention over its own condition stream.
inline LatentFeatures decoupled_cross_attention(const LatentFeatures& z, const Grid& c_text,
                                                const Grid& c_img, const AttnProjections& proj) {
    LatentFeatures zt = cross_attention(z, c_text, proj.w_k_text, proj.w_v_text, proj.w_q);
    const LatentFeatures zi = cross_attention(z, c_img, proj.w_k_img, proj.w_v_img, proj.w_q);
    zt.z += zi.z;
    return zt;
}

// Object relevance: mean over the object's text tokens of
// Softmax(K_text Q^T / sqrt(d)) with softmax over the spatial axis, so the
// result is a probability distribution over the h*w positions.
inline RelevanceMap relevance_map(const LatentFeatures& z, const Grid& c_text_i,
                                  const AttnProjections& proj) {
    if (c_text_i.rows() == 0) throw ArgumentError("relevance_map: empty object text features");
    const Grid q = numkit::matmul(z.z, proj.w_q);
    const Grid k = numkit::matmul(c_text_i, proj.w_k_text);
    const double scale = std::sqrt(static_cast<double>(proj.head_dim()));
    const Grid p = numkit::softmax_rows(Grid(numkit::matmul(k, Grid(q.transpose()))), scale);
    return {p.colwise().mean().transpose()};
}

// a / mean(a); output mean is 1.
inline RelevanceMap normalize_relevance(const RelevanceMap& a) {
    const double m = a.values.mean();
    if (!(m > 0.0)) throw DegenerateMapError("normalize_relevance: map mean is not positive");
    return {a.values / m};
}

// --- tape variants (identical math, recorded for backward) ---

inline tape::Var cross_attention_t(tape::Graph& g, const tape::Var& z, const tape::Var& c,
                                   const tape::Var& proj_k, const tape::Var& proj_v,
                                   const tape::Var& proj_q) {
    const auto q = g.matmul(z, proj_q);
    const auto k = g.matmul(c, proj_k);
    const auto v = g.matmul(c, proj_v);
    const double scale = std::sqrt(static_cast<double>(proj_q->val.cols()));
    return g.matmul(g.softmax_rows(g.matmul(q, g.transpose(k)), scale), v);
}

// Returns the raw relevance distribution as an (h*w) x 1 column.
inline tape::Var relevance_map_t(tape::Graph& g, const tape::Var& z, const tape::Var& c_text_i,
                                 const tape::Var& proj_q, const tape::Var& proj_k_text) {
    if (c_text_i->val.rows() == 0)
        throw ArgumentError("relevance_map: empty object text features");
    const auto q = g.matmul(z, proj_q);
    const auto k = g.matmul(c_text_i, proj_k_text);
    const double scale = std::sqrt(static_cast<double>(proj_q->val.cols()));
    const auto p = g.softmax_rows(g.matmul(k, g.transpose(q)), scale);
    return g.transpose(g.col_mean(p));
}

}  // namespace wmerge::attn
