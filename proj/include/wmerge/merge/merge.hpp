#pragma once

#include <span>
#include <vector>

#include "wmerge/attn/attention.hpp"

namespace wmerge::merge {

using attn::LatentFeatures;
using attn::RelevanceMap;

// Per-position gate on the text stream: sigmoid(z * w_f + b_f), mean-normalized.
struct TextWeightLayer {
    Grid w_f;  // D x 1
    double b_f = 0.0;
};

// Z_text + sum_i Z_img^i (the uniform baseline). Empty list returns z_text.
inline LatentFeatures uniform_merge(const LatentFeatures& z_text,
                                    std::span<const LatentFeatures> z_imgs) {
    LatentFeatures out = z_text;
    for (const auto& zi : z_imgs) {
        if (zi.z.rows() != out.z.rows() || zi.z.cols() != out.z.cols())
            throw ShapeError("uniform_merge: stream shape " + numkit::shape_str(zi.z) +
                             " vs " + numkit::shape_str(out.z));
        out.z += zi.z;
    }
    return out;
}

// Scale each spatial row of z by the matching relevance weight.
inline Grid apply_row_weights(const Grid& z, const Vec& w) {
    if (w.size() != z.rows())
        throw ShapeError("apply_row_weights: " + std::to_string(w.size()) + " weights vs " +
                         numkit::shape_str(z));
    Grid out = z;
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) *= w(r);
    return out;
}

// Z_text + sum_i (A_i / mean(A_i)) .* Z_img^i.
inline LatentFeatures weighted_merge(const LatentFeatures& z_text,
                                     std::span<const LatentFeatures> z_imgs,
                                     std::span<const RelevanceMap> maps) {
    if (z_imgs.size() != maps.size() || z_imgs.empty())
        throw ArgumentError("weighted_merge: need equal non-zero counts of streams and maps");
    LatentFeatures out = z_text;
    for (std::size_t i = 0; i < z_imgs.size(); ++i) {
        const RelevanceMap norm = attn::normalize_relevance(maps[i]);
        out.z += apply_row_weights(z_imgs[i].z, norm.values);
    }
    return out;
}

// sigmoid(Z_text w_f + b_f) divided by its mean; output mean is 1.
inline Vec text_weight(const LatentFeatures& z_text, const TextWeightLayer& f) {
    const Grid raw = numkit::sigmoid(
        Grid((numkit::matmul(z_text.z, f.w_f).array() + f.b_f).matrix()));
    const Vec v = raw.col(0);
    return v / v.mean();  // sigmoid output is strictly positive
}

// (f(Z_text)/mean f) .* Z_text + sum_i (A_i/mean A_i) .* Z_img^i.
inline LatentFeatures trained_weighted_merge(const LatentFeatures& z_text,
                                             std::span<const LatentFeatures> z_imgs,
                                             std::span<const RelevanceMap> maps,
                                             const TextWeightLayer& f) {
    LatentFeatures out = z_text;
    out.z = apply_row_weights(z_text.z, text_weight(z_text, f));
    for (std::size_t i = 0; i < z_imgs.size(); ++i) {
        if (i >= maps.size()) throw ArgumentError("trained_weighted_merge: missing relevance map");
        const RelevanceMap norm = attn::normalize_relevance(maps[i]);
        out.z += apply_row_weights(z_imgs[i].z, norm.values);
    }
    return out;
}

// --- tape variants ---

// Normalizes a raw (HW x 1) relevance column to mean 1 on the tape.
inline tape::Var normalize_relevance_t(tape::Graph& g, const tape::Var& a) {
    if (!(a->val.mean() > 0.0))
        throw DegenerateMapError("normalize_relevance: map mean is not positive");
    return g.div_scalar(a, g.mean_all(a));
}

inline tape::Var weighted_merge_t(tape::Graph& g, const tape::Var& z_text,
                                  std::span<const tape::Var> z_imgs,
                                  std::span<const tape::Var> raw_maps) {
    tape::Var out = z_text;
    for (std::size_t i = 0; i < z_imgs.size(); ++i)
        out = g.add(out, g.row_scale(z_imgs[i], normalize_relevance_t(g, raw_maps[i])));
    return out;
}

// sigmoid(z w_f + b_f) / mean as an (HW x 1) column.
inline tape::Var text_weight_t(tape::Graph& g, const tape::Var& z_text, const tape::Var& w_f,
                               const tape::Var& b_f) {
    const auto raw = g.sigmoid(g.add_scalar(g.matmul(z_text, w_f), b_f));
    return g.div_scalar(raw, g.mean_all(raw));
}

inline tape::Var trained_weighted_merge_t(tape::Graph& g, const tape::Var& z_text,
                                          std::span<const tape::Var> z_imgs,
                                          std::span<const tape::Var> raw_maps,
                                          const tape::Var& w_f, const tape::Var& b_f) {
    tape::Var out = g.row_scale(z_text, text_weight_t(g, z_text, w_f, b_f));
    for (std::size_t i = 0; i < z_imgs.size(); ++i)
        out = g.add(out, g.row_scale(z_imgs[i], normalize_relevance_t(g, raw_maps[i])));
    return out;
}

}  // namespace wmerge::merge
