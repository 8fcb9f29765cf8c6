#pragma once

#include "wmerge/scenekit/dataset.hpp"

namespace wmerge::curation {

using scenekit::Manifest;
using scenekit::Scores;

// One object's cached embeddings.
struct ObjectEmbeddings {
    Vec text;
    Vec image;
};

// Mean over objects of cos(text, image).
double single_object_score(const std::vector<ObjectEmbeddings>& objects);

// -(1/N2) sum over ordered distinct pairs of cos(image, image'),
// N2 = n(n-1). Zero for a single object (no pairs to confuse).
double object_pair_score(const std::vector<ObjectEmbeddings>& objects);

Scores object_quality_score(const std::vector<ObjectEmbeddings>& objects);

// Fills the scores field of every record from the manifest's embedding cache.
void score_manifest(Manifest& m);

enum class ScoreField { Total, ObjectPair, SingleObject };

ScoreField parse_score_field(const std::string& s);  // "total" | "pair" | "single"

// Stable descending sort by the chosen score, ties broken by record index
// ascending; returns the first k records (embeddings carried over intact).
Manifest select_top_k(const Manifest& m, std::size_t k, ScoreField field);

}  // namespace wmerge::curation
