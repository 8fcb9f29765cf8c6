#pragma once

#include "wmerge/numkit/rng.hpp"
#include "wmerge/scenekit/image.hpp"

namespace wmerge::scenekit {

inline constexpr int kCanvas = 64;

struct ObjectSpec {
    int shape = 0;  // index into shape_names()
    int color = 0;  // index into color_names()
    BBox bbox;      // tight bounds of the object's visible pixels
    int z_order = 0;

    std::string label() const { return object_label(shape, color); }
};

struct SceneSpec {
    std::vector<ObjectSpec> objects;
    std::string prompt;  // "a red circle and a blue star"
};

struct Scene {
    Image image;
    SceneSpec spec;
};

// Renders one shape filled with its color into the nominal box; returns the
// per-pixel coverage mask.
void rasterize_shape(int shape, const BBox& box, std::vector<std::uint8_t>& mask, int canvas_w);

// Deterministic scene with n distinct objects. Ground-truth bboxes are the
// exact bounds of each object's visible (non-occluded) pixels; pairwise bbox
// overlap is at most 20% of the smaller box.
Scene gen_scene(Rng& rng, int n_objects);

// Same placement logic with a caller-chosen (shape, color) list; used to
// plant duplicated-object corpora.
Scene gen_scene_with_objects(Rng& rng, const std::vector<std::pair<int, int>>& shape_color);

std::string prompt_for(const std::vector<ObjectSpec>& objects);

}  // namespace wmerge::scenekit
