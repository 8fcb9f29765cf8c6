#include "wmerge/scenekit/scene.hpp"

#include <numbers>

namespace wmerge::scenekit {

namespace {

bool point_in_triangle(double px, double py, double x0, double y0, double x1, double y1,
                       double x2, double y2) {
    auto side = [](double ax, double ay, double bx, double by, double cx, double cy) {
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    };
    const double d1 = side(x0, y0, x1, y1, px, py);
    const double d2 = side(x1, y1, x2, y2, px, py);
    const double d3 = side(x2, y2, x0, y0, px, py);
    const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(has_neg && has_pos);
}

bool point_in_star(double px, double py, double cx, double cy, double r_out, double r_in) {
    // 5-point star as a 10-vertex polygon, even-odd not needed (convex fan of
    // triangles from the center).
    constexpr int n = 5;
    double vx[2 * n], vy[2 * n];
    for (int i = 0; i < 2 * n; ++i) {
        const double r = (i % 2 == 0) ? r_out : r_in;
        const double a = -std::numbers::pi / 2 + i * std::numbers::pi / n;
        vx[i] = cx + r * std::cos(a);
        vy[i] = cy + r * std::sin(a);
    }
    for (int i = 0; i < 2 * n; ++i) {
        const int j = (i + 1) % (2 * n);
        if (point_in_triangle(px, py, cx, cy, vx[i], vy[i], vx[j], vy[j])) return true;
    }
    return false;
}

}  // namespace

void rasterize_shape(int shape, const BBox& box, std::vector<std::uint8_t>& mask, int canvas_w) {
    const double cx = box.x + box.w / 2.0;
    const double cy = box.y + box.h / 2.0;
    const double rx = box.w / 2.0;
    const double ry = box.h / 2.0;
    for (int y = box.y; y < box.y + box.h; ++y) {
        for (int x = box.x; x < box.x + box.w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            bool in = false;
            switch (shape) {
                case 0:  // circle (ellipse inscribed in the box)
                    in = ((px - cx) / rx) * ((px - cx) / rx) + ((py - cy) / ry) * ((py - cy) / ry) <=
                         1.0;
                    break;
                case 1:  // square
                    in = true;
                    break;
                case 2:  // triangle: apex top-center, base on the bottom edge
                    in = point_in_triangle(px, py, cx, box.y + 0.5, box.x + 0.5,
                                           box.y + box.h - 0.5, box.x + box.w - 0.5,
                                           box.y + box.h - 0.5);
                    break;
                case 3:  // star
                    in = point_in_star(px, py, cx, cy, std::min(rx, ry), 0.42 * std::min(rx, ry));
                    break;
                default:
                    throw ArgumentError("rasterize_shape: unknown shape index");
            }
            if (in) mask[static_cast<std::size_t>(y * canvas_w + x)] = 1;
        }
    }
}

std::string prompt_for(const std::vector<ObjectSpec>& objects) {
    std::string p;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (i) p += " and ";
        p += "a " + objects[i].label();
    }
    return p;
}

namespace {

Scene gen_scene_impl(Rng& rng, const std::vector<std::pair<int, int>>& shape_color) {
    const int n = static_cast<int>(shape_color.size());
    if (n < 1 || n > 4) throw ArgumentError("gen_scene: n_objects must be in [1, 4]");

    constexpr int kMaxTries = 200;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        // Nominal placement boxes.
        std::vector<BBox> nominal(static_cast<std::size_t>(n));
        for (auto& b : nominal) {
            b.w = static_cast<int>(rng.below(15)) + 14;  // 14..28
            b.h = static_cast<int>(rng.below(15)) + 14;
            b.x = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(kCanvas - b.w - 2)));
            b.y = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(kCanvas - b.h - 2)));
        }

        // Rasterize with z-order: later objects draw over earlier ones.
        std::vector<int> owner(kCanvas * kCanvas, -1);
        for (int i = 0; i < n; ++i) {
            std::vector<std::uint8_t> mask(kCanvas * kCanvas, 0);
            rasterize_shape(shape_color[static_cast<std::size_t>(i)].first,
                            nominal[static_cast<std::size_t>(i)], mask, kCanvas);
            for (int p = 0; p < kCanvas * kCanvas; ++p)
                if (mask[static_cast<std::size_t>(p)]) owner[static_cast<std::size_t>(p)] = i;
        }

        // Tight bboxes of visible pixels.
        std::vector<BBox> tight(static_cast<std::size_t>(n));
        std::vector<int> x0(n, kCanvas), y0(n, kCanvas), x1(n, -1), y1(n, -1);
        for (int y = 0; y < kCanvas; ++y)
            for (int x = 0; x < kCanvas; ++x) {
                const int o = owner[static_cast<std::size_t>(y * kCanvas + x)];
                if (o < 0) continue;
                x0[o] = std::min(x0[o], x);
                y0[o] = std::min(y0[o], y);
                x1[o] = std::max(x1[o], x);
                y1[o] = std::max(y1[o], y);
            }
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            if (x1[i] < 0) {
                ok = false;  // fully occluded
                break;
            }
            tight[static_cast<std::size_t>(i)] = {x0[i], y0[i], x1[i] - x0[i] + 1,
                                                  y1[i] - y0[i] + 1};
        }
        if (ok) {
            for (int i = 0; i < n && ok; ++i)
                for (int j = i + 1; j < n && ok; ++j) {
                    const auto& a = tight[static_cast<std::size_t>(i)];
                    const auto& b = tight[static_cast<std::size_t>(j)];
                    const int smaller = std::min(a.area(), b.area());
                    if (BBox::overlap_area(a, b) * 5 > smaller) ok = false;  // > 20%
                }
        }
        if (!ok) continue;

        Scene scene;
        scene.image = Image::filled(kCanvas, kCanvas, kBackground);
        for (int y = 0; y < kCanvas; ++y)
            for (int x = 0; x < kCanvas; ++x) {
                const int o = owner[static_cast<std::size_t>(y * kCanvas + x)];
                if (o >= 0)
                    scene.image.set(x, y,
                                    color_values()[static_cast<std::size_t>(
                                        shape_color[static_cast<std::size_t>(o)].second)]);
            }
        for (int i = 0; i < n; ++i) {
            ObjectSpec obj;
            obj.shape = shape_color[static_cast<std::size_t>(i)].first;
            obj.color = shape_color[static_cast<std::size_t>(i)].second;
            obj.bbox = tight[static_cast<std::size_t>(i)];
            obj.z_order = i;
            scene.spec.objects.push_back(obj);
        }
        scene.spec.prompt = prompt_for(scene.spec.objects);
        return scene;
    }
    throw GenerationError("gen_scene: placement failed after bounded retries");
}

}  // namespace

Scene gen_scene(Rng& rng, int n_objects) {
    if (n_objects < 1 || n_objects > 4)
        throw ArgumentError("gen_scene: n_objects must be in [1, 4]");
    // Distinct (shape, color) combinations.
    std::vector<std::pair<int, int>> combos;
    for (int s = 0; s < kNumShapes; ++s)
        for (int c = 0; c < kNumColors; ++c) combos.emplace_back(s, c);
    std::vector<std::pair<int, int>> chosen;
    for (int i = 0; i < n_objects; ++i) {
        const auto idx = rng.below(combos.size());
        chosen.push_back(combos[idx]);
        combos.erase(combos.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return gen_scene_impl(rng, chosen);
}

Scene gen_scene_with_objects(Rng& rng, const std::vector<std::pair<int, int>>& shape_color) {
    return gen_scene_impl(rng, shape_color);
}

}  // namespace wmerge::scenekit
