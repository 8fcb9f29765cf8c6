#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "wmerge/errors.hpp"

namespace wmerge::scenekit {

inline constexpr int kNumShapes = 4;
inline constexpr int kNumColors = 8;

inline const std::array<const char*, kNumShapes>& shape_names() {
    static const std::array<const char*, kNumShapes> names{"circle", "square", "triangle", "star"};
    return names;
}

struct Rgb {
    std::uint8_t r, g, b;
};

inline const std::array<const char*, kNumColors>& color_names() {
    static const std::array<const char*, kNumColors> names{"red",     "green",  "blue",
                                                           "yellow",  "magenta", "cyan",
                                                           "orange",  "purple"};
    return names;
}

inline const std::array<Rgb, kNumColors>& color_values() {
    static const std::array<Rgb, kNumColors> vals{{{220, 40, 40},
                                                   {40, 200, 60},
                                                   {50, 80, 230},
                                                   {230, 220, 40},
                                                   {220, 50, 220},
                                                   {40, 210, 210},
                                                   {240, 140, 30},
                                                   {130, 40, 190}}};
    return vals;
}

inline constexpr Rgb kBackground{30, 30, 30};

// Token ids: 0 <null>, 1 "a", 2 "and", 3..6 shapes, 7..14 colors.
inline constexpr int kNullToken = 0;

inline std::vector<std::string> vocabulary() {
    std::vector<std::string> v{"<null>", "a", "and"};
    for (auto s : shape_names()) v.push_back(s);
    for (auto c : color_names()) v.push_back(c);
    return v;
}

inline int vocab_size() { return 3 + kNumShapes + kNumColors; }

inline int token_id(const std::string& word) {
    const auto v = vocabulary();
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == word) return static_cast<int>(i);
    throw ArgumentError("unknown word '" + word + "'");
}

inline std::vector<int> tokenize(const std::string& text) {
    std::vector<int> ids;
    std::istringstream is(text);
    std::string w;
    while (is >> w) ids.push_back(token_id(w));
    if (ids.empty()) throw ArgumentError("tokenize: empty text");
    return ids;
}

inline std::string object_label(int shape, int color) {
    return std::string(color_names()[static_cast<std::size_t>(color)]) + " " +
           shape_names()[static_cast<std::size_t>(shape)];
}

}  // namespace wmerge::scenekit
