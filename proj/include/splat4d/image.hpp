// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splat4d {

/// Dense row-major image with interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const { return data.size(); }

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

/// Per-pixel integer labels; 0 is the static background.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;

    LabelMap() = default;
    LabelMap(int w, int h, std::int32_t fill = 0)
        : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

    std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Throws ShapeError naming `what` unless both images have identical dimensions.
void require_same_shape(const Image& a, const Image& b, const std::string& what);

}  // namespace splat4d
