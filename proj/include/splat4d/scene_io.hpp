// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// File formats: scenes (.s4d), depth planes (.d4d), trajectories (text), PNG frames
// and masks. Byte layouts are documented in docs/formats.md.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/image.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/splat_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splat4d::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::string_view kSceneMagic = "S4D1";
inline constexpr std::string_view kDepthMagic = "D4D1";

/// FNV-1a, 64 bit.
std::uint64_t checksum(std::span<const std::uint8_t> bytes);

struct Scene {
    SplatMap map;
    CameraIntrinsics intrinsics;
    std::optional<MotionTable> motion;

    bool operator==(const Scene&) const = default;
};

Bytes encode_scene(const Scene& scene);

/// Throws VersionError, TruncatedError, DimensionError, ChecksumError or FormatError.
Scene decode_scene(std::span<const std::uint8_t> bytes);

void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

Bytes encode_depth(const Image& depth);
Image decode_depth(std::span<const std::uint8_t> bytes);
void save_depth(const std::filesystem::path& path, const Image& depth);
Image load_depth(const std::filesystem::path& path);

/// 8-bit quantization used for every PNG frame: floor(255 c + 0.5), clamped to [0, 255].
std::uint8_t quantize_unit(double c);

/// RGB image in [0, 1] to an 8-bit RGB PNG.
Bytes encode_png_rgb(const Image& rgb);
void save_png_rgb(const std::filesystem::path& path, const Image& rgb);

/// Reads an 8-bit gray, RGB or RGBA PNG as an RGB image in [0, 1] (alpha dropped).
Image load_png_rgb(const std::filesystem::path& path);
Image decode_png_rgb(std::span<const std::uint8_t> bytes);

/// Reads an 8- or 16-bit single-channel PNG as labels. When expected_width/height are
/// positive the mask must match them (DimensionError otherwise).
LabelMap load_mask(const std::filesystem::path& path, int expected_width = 0, int expected_height = 0);
LabelMap decode_mask(std::span<const std::uint8_t> bytes, int expected_width = 0, int expected_height = 0);

/// Writes labels as a 16-bit gray PNG (8-bit when every label fits).
void save_mask(const std::filesystem::path& path, const LabelMap& mask);
Bytes encode_mask(const LabelMap& mask, int bit_depth = 16);

struct TrajectorySample {
    double time = 0.0;
    Pose pose;
};

/// Time-stamped camera poses with spherical-linear interpolation between samples.
class Trajectory {
public:
    Trajectory() = default;
    explicit Trajectory(std::vector<TrajectorySample> samples);

    /// Lines of `time qw qx qy qz tx ty tz`; '#' starts a comment.
    static Trajectory parse(std::string_view text);
    static Trajectory load(const std::filesystem::path& path);

    std::string to_text() const;
    void save(const std::filesystem::path& path) const;

    /// Exact at sample times; slerp on rotation and lerp on translation between them.
    /// Throws DomainError outside [first, last].
    Pose interpolate(double time) const;

    const std::vector<TrajectorySample>& samples() const { return samples_; }
    double start_time() const;
    double end_time() const;

private:
    std::vector<TrajectorySample> samples_;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace splat4d::io
