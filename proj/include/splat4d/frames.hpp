// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Frame production shared by the CLI and the viewer server: scene + pose + time -> PNG.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/image.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/scene_io.hpp"
#include "splat4d/splat_model.hpp"

#include <array>
#include <string_view>

namespace splat4d {

enum class FrameMode { Rgb, Depth };

/// "rgb" or "depth"; throws DomainError otherwise.
FrameMode parse_frame_mode(std::string_view text);
std::string_view frame_mode_name(FrameMode mode);

/// Inverse-depth colormap endpoints (meters).
inline constexpr double kDepthColormapNear = 0.5;
inline constexpr double kDepthColormapFar = 100.0;

/// Turbo colormap (polynomial fit) at t in [0, 1].
std::array<double, 3> turbo(double t);

/// Maps depth to turbo((1/d - 1/far) / (1/near - 1/far)), clamped to [0, 1].
/// Pixels at or beyond the far sentinel are black.
Image colorize_depth(const Image& depth, double far_sentinel);

/// Intrinsics for an image downscaled by `scale`, which must be 1, 0.5 or 0.25.
CameraIntrinsics scaled_intrinsics(const CameraIntrinsics& K, double scale);

/// Decoded scene ready for repeated rendering at arbitrary times.
struct FrameSource {
    SplatSet splats;
    MotionTable motion;
    CameraIntrinsics intrinsics;

    /// Decodes the scene; aggregates motion when the file carries none.
    static FrameSource from_scene(const io::Scene& scene);
};

/// Renders the source at `time` seconds from `pose` and returns the frame as an 8-bit RGB PNG.
io::Bytes render_frame_png(const FrameSource& source, const Pose& pose, double time, FrameMode mode,
                           double scale = 1.0, const RenderSettings& settings = {});

}  // namespace splat4d
