// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/frames.hpp"

#include "splat4d/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splat4d {

FrameMode parse_frame_mode(std::string_view text) {
    if (text == "rgb") {
        return FrameMode::Rgb;
    }
    if (text == "depth") {
        return FrameMode::Depth;
    }
    throw DomainError("unknown frame mode '" + std::string(text) + "' (expected rgb or depth)");
}

std::string_view frame_mode_name(FrameMode mode) { return mode == FrameMode::Rgb ? "rgb" : "depth"; }

// Polynomial approximation of Google's Turbo colormap.
std::array<double, 3> turbo(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double t4 = t3 * t;
    const double t5 = t4 * t;
    const double r = 0.13572138 + 4.61539260 * t - 42.66032258 * t2 + 132.13108234 * t3 - 152.94239396 * t4 +
                     59.28637943 * t5;
    const double g = 0.09140261 + 2.19418839 * t + 4.84296658 * t2 - 14.18503333 * t3 + 4.27729857 * t4 +
                     2.82956604 * t5;
    const double b = 0.10667330 + 12.64194608 * t - 60.58204836 * t2 + 110.36276771 * t3 - 89.90310912 * t4 +
                     27.34824973 * t5;
    return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
}

Image colorize_depth(const Image& depth, double far_sentinel) {
    Image out(depth.width, depth.height, 3);
    const double inv_far = 1.0 / kDepthColormapFar;
    const double span = 1.0 / kDepthColormapNear - inv_far;
    for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
        const double d = depth.data[i];
        if (!(d > 0.0) || d >= far_sentinel) {
            continue;
        }
        const auto c = turbo((1.0 / d - inv_far) / span);
        for (int k = 0; k < 3; ++k) {
            out.data[i * 3 + k] = c[k];
        }
    }
    return out;
}

CameraIntrinsics scaled_intrinsics(const CameraIntrinsics& K, double scale) {
    if (scale == 1.0) {
        return K;
    }
    if (scale != 0.5 && scale != 0.25) {
        throw DomainError("scale must be 1, 0.5 or 0.25");
    }
    CameraIntrinsics out;
    out.width = std::max(1, static_cast<int>(std::lround(K.width * scale)));
    out.height = std::max(1, static_cast<int>(std::lround(K.height * scale)));
    out.fx = K.fx * scale;
    out.fy = K.fy * scale;
    // Pixel centers sit at integer coordinates, so the principal point maps through (c + 0.5) s - 0.5.
    out.cx = std::clamp((K.cx + 0.5) * scale - 0.5, 0.0, out.width - 1.0);
    out.cy = std::clamp((K.cy + 0.5) * scale - 0.5, 0.0, out.height - 1.0);
    return out;
}

FrameSource FrameSource::from_scene(const io::Scene& scene) {
    FrameSource src;
    src.intrinsics = scene.intrinsics;
    src.splats = decode(scene.map, scene.intrinsics);
    src.motion = scene.motion ? *scene.motion : aggregate(src.splats);
    for (const Splat& s : src.splats.splats) {
        if (!src.motion.contains(s.object_id)) {
            throw DomainError("scene motion table has no entry for object " + std::to_string(s.object_id));
        }
    }
    return src;
}

io::Bytes render_frame_png(const FrameSource& source, const Pose& pose, double time, FrameMode mode, double scale,
                           const RenderSettings& settings) {
    if (!std::isfinite(time) || time < 0.0) {
        throw DomainError("time must be finite and >= 0");
    }
    const CameraIntrinsics K = scaled_intrinsics(source.intrinsics, scale);
    const SplatSet moved = propagate(source.splats, source.motion, time);
    const RenderOutput out = render(moved, pose, K, settings);
    if (mode == FrameMode::Depth) {
        return io::encode_png_rgb(colorize_depth(out.depth, settings.far_sentinel));
    }
    return io::encode_png_rgb(out.rgb);
}

}  // namespace splat4d
