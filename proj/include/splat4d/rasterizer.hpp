// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Tile-based software splat rasterizer with an analytic backward pass.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/image.hpp"
#include "splat4d/splat_model.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace splat4d {

inline constexpr int kTileSize = 16;
/// Added to both diagonal entries of every projected covariance (px^2).
inline constexpr double kScreenDilation = 0.3;
/// Splats nearer than this view-space depth are culled.
inline constexpr double kNearPlane = 0.01;
/// Compositing stops once transmittance drops below this value.
inline constexpr double kTransmittanceCutoff = 1e-4;
/// Per-splat alpha is clamped to at most 1 - kAlphaClamp.
inline constexpr double kAlphaClamp = 1e-4;
/// Screen-space footprints extend until a splat's alpha would fall below this value,
/// and never less than 3 sigma.
inline constexpr double kFootprintAlpha = 1e-12;

struct RenderSettings {
    double alpha_floor = 1e-3;   ///< pixels at or below this accumulated alpha report far_sentinel depth
    double far_sentinel = 1e4;   ///< meters
    int threads = 0;             ///< 0 = hardware concurrency
};

struct RenderDiagnostics {
    std::size_t culled = 0;      ///< behind the near plane or off-screen
    std::size_t degenerate = 0;  ///< non-invertible projected covariance, skipped
};

struct RenderOutput {
    Image rgb;    ///< H x W x 3 in [0, 1]
    Image depth;  ///< H x W, meters
    Image alpha;  ///< H x W in [0, 1]
    RenderDiagnostics diagnostics;
};

/// Per-splat partials, ordered as the input SplatSet. Culled splats carry zeros.
struct RenderGradients {
    std::vector<SplatGradient> splats;
};

/// One forward render kept alive for a later backward pass. Holds a reference to
/// `splats`, which must outlive the pass.
class RenderPass {
public:
    RenderPass(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K,
               const RenderSettings& settings = {});
    ~RenderPass();
    RenderPass(RenderPass&&) noexcept;
    RenderPass& operator=(RenderPass&&) noexcept;

    const RenderOutput& output() const;

    /// `d_rgb` is H x W x 3 interleaved, `d_depth` is H x W. Depth gradients at pixels
    /// reporting the far sentinel are ignored. Non-finite upstream values propagate into
    /// the result.
    RenderGradients backward(std::span<const double> d_rgb, std::span<const double> d_depth) const;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

/// Renders `splats` (view space of the input frame) from the camera at `pose`.
///
/// Splats composite front to back in view-depth order (ties by index). Colors map
/// from [-1, 1] storage to [0, 1] by (c + 1) / 2. Depth is the alpha-weighted view z
/// normalized by accumulated alpha; the background is black.
RenderOutput render(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K,
                    const RenderSettings& settings = {});

/// Renders and back-propagates upstream image gradients to every splat parameter.
/// Throws DomainError on non-finite upstream gradients.
std::pair<RenderOutput, RenderGradients> render_with_gradients(const SplatSet& splats, const Pose& pose,
                                                               const CameraIntrinsics& K,
                                                               std::span<const double> d_rgb,
                                                               std::span<const double> d_depth,
                                                               const RenderSettings& settings = {});

}  // namespace splat4d
