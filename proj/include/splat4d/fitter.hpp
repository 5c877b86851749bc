// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Analysis-by-synthesis fitting of a SplatMap and its object motion to a short clip.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/image.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/objectives.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/splat_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace splat4d {

/// A ground-truth frame at `time` seconds after the input frame, seen from `pose`.
struct SupervisionFrame {
    Image rgb;
    Image depth;
    Pose pose;
    double time = 0.0;
};

/// Adam step sizes per channel group, decayed with a cosine schedule to
/// `cosine_floor` times their initial value.
struct LearningRates {
    double depth_offset = 1e-3;
    double xy_offset = 1e-3;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double color = 1e-2;
    double motion = 1e-2;
    /// Velocity and acceleration are confounded when only one nonzero time is supervised
    /// (displacement v T + a T^2 / 2), so accelerations stay frozen unless this is set.
    double acceleration = 0.0;
    double cosine_floor = 0.05;

    double for_channel(Channel c) const;
};

struct FitProblem {
    CameraIntrinsics intrinsics;
    Image input_rgb;    ///< I_t, H x W x 3 in [0, 1]
    Image input_depth;  ///< D_t, meters, > 0
    LabelMap mask;      ///< instance labels, 0 = static
    SupervisionFrame future;        ///< t + T
    SupervisionFrame intermediate;  ///< t + t_r, 0 <= t_r < T

    LossWeights weights;
    int layers = kDefaultLayers;
    int iterations = 500;
    LearningRates learning_rates;
    std::uint64_t seed = 0;
    /// Scale of the zero-mean Gaussian prior on object linear and angular velocity.
    double velocity_prior_scale = 1.0;
    /// Std of the seeded noise added to the initial per-splat velocities (m/s).
    double velocity_jitter = 1e-3;
    /// When set, object motion is held at this table instead of being aggregated.
    std::optional<MotionTable> fixed_motion;
    RenderSettings render;

    /// Throws DomainError / ShapeError on inconsistent inputs.
    void validate() const;
};

struct FitReport {
    std::vector<double> loss_trace;       ///< total loss before each update
    std::vector<double> best_loss_trace;  ///< running minimum of loss_trace
    double initial_loss = 0.0;
    double best_loss = 0.0;
    int best_iteration = 0;  ///< equals `iterations` when the iterate after the last update was best
    int iterations = 0;
    MetricsRecord intermediate_metrics;  ///< at t + t_r
    MetricsRecord future_metrics;        ///< at t + T
    double wall_seconds = 0.0;
};

struct FitResult {
    SplatMap map;
    MotionTable motion;
    FitReport report;
};

/// Pixel-aligned starting point built from the input frame and its depth.
///
/// Every layer carries a +0.01 m depth offset, zero xy offset, identity rotation,
/// the input color, a footprint-sized isotropic scale and zero motion. Layer 0
/// starts at opacity 0.5 and occluded layers at 0.1.
SplatMap init_splat_map(const Image& rgb, const Image& depth, const LabelMap& mask, const CameraIntrinsics& K,
                        int layers);

/// Value of the training objective, with optional gradient over SplatMap::params.
struct ObjectiveEvaluation {
    double loss = 0.0;
    LossParts parts;
    std::vector<double> gradient;  ///< empty unless requested
    MotionTable motion;
    RenderOutput input_render;
    RenderOutput intermediate_render;
    RenderOutput future_render;
};

/// decode -> aggregate (or fixed motion) -> propagate to t_r and T -> render the input,
/// t_r and T views -> total loss; optionally back-propagates to the raw channels.
ObjectiveEvaluation evaluate_objective(const SplatMap& map, const FitProblem& problem, bool with_gradient);

/// Runs Adam from init_splat_map() for problem.iterations steps and returns the best iterate.
/// Throws FitError on a non-finite loss or gradient.
FitResult fit(const FitProblem& problem);

/// Continues fitting from a given map.
FitResult fit_from(const FitProblem& problem, SplatMap initial);

/// Per-axis standard deviations for stochastic motion sampling.
struct MotionPriorScale {
    Vec3 linear = Vec3::Zero();   ///< m/s
    Vec3 angular = Vec3::Zero();  ///< rad/s

    static MotionPriorScale isotropic(double s) { return {Vec3::Constant(s), Vec3::Constant(s)}; }
};

/// Adds seeded Gaussian noise to every dynamic object's linear and angular velocity.
/// The static entry is untouched; a zero scale returns the input unchanged.
MotionTable sample_motion(const MotionTable& table, const MotionPriorScale& prior_scale, std::uint64_t seed);

}  // namespace splat4d
