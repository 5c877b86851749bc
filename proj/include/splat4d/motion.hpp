// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Per-object rigid motion: aggregation of per-splat velocities and propagation
// of splats to future times under constant linear and angular acceleration.
#pragma once

#include "splat4d/splat_model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace splat4d {

inline constexpr std::int32_t kStaticObject = 0;

/// Radius below which a splat is treated as sitting on its object's centroid
/// and left out of the angular averages.
inline constexpr double kCentroidEpsilon = 1e-6;

struct ObjectMotion {
    std::int32_t object_id = kStaticObject;
    Vec3 linear_velocity = Vec3::Zero();
    Vec3 linear_acceleration = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();      ///< rad/s, axis-angle rate about the centroid
    Vec3 angular_acceleration = Vec3::Zero();  ///< rad/s^2
    Vec3 centroid = Vec3::Zero();

    bool is_zero() const {
        return linear_velocity.isZero(0.0) && linear_acceleration.isZero(0.0) && angular_velocity.isZero(0.0) &&
               angular_acceleration.isZero(0.0);
    }
    bool operator==(const ObjectMotion&) const = default;
};

class MotionTable {
public:
    using Storage = std::map<std::int32_t, ObjectMotion>;

    MotionTable() { entries_.emplace(kStaticObject, ObjectMotion{}); }

    /// Inserts or replaces an entry. The static id always carries zero motion.
    void set(const ObjectMotion& m);

    bool contains(std::int32_t id) const { return entries_.contains(id); }
    const ObjectMotion& at(std::int32_t id) const;
    ObjectMotion& at(std::int32_t id);
    std::size_t size() const { return entries_.size(); }

    Storage::const_iterator begin() const { return entries_.begin(); }
    Storage::const_iterator end() const { return entries_.end(); }

    bool operator==(const MotionTable&) const = default;

private:
    Storage entries_;
};

/// Averages member velocities and accelerations into one rigid motion per object.
///
/// Angular rates are the mean over members of p x (v - v_lin) / |p|^2 with p the
/// offset from the object centroid. Members closer than kCentroidEpsilon to the
/// centroid are excluded from the angular averages. Summation is sequential in
/// splat order.
MotionTable aggregate(const SplatSet& splats);

/// As above, additionally requiring each id in `expected_ids` to have members
/// (AggregationError otherwise).
MotionTable aggregate(const SplatSet& splats, std::span<const std::int32_t> expected_ids);

/// Moves every splat rigidly with its object for `dt` seconds.
///
/// Member offsets from the centroid are rotated by the exponential map of
/// theta = omega dt + alpha dt^2 / 2, and the rotation is pre-composed onto each
/// splat's orientation. Per-splat velocities advance by a dt. dt = 0 and
/// motionless objects leave splats bit-identical.
SplatSet propagate(const SplatSet& splats, const MotionTable& motion, double dt);

/// Motion table describing the same trajectories starting `dt` seconds later.
MotionTable advance(const MotionTable& motion, double dt);

/// Unit quaternion of the rotation vector theta (exponential map).
Quat rotation_vector_quaternion(const Vec3& theta);

// Reverse-mode counterparts.

struct ObjectMotionGradient {
    Vec3 centroid = Vec3::Zero();
    Vec3 linear_velocity = Vec3::Zero();
    Vec3 linear_acceleration = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();
    Vec3 angular_acceleration = Vec3::Zero();
};

using MotionGradients = std::map<std::int32_t, ObjectMotionGradient>;

struct PropagateGradients {
    std::vector<SplatGradient> splats;  ///< w.r.t. the input splats (motion treated separately)
    MotionGradients motion;
};

PropagateGradients propagate_backward(const SplatSet& splats, const MotionTable& motion, double dt,
                                      std::span<const SplatGradient> grad_out);

/// Adds the gradient flowing through aggregate() into `grads` (means, velocities, accelerations).
void aggregate_backward(const SplatSet& splats, const MotionGradients& grad_motion,
                        std::span<SplatGradient> grads);

/// d(q(theta))/d(theta) as a 4x3 matrix, rows ordered (w, x, y, z).
Eigen::Matrix<double, 4, 3> rotation_vector_quaternion_jacobian(const Vec3& theta);

}  // namespace splat4d
