// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model and rigid viewpoints.
//
// Coordinate convention (used by every file format and the viewer protocol):
// right-handed, +x right, +y down, +z forward. Depth is the view-space z.
// Pixel (x, y) has its center at continuous coordinate (x, y).
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>

namespace splat4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Tag stored in file headers for the convention above ("RDF": right, down, forward).
inline constexpr std::uint32_t kConventionRDF = 0x00464452u;

struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    /// Throws DomainError unless fx, fy > 0 and the principal point lies inside the image.
    void validate() const;

    /// Intrinsics with the principal point at the image center and square pixels.
    static CameraIntrinsics centered(int width, int height, double focal);

    bool operator==(const CameraIntrinsics&) const = default;
};

/// Camera-from-world rigid transform x_cam = R * x_world + t.
class Pose {
public:
    Pose() = default;
    Pose(const Quat& rotation, const Vec3& translation);

    static Pose identity() { return {}; }

    /// Builds a pose from a (w, x, y, z) quaternion. The quaternion is normalized when its
    /// norm is within 1e-6 of one and rejected with DomainError otherwise.
    static Pose from_wxyz(double w, double x, double y, double z, const Vec3& translation);

    const Quat& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }
    Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

    Pose inverse() const;

    /// (*this) after `first`: x -> this(first(x)).
    Pose compose(const Pose& first) const;

    /// Quaternion as (w, x, y, z).
    Vec4 wxyz() const { return {rotation_.w(), rotation_.x(), rotation_.y(), rotation_.z()}; }

private:
    Quat rotation_ = Quat::Identity();
    Vec3 translation_ = Vec3::Zero();
};

/// View-space point on the ray through pixel `u + delta` at depth `depth`.
/// Pixel coordinates are taken relative to the principal point.
Vec3 unproject(const Vec2& u, const Vec2& delta, double depth, const CameraIntrinsics& K);

Vec3 transform_point(const Vec3& p, const Pose& pose);

struct Projection {
    Vec2 pixel;
    double depth = 0.0;
};

/// Returns std::nullopt for points with p.z() <= 0 (behind the camera).
std::optional<Projection> project(const Vec3& p, const CameraIntrinsics& K);

}  // namespace splat4d
