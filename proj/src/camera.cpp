// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/camera.hpp"

#include "splat4d/error.hpp"

#include <cmath>
#include <string>

namespace splat4d {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw DomainError("camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw DomainError("camera image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw DomainError("principal point (" + std::to_string(cx) + ", " + std::to_string(cy) +
                          ") lies outside the image");
    }
}

CameraIntrinsics CameraIntrinsics::centered(int width, int height, double focal) {
    CameraIntrinsics K;
    K.fx = focal;
    K.fy = focal;
    K.cx = 0.5 * (width - 1);
    K.cy = 0.5 * (height - 1);
    K.width = width;
    K.height = height;
    return K;
}

Pose::Pose(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    const double n = rotation_.norm();
    if (std::abs(n - 1.0) > 1e-6) {
        throw DomainError("pose quaternion is not unit length (norm " + std::to_string(n) + ")");
    }
    rotation_.normalize();
}

Pose Pose::from_wxyz(double w, double x, double y, double z, const Vec3& translation) {
    return Pose(Quat(w, x, y, z), translation);
}

Pose Pose::inverse() const {
    const Quat inv = rotation_.conjugate();
    return Pose(inv, -(inv * translation_));
}

Pose Pose::compose(const Pose& first) const {
    Quat q = rotation_ * first.rotation_;
    q.normalize();
    return Pose(q, rotation_ * first.translation_ + translation_);
}

Vec3 unproject(const Vec2& u, const Vec2& delta, double depth, const CameraIntrinsics& K) {
    if (!(depth > 0.0)) {
        throw DomainError("unproject requires positive depth, got " + std::to_string(depth));
    }
    const double rx = u.x() - K.cx + delta.x();
    const double ry = u.y() - K.cy + delta.y();
    return {rx * depth / K.fx, ry * depth / K.fy, depth};
}

Vec3 transform_point(const Vec3& p, const Pose& pose) { return pose.apply(p); }

std::optional<Projection> project(const Vec3& p, const CameraIntrinsics& K) {
    if (!(p.z() > 0.0)) {
        return std::nullopt;
    }
    const double inv_z = 1.0 / p.z();
    return Projection{{K.fx * p.x() * inv_z + K.cx, K.fy * p.y() * inv_z + K.cy}, p.z()};
}

}  // namespace splat4d
