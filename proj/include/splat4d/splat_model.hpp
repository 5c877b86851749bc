// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Pixel-aligned splat parameter maps and their decoding into view-space splats.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace splat4d {

/// Raw per-layer channels of a SplatMap, in storage (and file) order.
enum class Channel : int {
    DepthOffset = 0,
    OffsetX,
    OffsetY,
    RotationW,
    RotationX,
    RotationY,
    RotationZ,
    LogScaleX,
    LogScaleY,
    LogScaleZ,
    Opacity,
    ColorR,
    ColorG,
    ColorB,
    VelocityX,
    VelocityY,
    VelocityZ,
    AccelerationX,
    AccelerationY,
    AccelerationZ,
};

inline constexpr int kChannelCount = 20;
inline constexpr int kDefaultLayers = 5;

std::string_view channel_name(Channel c);

inline Channel channel_at(int index) { return static_cast<Channel>(index); }
inline Channel operator+(Channel c, int offset) { return static_cast<Channel>(static_cast<int>(c) + offset); }

/// H x W x N raw splat parameters plus base depth and object labels.
///
/// Every channel is stored pre-activation: scales in log space, opacity as a logit,
/// rotation as an unnormalized quaternion. Colors are stored in [-1, 1].
/// Planes are layer-major, then channel, then row-major pixels.
struct SplatMap {
    int width = 0;
    int height = 0;
    int layers = 0;
    std::vector<float> base_depth;         ///< H*W, meters, > 0
    std::vector<std::int32_t> object_id;   ///< H*W, shared by all layers of a pixel
    std::vector<float> params;             ///< N * kChannelCount * H * W

    SplatMap() = default;

    /// Zero-initialized map with identity rotations, unit base depth and all-static labels.
    SplatMap(int width, int height, int layers = kDefaultLayers);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    std::size_t index(int layer, Channel c, int x, int y) const {
        return ((static_cast<std::size_t>(layer) * kChannelCount + static_cast<int>(c)) * height + y) * width + x;
    }
    float& at(int layer, Channel c, int x, int y) { return params[index(layer, c, x, y)]; }
    float at(int layer, Channel c, int x, int y) const { return params[index(layer, c, x, y)]; }

    float& depth_at(int x, int y) { return base_depth[static_cast<std::size_t>(y) * width + x]; }
    float depth_at(int x, int y) const { return base_depth[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t& id_at(int x, int y) { return object_id[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t id_at(int x, int y) const { return object_id[static_cast<std::size_t>(y) * width + x]; }

    /// Throws DecodeError on inconsistent sizes, non-positive base depth or colors outside [-1, 1].
    void validate() const;

    bool operator==(const SplatMap&) const = default;
};

struct Splat {
    Vec3 mean = Vec3::Zero();               ///< meters, view space of the input frame
    Quat rotation = Quat::Identity();       ///< unit
    Vec3 scale = Vec3::Ones();              ///< meters
    double opacity = 1.0;                   ///< (0, 1]
    Vec3 color = Vec3::Zero();              ///< [-1, 1]^3
    Vec3 velocity = Vec3::Zero();           ///< m/s
    Vec3 acceleration = Vec3::Zero();       ///< m/s^2
    std::int32_t object_id = 0;
};

struct SplatSet {
    std::vector<Splat> splats;
    CameraIntrinsics intrinsics;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
};

/// Partial derivatives of a scalar with respect to one splat's parameters.
/// `rotation` is with respect to the unit quaternion components (w, x, y, z).
struct SplatGradient {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 scale = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 acceleration = Vec3::Zero();

    SplatGradient& operator+=(const SplatGradient& o);
};

/// Opacity activation: logistic sigmoid, snapped to exactly 1 above 1 - 1e-7.
double opacity_activation(double raw);
double opacity_logit(double opacity);

/// Decodes a SplatMap into view-space splats.
///
/// Layer i of a pixel sits at depth d_E + sum_{k<=i} delta_k along the ray through
/// the pixel shifted by the layer's xy offset. Output order is row-major by pixel,
/// then by layer. Throws DecodeError on NaN input or a non-positive layer depth.
SplatSet decode(const SplatMap& map, const CameraIntrinsics& K);

/// Index of (pixel, layer) in the decoded SplatSet.
inline std::size_t splat_index(const SplatMap& map, int x, int y, int layer) {
    return (static_cast<std::size_t>(y) * map.width + x) * map.layers + layer;
}

/// Pulls per-splat gradients back onto the raw SplatMap channels. The result has the
/// layout of SplatMap::params. Base depth and object ids are not differentiated.
std::vector<double> decode_backward(const SplatMap& map, const CameraIntrinsics& K,
                                    std::span<const SplatGradient> grads);

/// Sigma = R diag(scale)^2 R^T.
Mat3 covariance(const Quat& rotation, const Vec3& scale);

/// Rotation matrix of a unit quaternion and the derivative of sum(G .* R) w.r.t. (w, x, y, z).
Mat3 quaternion_matrix(const Vec4& wxyz);
Vec4 quaternion_matrix_backward(const Vec4& wxyz, const Mat3& grad_matrix);

}  // namespace splat4d
