// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/splat_model.hpp"

#include "splat4d/error.hpp"

#include <cmath>
#include <string>

namespace splat4d {

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "depth_offset", "offset_x",       "offset_y",       "rotation_w",     "rotation_x",
    "rotation_y",   "rotation_z",     "log_scale_x",    "log_scale_y",    "log_scale_z",
    "opacity",      "color_r",        "color_g",        "color_b",        "velocity_x",
    "velocity_y",   "velocity_z",     "acceleration_x", "acceleration_y", "acceleration_z",
};

std::string where(int x, int y, int layer) {
    return "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") layer " + std::to_string(layer);
}

}  // namespace

std::string_view channel_name(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

SplatMap::SplatMap(int w, int h, int n)
    : width(w), height(h), layers(n),
      base_depth(static_cast<std::size_t>(w) * h, 1.0f),
      object_id(static_cast<std::size_t>(w) * h, 0),
      params(static_cast<std::size_t>(n) * kChannelCount * w * h, 0.0f) {
    for (int l = 0; l < n; ++l) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                at(l, Channel::RotationW, x, y) = 1.0f;
            }
        }
    }
}

void SplatMap::validate() const {
    if (width <= 0 || height <= 0 || layers <= 0) {
        throw DecodeError("splat map dimensions must be positive");
    }
    if (base_depth.size() != pixel_count() || object_id.size() != pixel_count() ||
        params.size() != pixel_count() * kChannelCount * static_cast<std::size_t>(layers)) {
        throw DecodeError("splat map planes do not match its H x W x N shape");
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const float d = depth_at(x, y);
            if (!(d > 0.0f) || !std::isfinite(d)) {
                throw DecodeError("base depth must be positive and finite at " + where(x, y, 0));
            }
        }
    }
    for (int l = 0; l < layers; ++l) {
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const float v = at(l, Channel::ColorR + c, x, y);
                    if (!(v >= -1.0f && v <= 1.0f)) {
                        throw DecodeError("color outside [-1, 1] at " + where(x, y, l));
                    }
                }
            }
        }
    }
}

SplatGradient& SplatGradient::operator+=(const SplatGradient& o) {
    mean += o.mean;
    rotation += o.rotation;
    scale += o.scale;
    opacity += o.opacity;
    color += o.color;
    velocity += o.velocity;
    acceleration += o.acceleration;
    return *this;
}

double opacity_activation(double raw) {
    const double s = 1.0 / (1.0 + std::exp(-raw));
    return s > 1.0 - 1e-7 ? 1.0 : s;
}

double opacity_logit(double opacity) { return std::log(opacity / (1.0 - opacity)); }

SplatSet decode(const SplatMap& map, const CameraIntrinsics& K) {
    map.validate();
    K.validate();

    for (int l = 0; l < map.layers; ++l) {
        for (int c = 0; c < kChannelCount; ++c) {
            for (int y = 0; y < map.height; ++y) {
                for (int x = 0; x < map.width; ++x) {
                    if (std::isnan(map.at(l, channel_at(c), x, y))) {
                        throw DecodeError("NaN in channel '" + std::string(channel_name(channel_at(c))) +
                                          "' at " + where(x, y, l));
                    }
                }
            }
        }
    }

    SplatSet out;
    out.intrinsics = K;
    out.splats.resize(map.pixel_count() * static_cast<std::size_t>(map.layers));

    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            double depth = map.depth_at(x, y);
            for (int l = 0; l < map.layers; ++l) {
                depth += map.at(l, Channel::DepthOffset, x, y);
                if (!(depth > 0.0)) {
                    throw DecodeError("non-positive layer depth " + std::to_string(depth) + " at " +
                                      where(x, y, l));
                }
                Splat& s = out.splats[splat_index(map, x, y, l)];
                const Vec2 offset(map.at(l, Channel::OffsetX, x, y), map.at(l, Channel::OffsetY, x, y));
                s.mean = unproject(Vec2(x, y), offset, depth, K);

                Quat q(map.at(l, Channel::RotationW, x, y), map.at(l, Channel::RotationX, x, y),
                       map.at(l, Channel::RotationY, x, y), map.at(l, Channel::RotationZ, x, y));
                const double qn = q.norm();
                if (!(qn > 1e-12)) {
                    throw DecodeError("degenerate rotation quaternion at " + where(x, y, l));
                }
                s.rotation = Quat(q.coeffs() / qn);

                for (int i = 0; i < 3; ++i) {
                    s.scale[i] = std::exp(static_cast<double>(map.at(l, Channel::LogScaleX + i, x, y)));
                    s.color[i] = map.at(l, Channel::ColorR + i, x, y);
                    s.velocity[i] = map.at(l, Channel::VelocityX + i, x, y);
                    s.acceleration[i] = map.at(l, Channel::AccelerationX + i, x, y);
                }
                s.opacity = opacity_activation(map.at(l, Channel::Opacity, x, y));
                s.object_id = map.id_at(x, y);
            }
        }
    }
    return out;
}

std::vector<double> decode_backward(const SplatMap& map, const CameraIntrinsics& K,
                                    std::span<const SplatGradient> grads) {
    if (grads.size() != map.pixel_count() * static_cast<std::size_t>(map.layers)) {
        throw ShapeError("decode_backward: gradient count does not match the splat map");
    }
    std::vector<double> out(map.params.size(), 0.0);
    std::vector<double> depths(static_cast<std::size_t>(map.layers));

    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            double depth = map.depth_at(x, y);
            for (int l = 0; l < map.layers; ++l) {
                depth += map.at(l, Channel::DepthOffset, x, y);
                depths[l] = depth;
            }
            double depth_grad_suffix = 0.0;
            for (int l = map.layers - 1; l >= 0; --l) {
                const SplatGradient& g = grads[splat_index(map, x, y, l)];
                const double rx = x - K.cx + map.at(l, Channel::OffsetX, x, y);
                const double ry = y - K.cy + map.at(l, Channel::OffsetY, x, y);
                const double d = depths[l];

                depth_grad_suffix += g.mean.x() * rx / K.fx + g.mean.y() * ry / K.fy + g.mean.z();
                out[map.index(l, Channel::DepthOffset, x, y)] = depth_grad_suffix;
                out[map.index(l, Channel::OffsetX, x, y)] = g.mean.x() * d / K.fx;
                out[map.index(l, Channel::OffsetY, x, y)] = g.mean.y() * d / K.fy;

                Vec4 r;
                for (int i = 0; i < 4; ++i) {
                    r[i] = map.at(l, Channel::RotationW + i, x, y);
                }
                const double rn = r.norm();
                const Vec4 q = r / rn;
                const Vec4 gr = (g.rotation - q * q.dot(g.rotation)) / rn;
                for (int i = 0; i < 4; ++i) {
                    out[map.index(l, Channel::RotationW + i, x, y)] = gr[i];
                }

                for (int i = 0; i < 3; ++i) {
                    const double scale = std::exp(static_cast<double>(map.at(l, Channel::LogScaleX + i, x, y)));
                    out[map.index(l, Channel::LogScaleX + i, x, y)] = g.scale[i] * scale;
                    out[map.index(l, Channel::ColorR + i, x, y)] = g.color[i];
                    out[map.index(l, Channel::VelocityX + i, x, y)] = g.velocity[i];
                    out[map.index(l, Channel::AccelerationX + i, x, y)] = g.acceleration[i];
                }
                const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(map.at(l, Channel::Opacity, x, y))));
                out[map.index(l, Channel::Opacity, x, y)] = g.opacity * sig * (1.0 - sig);
            }
        }
    }
    return out;
}

Mat3 quaternion_matrix(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 quaternion_matrix_backward(const Vec4& q, const Mat3& G) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 g;
    g[0] = 2 * (-z * G(0, 1) + y * G(0, 2) + z * G(1, 0) - x * G(1, 2) - y * G(2, 0) + x * G(2, 1));
    g[1] = 2 * (y * G(0, 1) + z * G(0, 2) + y * G(1, 0) - 2 * x * G(1, 1) - w * G(1, 2) + z * G(2, 0) +
                w * G(2, 1) - 2 * x * G(2, 2));
    g[2] = 2 * (-2 * y * G(0, 0) + x * G(0, 1) + w * G(0, 2) + x * G(1, 0) + z * G(1, 2) - w * G(2, 0) +
                z * G(2, 1) - 2 * y * G(2, 2));
    g[3] = 2 * (-2 * z * G(0, 0) - w * G(0, 1) + x * G(0, 2) + w * G(1, 0) - 2 * z * G(1, 1) + y * G(1, 2) +
                x * G(2, 0) + y * G(2, 1));
    return g;
}

Mat3 covariance(const Quat& rotation, const Vec3& scale) {
    const Mat3 M = rotation.toRotationMatrix() * scale.asDiagonal();
    return M * M.transpose();
}

}  // namespace splat4d
