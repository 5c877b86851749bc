// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/rasterizer.hpp"

#include "splat4d/error.hpp"
#include "splat4d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splat4d {

namespace {

struct Projected {
    bool visible = false;
    bool degenerate = false;
    Vec3 view = Vec3::Zero();   // view-space mean
    Vec2 center = Vec2::Zero(); // pixel coordinates
    Mat3 view_cov = Mat3::Zero();
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
    Mat2 conic = Mat2::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();  // [0, 1]
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;

    bool covers(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// Screen-space partials accumulated per splat during the backward pass.
struct ScreenGradient {
    double u = 0.0, v = 0.0;
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    double opacity = 0.0;
    double depth = 0.0;
    Vec3 color = Vec3::Zero();

    ScreenGradient& operator+=(const ScreenGradient& o) {
        u += o.u;
        v += o.v;
        conic_a += o.conic_a;
        conic_b += o.conic_b;
        conic_c += o.conic_c;
        opacity += o.opacity;
        depth += o.depth;
        color += o.color;
        return *this;
    }
};

Projected project_splat(const Splat& s, const Mat3& W, const Vec3& t, const CameraIntrinsics& K,
                        int width, int height) {
    Projected p;
    p.view = W * s.mean + t;
    const double z = p.view.z();
    if (!(z >= kNearPlane)) {
        return p;
    }
    const double x = p.view.x();
    const double y = p.view.y();
    p.jacobian << K.fx / z, 0.0, -K.fx * x / (z * z),
                  0.0, K.fy / z, -K.fy * y / (z * z);
    p.view_cov = W * covariance(s.rotation, s.scale) * W.transpose();
    Mat2 cov2 = p.jacobian * p.view_cov * p.jacobian.transpose();
    cov2(0, 0) += kScreenDilation;
    cov2(1, 1) += kScreenDilation;
    cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));

    const double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
    if (!(det > 0.0) || !std::isfinite(det)) {
        p.degenerate = true;
        return p;
    }
    p.conic << cov2(1, 1) / det, -cov2(0, 1) / det,
               -cov2(0, 1) / det, cov2(0, 0) / det;

    if (!(s.opacity > kFootprintAlpha)) {
        return p;
    }
    const double extent = std::max(3.0, std::sqrt(2.0 * std::log(s.opacity / kFootprintAlpha)));
    p.center = {K.fx * x / z + K.cx, K.fy * y / z + K.cy};
    const double rx = extent * std::sqrt(cov2(0, 0));
    const double ry = extent * std::sqrt(cov2(1, 1));
    const double fx0 = std::ceil(p.center.x() - rx);
    const double fx1 = std::floor(p.center.x() + rx);
    const double fy0 = std::ceil(p.center.y() - ry);
    const double fy1 = std::floor(p.center.y() + ry);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > width - 1 || fy0 > height - 1) {
        return p;
    }
    p.x0 = static_cast<int>(std::max(fx0, 0.0));
    p.x1 = static_cast<int>(std::min(fx1, static_cast<double>(width - 1)));
    p.y0 = static_cast<int>(std::max(fy0, 0.0));
    p.y1 = static_cast<int>(std::min(fy1, static_cast<double>(height - 1)));
    p.opacity = s.opacity;
    p.color = 0.5 * (s.color + Vec3::Ones());
    p.visible = true;
    return p;
}

// alpha of splat p at pixel (x, y); sets `gaussian` to exp(power). Returns < 0 when
// the pixel lies outside the footprint or the exponent is positive.
double splat_alpha(const Projected& p, int x, int y, double& dx, double& dy, double& gaussian, bool& clamped) {
    if (!p.covers(x, y)) {
        return -1.0;
    }
    dx = x - p.center.x();
    dy = y - p.center.y();
    const double power = -0.5 * (p.conic(0, 0) * dx * dx + 2.0 * p.conic(0, 1) * dx * dy + p.conic(1, 1) * dy * dy);
    if (power > 0.0) {
        return -1.0;
    }
    gaussian = std::exp(power);
    const double a = p.opacity * gaussian;
    clamped = a > 1.0 - kAlphaClamp;
    return clamped ? 1.0 - kAlphaClamp : a;
}

class TiledFrame {
public:
    TiledFrame(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K, const RenderSettings& settings)
        : splats_(splats), K_(K), settings_(settings), width_(K.width), height_(K.height) {
        K.validate();
        W_ = pose.rotation_matrix();
        t_ = pose.translation();
        tiles_x_ = (width_ + kTileSize - 1) / kTileSize;
        tiles_y_ = (height_ + kTileSize - 1) / kTileSize;

        const std::size_t n = splats.splats.size();
        projected_.resize(n);
        parallel_for(n, settings.threads, [&](std::size_t i) {
            projected_[i] = project_splat(splats.splats[i], W_, t_, K, width_, height_);
        });

        std::vector<std::size_t> order;
        order.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (projected_[i].visible) {
                order.push_back(i);
            } else if (projected_[i].degenerate) {
                ++diagnostics_.degenerate;
            } else {
                ++diagnostics_.culled;
            }
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double za = projected_[a].view.z();
            const double zb = projected_[b].view.z();
            return za < zb || (za == zb && a < b);
        });

        tile_lists_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y_);
        for (const std::size_t i : order) {
            const Projected& p = projected_[i];
            for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty) {
                for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx) {
                    tile_lists_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(i);
                }
            }
        }

        out_.rgb = Image(width_, height_, 3);
        out_.depth = Image(width_, height_, 1);
        out_.alpha = Image(width_, height_, 1);
        out_.diagnostics = diagnostics_;
        final_transmittance_.assign(static_cast<std::size_t>(width_) * height_, 1.0);
        contributors_.assign(static_cast<std::size_t>(width_) * height_, 0);
        depth_sum_.assign(static_cast<std::size_t>(width_) * height_, 0.0);
    }

    void forward() {
        parallel_for(tile_lists_.size(), settings_.threads, [&](std::size_t tile) { forward_tile(tile); });
    }

    RenderGradients backward(std::span<const double> d_rgb, std::span<const double> d_depth) const {
        std::vector<std::vector<ScreenGradient>> tile_grads(tile_lists_.size());
        parallel_for(tile_lists_.size(), settings_.threads, [&](std::size_t tile) {
            tile_grads[tile].assign(tile_lists_[tile].size(), ScreenGradient{});
            backward_tile(tile, d_rgb, d_depth, tile_grads[tile]);
        });

        std::vector<ScreenGradient> screen(splats_.splats.size());
        for (std::size_t tile = 0; tile < tile_lists_.size(); ++tile) {
            const auto& list = tile_lists_[tile];
            for (std::size_t k = 0; k < list.size(); ++k) {
                screen[list[k]] += tile_grads[tile][k];
            }
        }

        RenderGradients grads;
        grads.splats.resize(splats_.splats.size());
        parallel_for(splats_.splats.size(), settings_.threads, [&](std::size_t i) {
            if (projected_[i].visible) {
                grads.splats[i] = splat_backward(splats_.splats[i], projected_[i], screen[i]);
            }
        });
        return grads;
    }

    const RenderOutput& output() const { return out_; }

private:
    void forward_tile(std::size_t tile) {
        const auto& list = tile_lists_[tile];
        const int tx = static_cast<int>(tile % tiles_x_);
        const int ty = static_cast<int>(tile / tiles_x_);
        const int x_end = std::min(width_, (tx + 1) * kTileSize);
        const int y_end = std::min(height_, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y_end; ++y) {
            for (int x = tx * kTileSize; x < x_end; ++x) {
                double T = 1.0;
                Vec3 C = Vec3::Zero();
                double Z = 0.0;
                int last = 0;
                for (std::size_t k = 0; k < list.size(); ++k) {
                    const Projected& p = projected_[list[k]];
                    double dx, dy, g;
                    bool clamped;
                    const double a = splat_alpha(p, x, y, dx, dy, g, clamped);
                    if (a < 0.0) {
                        continue;
                    }
                    const double w = a * T;
                    C += w * p.color;
                    Z += w * p.view.z();
                    T *= 1.0 - a;
                    last = static_cast<int>(k) + 1;
                    if (T < kTransmittanceCutoff) {
                        break;
                    }
                }
                const std::size_t pix = static_cast<std::size_t>(y) * width_ + x;
                const double A = 1.0 - T;
                for (int c = 0; c < 3; ++c) {
                    out_.rgb.data[pix * 3 + c] = C[c];
                }
                out_.alpha.data[pix] = A;
                out_.depth.data[pix] = A > settings_.alpha_floor ? Z / A : settings_.far_sentinel;
                final_transmittance_[pix] = T;
                contributors_[pix] = last;
                depth_sum_[pix] = Z;
            }
        }
    }

    void backward_tile(std::size_t tile, std::span<const double> d_rgb, std::span<const double> d_depth,
                       std::vector<ScreenGradient>& grads) const {
        const auto& list = tile_lists_[tile];
        const int tx = static_cast<int>(tile % tiles_x_);
        const int ty = static_cast<int>(tile / tiles_x_);
        const int x_end = std::min(width_, (tx + 1) * kTileSize);
        const int y_end = std::min(height_, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y_end; ++y) {
            for (int x = tx * kTileSize; x < x_end; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width_ + x;
                const Vec3 gC(d_rgb[pix * 3], d_rgb[pix * 3 + 1], d_rgb[pix * 3 + 2]);
                const double T_final = final_transmittance_[pix];
                const double A = 1.0 - T_final;
                double gZ = 0.0;
                double gA = 0.0;
                if (A > settings_.alpha_floor && d_depth[pix] != 0.0) {
                    gZ = d_depth[pix] / A;
                    gA = -d_depth[pix] * depth_sum_[pix] / (A * A);
                }
                if (gC.isZero(0.0) && gZ == 0.0 && gA == 0.0) {
                    continue;
                }

                double T = T_final;  // transmittance after the current splat
                Vec3 suffix_color = Vec3::Zero();
                double suffix_depth = 0.0;
                for (int k = contributors_[pix] - 1; k >= 0; --k) {
                    const Projected& p = projected_[list[static_cast<std::size_t>(k)]];
                    double dx, dy, g;
                    bool clamped;
                    const double a = splat_alpha(p, x, y, dx, dy, g, clamped);
                    if (a < 0.0) {
                        continue;
                    }
                    const double one_minus = 1.0 - a;
                    T /= one_minus;  // now T_k, transmittance before this splat
                    const double w = a * T;
                    const double z = p.view.z();

                    ScreenGradient& sg = grads[static_cast<std::size_t>(k)];
                    sg.color += w * gC;
                    sg.depth += w * gZ;

                    const double g_alpha = gC.dot(T * p.color - suffix_color / one_minus) +
                                           gZ * (T * z - suffix_depth / one_minus) +
                                           gA * T_final / one_minus;
                    suffix_color += w * p.color;
                    suffix_depth += w * z;

                    if (clamped) {
                        continue;
                    }
                    sg.opacity += g_alpha * g;
                    const double g_power = g_alpha * a;
                    sg.u += g_power * (p.conic(0, 0) * dx + p.conic(0, 1) * dy);
                    sg.v += g_power * (p.conic(0, 1) * dx + p.conic(1, 1) * dy);
                    sg.conic_a += -0.5 * g_power * dx * dx;
                    sg.conic_b += -g_power * dx * dy;
                    sg.conic_c += -0.5 * g_power * dy * dy;
                }
            }
        }
    }

    SplatGradient splat_backward(const Splat& s, const Projected& p, const ScreenGradient& sg) const {
        SplatGradient out;
        out.color = 0.5 * sg.color;
        out.opacity = sg.opacity;

        Mat2 g_conic;
        g_conic << sg.conic_a, 0.5 * sg.conic_b, 0.5 * sg.conic_b, sg.conic_c;
        const Mat2 g_cov2 = -p.conic * g_conic * p.conic;
        const Mat3 g_view_cov = p.jacobian.transpose() * g_cov2 * p.jacobian;
        const Eigen::Matrix<double, 2, 3> g_jac = 2.0 * g_cov2 * p.jacobian * p.view_cov;
        const Mat3 g_cov3 = W_.transpose() * g_view_cov * W_;

        const Vec4 q(s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z());
        const Mat3 R = quaternion_matrix(q);
        const Mat3 M = R * s.scale.asDiagonal();
        const Mat3 g_M = 2.0 * g_cov3 * M;
        const Mat3 g_R = g_M * s.scale.asDiagonal();
        for (int j = 0; j < 3; ++j) {
            out.scale[j] = g_M.col(j).dot(R.col(j));
        }
        out.rotation = quaternion_matrix_backward(q, g_R);

        const double x = p.view.x();
        const double y = p.view.y();
        const double z = p.view.z();
        const double z2 = z * z;
        const double z3 = z2 * z;
        Vec3 g_view;
        g_view.x() = sg.u * K_.fx / z + g_jac(0, 2) * (-K_.fx / z2);
        g_view.y() = sg.v * K_.fy / z + g_jac(1, 2) * (-K_.fy / z2);
        g_view.z() = -sg.u * K_.fx * x / z2 - sg.v * K_.fy * y / z2 + sg.depth +
                     g_jac(0, 0) * (-K_.fx / z2) + g_jac(0, 2) * (2.0 * K_.fx * x / z3) +
                     g_jac(1, 1) * (-K_.fy / z2) + g_jac(1, 2) * (2.0 * K_.fy * y / z3);
        out.mean = W_.transpose() * g_view;
        return out;
    }

    const SplatSet& splats_;
    CameraIntrinsics K_;
    RenderSettings settings_;
    int width_;
    int height_;
    int tiles_x_ = 0;
    int tiles_y_ = 0;
    Mat3 W_;
    Vec3 t_;
    std::vector<Projected> projected_;
    std::vector<std::vector<std::size_t>> tile_lists_;
    RenderDiagnostics diagnostics_;
    RenderOutput out_;
    std::vector<double> final_transmittance_;
    std::vector<int> contributors_;
    std::vector<double> depth_sum_;
};

void check_upstream_shape(const CameraIntrinsics& K, std::span<const double> d_rgb, std::span<const double> d_depth) {
    const std::size_t pixels = static_cast<std::size_t>(K.width) * K.height;
    if (d_rgb.size() != pixels * 3 || d_depth.size() != pixels) {
        throw ShapeError("render backward: upstream gradients do not match the image size");
    }
}

void check_upstream_finite(std::span<const double> d_rgb, std::span<const double> d_depth) {
    for (const double v : d_rgb) {
        if (!std::isfinite(v)) {
            throw DomainError("render backward: non-finite upstream rgb gradient");
        }
    }
    for (const double v : d_depth) {
        if (!std::isfinite(v)) {
            throw DomainError("render backward: non-finite upstream depth gradient");
        }
    }
}

}  // namespace

class RenderPass::Impl {
public:
    Impl(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K, const RenderSettings& settings)
        : frame(splats, pose, K, settings), intrinsics(K) {
        frame.forward();
    }
    TiledFrame frame;
    CameraIntrinsics intrinsics;
};

RenderPass::RenderPass(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K,
                       const RenderSettings& settings)
    : impl_(std::make_unique<Impl>(splats, pose, K, settings)) {}

RenderPass::~RenderPass() = default;
RenderPass::RenderPass(RenderPass&&) noexcept = default;
RenderPass& RenderPass::operator=(RenderPass&&) noexcept = default;

const RenderOutput& RenderPass::output() const { return impl_->frame.output(); }

RenderGradients RenderPass::backward(std::span<const double> d_rgb, std::span<const double> d_depth) const {
    check_upstream_shape(impl_->intrinsics, d_rgb, d_depth);
    return impl_->frame.backward(d_rgb, d_depth);
}

RenderOutput render(const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K,
                    const RenderSettings& settings) {
    RenderPass pass(splats, pose, K, settings);
    return pass.output();
}

std::pair<RenderOutput, RenderGradients> render_with_gradients(const SplatSet& splats, const Pose& pose,
                                                               const CameraIntrinsics& K,
                                                               std::span<const double> d_rgb,
                                                               std::span<const double> d_depth,
                                                               const RenderSettings& settings) {
    check_upstream_finite(d_rgb, d_depth);
    RenderPass pass(splats, pose, K, settings);
    RenderGradients grads = pass.backward(d_rgb, d_depth);
    return {pass.output(), std::move(grads)};
}

}  // namespace splat4d
