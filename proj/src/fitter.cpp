// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/fitter.hpp"

#include "splat4d/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace splat4d {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;
constexpr double kInitialDepthStep = 0.01;
constexpr double kMinLayerDepth = 0.02;

void require_image(const Image& img, int w, int h, int c, const std::string& what) {
    if (img.width != w || img.height != h || img.channels != c) {
        throw ShapeError(what + " must be " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                         std::to_string(c));
    }
}

void check_pose_time(const SupervisionFrame& f, const std::string& what) {
    if (!std::isfinite(f.time) || f.time < 0.0) {
        throw DomainError(what + " time must be finite and >= 0");
    }
}

struct View {
    const Image* rgb;
    const Image* depth;
    Pose pose;
    double time;
};

bool same_view(const Pose& a, double ta, const Pose& b, double tb) {
    return ta == tb && a.wxyz() == b.wxyz() && a.translation() == b.translation();
}

std::string describe_index(const SplatMap& map, std::size_t i) {
    const std::size_t plane = map.pixel_count();
    const std::size_t pixel = i % plane;
    const std::size_t lc = i / plane;
    const int channel = static_cast<int>(lc % kChannelCount);
    const int layer = static_cast<int>(lc / kChannelCount);
    return "channel '" + std::string(channel_name(channel_at(channel))) + "' at pixel (" +
           std::to_string(pixel % map.width) + ", " + std::to_string(pixel / map.width) + ") layer " +
           std::to_string(layer);
}

void project_constraints(const SplatMap& map, std::vector<double>& theta) {
    const std::size_t plane = map.pixel_count();
    for (int l = 0; l < map.layers; ++l) {
        for (int c = 0; c < 3; ++c) {
            const std::size_t base = map.index(l, Channel::ColorR + c, 0, 0);
            for (std::size_t p = 0; p < plane; ++p) {
                theta[base + p] = std::clamp(theta[base + p], -1.0, 1.0);
            }
        }
    }
    for (std::size_t p = 0; p < plane; ++p) {
        double depth = map.base_depth[p];
        for (int l = 0; l < map.layers; ++l) {
            double& delta = theta[map.index(l, Channel::DepthOffset, 0, 0) + p];
            if (depth + delta < kMinLayerDepth) {
                delta = kMinLayerDepth - depth;
            }
            depth += delta;
        }
    }
}

void store(SplatMap& map, const std::vector<double>& theta) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        map.params[i] = static_cast<float>(theta[i]);
    }
}

MetricsRecord frame_metrics(const SupervisionFrame& f, const RenderOutput& out, const RenderSettings& s) {
    return metrics(f.rgb, out.rgb, &f.depth, &out.depth, s.far_sentinel);
}

}  // namespace

double LearningRates::for_channel(Channel c) const {
    switch (c) {
    case Channel::DepthOffset:
        return depth_offset;
    case Channel::OffsetX:
    case Channel::OffsetY:
        return xy_offset;
    case Channel::RotationW:
    case Channel::RotationX:
    case Channel::RotationY:
    case Channel::RotationZ:
        return rotation;
    case Channel::LogScaleX:
    case Channel::LogScaleY:
    case Channel::LogScaleZ:
        return log_scale;
    case Channel::Opacity:
        return opacity;
    case Channel::ColorR:
    case Channel::ColorG:
    case Channel::ColorB:
        return color;
    case Channel::AccelerationX:
    case Channel::AccelerationY:
    case Channel::AccelerationZ:
        return acceleration;
    default:
        return motion;
    }
}

void FitProblem::validate() const {
    intrinsics.validate();
    const int w = intrinsics.width;
    const int h = intrinsics.height;
    require_image(input_rgb, w, h, 3, "input rgb");
    require_image(input_depth, w, h, 1, "input depth");
    if (mask.width != w || mask.height != h || mask.labels.size() != static_cast<std::size_t>(w) * h) {
        throw ShapeError("mask must match the input frame size");
    }
    for (const SupervisionFrame* f : {&future, &intermediate}) {
        require_image(f->rgb, w, h, 3, "supervision rgb");
        require_image(f->depth, w, h, 1, "supervision depth");
    }
    check_pose_time(future, "future");
    check_pose_time(intermediate, "intermediate");
    if (!(future.time > 0.0)) {
        throw DomainError("T must be positive");
    }
    if (!(intermediate.time < future.time)) {
        throw DomainError("t_r must be smaller than T");
    }
    if (layers < 1) {
        throw DomainError("layers must be >= 1");
    }
    if (iterations < 0) {
        throw DomainError("iterations must be >= 0");
    }
    if (!(velocity_prior_scale > 0.0)) {
        throw DomainError("velocity prior scale must be positive");
    }
    if (!(velocity_jitter >= 0.0)) {
        throw DomainError("velocity jitter must be >= 0");
    }
    if (!(learning_rates.cosine_floor >= 0.0 && learning_rates.cosine_floor <= 1.0)) {
        throw DomainError("cosine floor must be in [0, 1]");
    }
    weights.validate();
}

SplatMap init_splat_map(const Image& rgb, const Image& depth, const LabelMap& mask, const CameraIntrinsics& K,
                        int layers) {
    K.validate();
    if (layers < 1) {
        throw DomainError("layers must be >= 1");
    }
    require_image(rgb, K.width, K.height, 3, "input rgb");
    require_image(depth, K.width, K.height, 1, "input depth");
    if (mask.width != K.width || mask.height != K.height) {
        throw ShapeError("mask must match the input frame size");
    }
    SplatMap map(K.width, K.height, layers);
    const double footprint = std::max(1.0 / K.fx, 1.0 / K.fy);
    const float logit_front = static_cast<float>(opacity_logit(0.5));
    const float logit_back = static_cast<float>(opacity_logit(0.1));
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const double d = depth.at(x, y);
            if (!(d > 0.0) || !std::isfinite(d)) {
                throw DomainError("input depth must be positive at (" + std::to_string(x) + ", " +
                                  std::to_string(y) + ")");
            }
            map.depth_at(x, y) = static_cast<float>(d);
            map.id_at(x, y) = mask.at(x, y);
            for (int l = 0; l < layers; ++l) {
                map.at(l, Channel::DepthOffset, x, y) = static_cast<float>(kInitialDepthStep);
                const float log_scale = static_cast<float>(std::log((d + kInitialDepthStep * (l + 1)) * footprint));
                for (int a = 0; a < 3; ++a) {
                    map.at(l, Channel::LogScaleX + a, x, y) = log_scale;
                    const double c = std::clamp(rgb.at(x, y, a), 0.0, 1.0);
                    map.at(l, Channel::ColorR + a, x, y) = static_cast<float>(2.0 * c - 1.0);
                }
                map.at(l, Channel::Opacity, x, y) = l == 0 ? logit_front : logit_back;
            }
        }
    }
    return map;
}

ObjectiveEvaluation evaluate_objective(const SplatMap& map, const FitProblem& problem, bool with_gradient) {
    const CameraIntrinsics& K = problem.intrinsics;
    const LossWeights& w = problem.weights;
    const SplatSet splats = decode(map, K);

    ObjectiveEvaluation eval;
    eval.motion = problem.fixed_motion ? *problem.fixed_motion : aggregate(splats);

    // Input view, t + t_r, t + T. The t_r render is shared with the input view when they coincide.
    const View views[3] = {
        {&problem.input_rgb, &problem.input_depth, Pose::identity(), 0.0},
        {&problem.intermediate.rgb, &problem.intermediate.depth, problem.intermediate.pose, problem.intermediate.time},
        {&problem.future.rgb, &problem.future.depth, problem.future.pose, problem.future.time},
    };
    const bool shared = same_view(views[0].pose, views[0].time, views[1].pose, views[1].time);

    std::vector<SplatSet> moved;
    moved.reserve(3);
    std::vector<RenderPass> passes;
    passes.reserve(3);
    for (int v = 0; v < 3; ++v) {
        if (v == 1 && shared) {
            continue;
        }
        moved.push_back(propagate(splats, eval.motion, views[v].time));
        passes.emplace_back(moved.back(), views[v].pose, K, problem.render);
    }
    const RenderPass& input_pass = passes[0];
    const RenderPass& mid_pass = shared ? passes[0] : passes[1];
    const RenderPass& future_pass = passes.back();
    const RenderOutput& in = input_pass.output();
    const RenderOutput& mid = mid_pass.output();
    const RenderOutput& fut = future_pass.output();

    const double far = problem.render.far_sentinel;
    const PixelMask valid_mid = depth_valid_mask(problem.intermediate.depth, far);
    const PixelMask valid_fut = depth_valid_mask(problem.future.depth, far);
    const bool any_mid = std::ranges::any_of(valid_mid, [](unsigned char b) { return b != 0; });
    const bool any_fut = std::ranges::any_of(valid_fut, [](unsigned char b) { return b != 0; });

    const ValueAndGradient d_fut = image_distance_with_gradient(problem.future.rgb, fut.rgb);
    const ValueAndGradient d_mid = image_distance_with_gradient(problem.intermediate.rgb, mid.rgb);
    ValueAndGradient m_fut{0.0, std::vector<double>(fut.depth.size(), 0.0)};
    ValueAndGradient m_mid{0.0, std::vector<double>(mid.depth.size(), 0.0)};
    if (any_fut) {
        m_fut = mean_relative_error_with_gradient(problem.future.depth, fut.depth, w.depth_clamp, valid_fut);
    }
    if (any_mid) {
        m_mid = mean_relative_error_with_gradient(problem.intermediate.depth, mid.depth, w.depth_clamp, valid_mid);
    }
    const RgbDiffGradient diff = loss_rgb_diff_with_gradient(problem.future.rgb, problem.input_rgb, fut.rgb, in.rgb);

    const double prior2 = problem.velocity_prior_scale * problem.velocity_prior_scale;
    double kl = 0.0;
    if (!problem.fixed_motion) {
        for (const auto& [id, m] : eval.motion) {
            if (id != kStaticObject) {
                kl += 0.5 * (m.linear_velocity.squaredNorm() + m.angular_velocity.squaredNorm()) / prior2;
            }
        }
    }

    eval.parts.rgb = w.lambda1 * d_fut.value + (1.0 - w.lambda1) * d_mid.value;
    eval.parts.depth = w.lambda2 * m_fut.value + (1.0 - w.lambda2) * m_mid.value;
    eval.parts.rgb_diff = diff.value;
    eval.parts.kl = kl;
    eval.loss = total_loss(eval.parts, w);
    eval.input_render = in;
    eval.intermediate_render = mid;
    eval.future_render = fut;
    if (!with_gradient) {
        return eval;
    }

    // Upstream image gradients per pass.
    const std::size_t n_rgb = in.rgb.size();
    const std::size_t n_px = in.depth.size();
    std::vector<std::vector<double>> g_rgb(passes.size(), std::vector<double>(n_rgb, 0.0));
    std::vector<std::vector<double>> g_depth(passes.size(), std::vector<double>(n_px, 0.0));
    const std::size_t mid_slot = shared ? 0 : 1;
    const std::size_t fut_slot = passes.size() - 1;
    for (std::size_t i = 0; i < n_rgb; ++i) {
        g_rgb[fut_slot][i] += w.rgb * w.lambda1 * d_fut.grad[i] + w.rgb_diff * diff.grad_future_pred[i];
        g_rgb[mid_slot][i] += w.rgb * (1.0 - w.lambda1) * d_mid.grad[i];
        g_rgb[0][i] += w.rgb_diff * diff.grad_input_pred[i];
    }
    for (std::size_t i = 0; i < n_px; ++i) {
        g_depth[fut_slot][i] += w.depth * w.lambda2 * m_fut.grad[i];
        g_depth[mid_slot][i] += w.depth * (1.0 - w.lambda2) * m_mid.grad[i];
    }

    std::vector<SplatGradient> grads(splats.size());
    MotionGradients motion_grads;
    std::size_t slot = 0;
    for (int v = 0; v < 3; ++v) {
        if (v == 1 && shared) {
            continue;
        }
        const RenderGradients rg = passes[slot].backward(g_rgb[slot], g_depth[slot]);
        const PropagateGradients pg = propagate_backward(splats, eval.motion, views[v].time, rg.splats);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            grads[i] += pg.splats[i];
        }
        for (const auto& [id, g] : pg.motion) {
            ObjectMotionGradient& acc = motion_grads[id];
            acc.centroid += g.centroid;
            acc.linear_velocity += g.linear_velocity;
            acc.linear_acceleration += g.linear_acceleration;
            acc.angular_velocity += g.angular_velocity;
            acc.angular_acceleration += g.angular_acceleration;
        }
        ++slot;
    }

    if (!problem.fixed_motion) {
        for (const auto& [id, m] : eval.motion) {
            if (id == kStaticObject) {
                continue;
            }
            ObjectMotionGradient& acc = motion_grads[id];
            acc.linear_velocity += (w.kl / prior2) * m.linear_velocity;
            acc.angular_velocity += (w.kl / prior2) * m.angular_velocity;
        }
        motion_grads.erase(kStaticObject);
        aggregate_backward(splats, motion_grads, grads);
    }

    eval.gradient = decode_backward(map, K, grads);
    return eval;
}

FitResult fit(const FitProblem& problem) {
    problem.validate();
    SplatMap map = init_splat_map(problem.input_rgb, problem.input_depth, problem.mask, problem.intrinsics,
                                  problem.layers);
    if (problem.velocity_jitter > 0.0 && problem.iterations > 0) {
        std::mt19937_64 rng(problem.seed);
        std::normal_distribution<double> normal(0.0, problem.velocity_jitter);
        for (int l = 0; l < map.layers; ++l) {
            for (int y = 0; y < map.height; ++y) {
                for (int x = 0; x < map.width; ++x) {
                    for (int a = 0; a < 3; ++a) {
                        const double n = normal(rng);
                        if (map.id_at(x, y) != kStaticObject) {
                            map.at(l, Channel::VelocityX + a, x, y) = static_cast<float>(n);
                        }
                    }
                }
            }
        }
    }
    return fit_from(problem, std::move(map));
}

FitResult fit_from(const FitProblem& problem, SplatMap initial) {
    problem.validate();
    const auto start = std::chrono::steady_clock::now();
    initial.validate();
    if (initial.width != problem.intrinsics.width || initial.height != problem.intrinsics.height) {
        throw ShapeError("initial splat map does not match the intrinsics");
    }

    SplatMap map = initial;
    std::vector<double> theta(map.params.begin(), map.params.end());
    std::vector<double> m1(theta.size(), 0.0);
    std::vector<double> m2(theta.size(), 0.0);
    std::vector<double> rate(theta.size());
    const std::size_t plane = map.pixel_count();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        rate[i] = problem.learning_rates.for_channel(channel_at(static_cast<int>((i / plane) % kChannelCount)));
    }

    FitResult result;
    FitReport& report = result.report;
    report.loss_trace.reserve(problem.iterations);
    SplatMap best = map;
    double best_loss = 0.0;

    const int iters = problem.iterations;
    double b1 = 1.0;
    double b2 = 1.0;
    for (int it = 0; it < iters; ++it) {
        const ObjectiveEvaluation eval = evaluate_objective(map, problem, true);
        if (!std::isfinite(eval.loss)) {
            std::string where = "no non-finite gradient entry";
            for (std::size_t i = 0; i < eval.gradient.size(); ++i) {
                if (!std::isfinite(eval.gradient[i])) {
                    where = "first non-finite gradient in " + describe_index(map, i);
                    break;
                }
            }
            throw FitError("non-finite loss at iteration " + std::to_string(it) + "; " + where);
        }
        for (std::size_t i = 0; i < eval.gradient.size(); ++i) {
            if (!std::isfinite(eval.gradient[i])) {
                throw FitError("non-finite gradient at iteration " + std::to_string(it) + " in " +
                               describe_index(map, i));
            }
        }
        report.loss_trace.push_back(eval.loss);
        if (it == 0) {
            report.initial_loss = eval.loss;
        }
        if (it == 0 || eval.loss < best_loss) {
            best_loss = eval.loss;
            best = map;
            report.best_iteration = it;
        }
        report.best_loss_trace.push_back(best_loss);

        const double progress = iters > 1 ? static_cast<double>(it) / (iters - 1) : 0.0;
        const double floor = problem.learning_rates.cosine_floor;
        const double decay = floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        b1 *= kAdamBeta1;
        b2 *= kAdamBeta2;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = eval.gradient[i];
            m1[i] = kAdamBeta1 * m1[i] + (1.0 - kAdamBeta1) * g;
            m2[i] = kAdamBeta2 * m2[i] + (1.0 - kAdamBeta2) * g * g;
            const double mhat = m1[i] / (1.0 - b1);
            const double vhat = m2[i] / (1.0 - b2);
            theta[i] -= rate[i] * decay * mhat / (std::sqrt(vhat) + kAdamEpsilon);
        }
        project_constraints(map, theta);
        store(map, theta);
    }

    // The iterate after the last update has not been scored yet.
    const ObjectiveEvaluation last = evaluate_objective(map, problem, false);
    if (iters == 0) {
        report.initial_loss = last.loss;
        best_loss = last.loss;
        report.best_iteration = 0;
    } else if (std::isfinite(last.loss) && last.loss < best_loss) {
        best_loss = last.loss;
        best = map;
        report.best_iteration = iters;
    }
    report.best_loss = best_loss;
    report.iterations = iters;

    const ObjectiveEvaluation final_eval = evaluate_objective(best, problem, false);
    report.intermediate_metrics = frame_metrics(problem.intermediate, final_eval.intermediate_render, problem.render);
    report.future_metrics = frame_metrics(problem.future, final_eval.future_render, problem.render);
    result.motion = final_eval.motion;
    result.map = std::move(best);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

MotionTable sample_motion(const MotionTable& table, const MotionPriorScale& prior_scale, std::uint64_t seed) {
    for (int a = 0; a < 3; ++a) {
        if (!(prior_scale.linear[a] >= 0.0) || !(prior_scale.angular[a] >= 0.0)) {
            throw DomainError("prior scale must be >= 0");
        }
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MotionTable out = table;
    for (const auto& [id, m] : table) {
        if (id == kStaticObject) {
            continue;
        }
        ObjectMotion s = m;
        for (int a = 0; a < 3; ++a) {
            s.linear_velocity[a] += prior_scale.linear[a] * normal(rng);
        }
        for (int a = 0; a < 3; ++a) {
            s.angular_velocity[a] += prior_scale.angular[a] * normal(rng);
        }
        out.set(s);
    }
    return out;
}

}  // namespace splat4d
