// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/error.hpp"
#include "splat4d/fitter.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace splat4d;

namespace {

FitProblem small_problem(int size) {
    const oracle::DynamicScene scene = oracle::two_object_scene(size);
    FitProblem p = oracle::scene_fit_problem(scene, 1.0, Pose(Quat::Identity(), Vec3(0.05, 0.0, 0.0)));
    p.layers = 1;
    return p;
}

double mean_channel(const SplatMap& m, Channel c, std::int32_t id) {
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (m.id_at(x, y) == id) {
                sum += m.at(0, c, x, y);
                ++n;
            }
        }
    }
    return sum / n;
}

}  // namespace

TEST(Init, UniformDepthLadder) {
    const auto K = CameraIntrinsics::centered(6, 4, 6.0);
    Image rgb(6, 4, 3, 0.25);
    Image depth(6, 4, 1, 5.0);
    const SplatMap m = init_splat_map(rgb, depth, LabelMap(6, 4), K, 3);
    const SplatSet s = decode(m, K);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) {
            EXPECT_NEAR(s.splats[splat_index(m, x, y, 0)].mean.z(), 5.01, 1e-6);
            EXPECT_NEAR(s.splats[splat_index(m, x, y, 1)].mean.z(), 5.02, 1e-6);
            EXPECT_NEAR(s.splats[splat_index(m, x, y, 2)].mean.z(), 5.03, 1e-6);
            for (int l = 0; l < 3; ++l) {
                const Splat& sp = s.splats[splat_index(m, x, y, l)];
                EXPECT_NEAR(sp.color.x(), -0.5, 1e-7);
                EXPECT_NEAR(sp.opacity, l == 0 ? 0.5 : 0.1, 1e-7);
                EXPECT_EQ(sp.velocity, Vec3::Zero());
                EXPECT_EQ(sp.acceleration, Vec3::Zero());
                EXPECT_NEAR(sp.rotation.angularDistance(Quat::Identity()), 0.0, 1e-12);
            }
        }
    }
}

TEST(Init, MaskSetsIdsAndAllZeroMaskIsStatic) {
    const auto K = CameraIntrinsics::centered(5, 5, 5.0);
    Image rgb(5, 5, 3, 0.5);
    Image depth(5, 5, 1, 2.0);
    const SplatMap still = init_splat_map(rgb, depth, LabelMap(5, 5), K, 2);
    const MotionTable t = aggregate(decode(still, K));
    EXPECT_EQ(t.size(), 1u);
    EXPECT_TRUE(t.contains(kStaticObject));

    LabelMap mask(5, 5);
    mask.at(1, 1) = 3;
    mask.at(4, 2) = 7;
    const SplatMap m = init_splat_map(rgb, depth, mask, K, 2);
    EXPECT_EQ(m.id_at(1, 1), 3);
    EXPECT_EQ(m.id_at(4, 2), 7);
    EXPECT_EQ(aggregate(decode(m, K)).size(), 3u);
}

TEST(Init, RejectsBadInputs) {
    const auto K = CameraIntrinsics::centered(5, 5, 5.0);
    Image rgb(5, 5, 3, 0.5);
    Image depth(5, 5, 1, 2.0);
    EXPECT_THROW(init_splat_map(rgb, depth, LabelMap(4, 5), K, 2), ShapeError);
    EXPECT_THROW(init_splat_map(Image(5, 4, 3), depth, LabelMap(5, 5), K, 2), ShapeError);
    depth.at(2, 2) = 0.0;
    EXPECT_THROW(init_splat_map(rgb, depth, LabelMap(5, 5), K, 2), DomainError);
}

TEST(Init, RendersInputViewAbove25Db) {
    const FitProblem p = small_problem(64);
    const SplatMap m = init_splat_map(p.input_rgb, p.input_depth, p.mask, p.intrinsics, 1);
    const RenderOutput out = render(decode(m, p.intrinsics), Pose::identity(), p.intrinsics);
    EXPECT_GE(psnr(p.input_rgb, out.rgb), 25.0);
}

TEST(Fit, ZeroIterationsReturnsInitializer) {
    FitProblem p = small_problem(16);
    p.iterations = 0;
    const FitResult r = fit(p);
    EXPECT_EQ(r.map, init_splat_map(p.input_rgb, p.input_depth, p.mask, p.intrinsics, p.layers));
    EXPECT_TRUE(r.report.loss_trace.empty());
    EXPECT_EQ(r.report.best_loss, r.report.initial_loss);
}

TEST(Fit, BestIterateNotWorseThanInitAndTraceShape) {
    FitProblem p = small_problem(24);
    p.iterations = 30;
    const FitResult r = fit(p);
    ASSERT_EQ(r.report.loss_trace.size(), 30u);
    ASSERT_EQ(r.report.best_loss_trace.size(), 30u);
    EXPECT_EQ(r.report.iterations, 30);
    EXPECT_LE(r.report.best_loss, r.report.initial_loss);
    for (std::size_t i = 1; i < r.report.best_loss_trace.size(); ++i) {
        EXPECT_LE(r.report.best_loss_trace[i], r.report.best_loss_trace[i - 1]);
    }
    EXPECT_NEAR(evaluate_objective(r.map, p, false).loss, r.report.best_loss, 1e-12);
}

TEST(Fit, SelfConsistentFrozenMotionDecreasesMonotonically) {
    const oracle::DynamicScene scene = oracle::two_object_scene(32);
    FitProblem p = oracle::scene_fit_problem(scene, 1.0, Pose(Quat::Identity(), Vec3(0.05, 0.0, 0.0)));
    p.layers = 1;
    p.iterations = 100;
    p.fixed_motion = scene.motion;
    const FitResult r = fit(p);
    ASSERT_EQ(r.report.best_loss_trace.size(), 100u);
    for (std::size_t i = 1; i < 100; ++i) {
        EXPECT_LE(r.report.best_loss_trace[i], r.report.best_loss_trace[i - 1]);
    }
    EXPECT_LT(r.report.best_loss_trace[99], r.report.best_loss_trace[49]);
    EXPECT_LT(r.report.best_loss_trace[49], r.report.best_loss_trace[0]);
    EXPECT_LT(r.report.best_loss, 0.5 * r.report.initial_loss);
}

TEST(Fit, StaticSceneStaysStill) {
    oracle::DynamicScene scene = oracle::two_object_scene(32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            for (int a = 0; a < 3; ++a) {
                scene.map.at(0, Channel::VelocityX + a, x, y) = 0.0f;
            }
        }
    }
    scene.motion = aggregate(decode(scene.map, scene.intrinsics));
    FitProblem p = oracle::scene_fit_problem(scene, 1.0, Pose(Quat::Identity(), Vec3(0.05, 0.0, 0.0)));
    p.layers = 1;
    p.iterations = 150;
    const FitResult r = fit(p);
    for (const auto& [id, m] : r.motion) {
        EXPECT_LE(m.linear_velocity.norm(), 0.05) << "object " << id;
    }
}

TEST(Fit, DeterministicForSeedAndAcrossThreads) {
    FitProblem p = small_problem(24);
    p.iterations = 12;
    p.seed = 42;
    p.render.threads = 1;
    const FitResult a = fit(p);
    const FitResult b = fit(p);
    EXPECT_EQ(a.map, b.map);
    EXPECT_EQ(a.report.loss_trace, b.report.loss_trace);

    p.render.threads = 3;
    const FitResult c = fit(p);
    ASSERT_EQ(c.report.loss_trace.size(), a.report.loss_trace.size());
    for (std::size_t i = 0; i < a.report.loss_trace.size(); ++i) {
        EXPECT_NEAR(c.report.loss_trace[i], a.report.loss_trace[i], 1e-9);
    }

    p.seed = 43;
    const FitResult d = fit(p);
    EXPECT_NE(d.report.loss_trace, a.report.loss_trace);
}

TEST(Fit, NonFiniteLossNamesChannel) {
    FitProblem p = small_problem(16);
    p.iterations = 3;
    p.future.rgb.at(5, 5, 1) = std::nan("");
    try {
        fit(p);
        FAIL() << "expected FitError";
    } catch (const FitError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("non-finite"), std::string::npos) << what;
        EXPECT_NE(what.find("channel '"), std::string::npos) << what;
    }
}

TEST(Fit, ValidatesProblem) {
    FitProblem p = small_problem(8);
    p.future.time = 0.0;
    p.intermediate.time = 0.0;
    EXPECT_THROW(fit(p), DomainError);
    p = small_problem(8);
    p.intermediate.time = 1.0;
    EXPECT_THROW(fit(p), DomainError);
    p = small_problem(8);
    p.future.rgb = Image(7, 8, 3);
    EXPECT_THROW(fit(p), ShapeError);
    p = small_problem(8);
    p.iterations = -1;
    EXPECT_THROW(fit(p), DomainError);
}

TEST(FullChainGradient, MatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto [map, problem] = oracle::four_splat_problem(seed);
        const auto check = oracle::check_objective_gradients(map, problem, 2e-2);
        EXPECT_GT(check.checked, 40u);
        EXPECT_EQ(check.failures, 0u) << "seed " << seed << ": " << check.worst;
    }
}

TEST(FullChainGradient, FixedMotionHasNoKlAndNoMotionCoupling) {
    auto [map, problem] = oracle::four_splat_problem(9);
    problem.fixed_motion = aggregate(decode(map, problem.intrinsics));
    const ObjectiveEvaluation e = evaluate_objective(map, problem, true);
    EXPECT_EQ(e.parts.kl, 0.0);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
            EXPECT_EQ(e.gradient[map.index(0, Channel::VelocityX, x, y)], 0.0);
        }
    }
    const auto check = oracle::check_objective_gradients(map, problem, 2e-2);
    EXPECT_EQ(check.failures, 0u) << check.worst;
}

TEST(FitVelocity, RecoversTwoObjectMotion) {
    const oracle::DynamicScene scene = oracle::two_object_scene(32);
    FitProblem p = oracle::scene_fit_problem(scene, 1.0, Pose(Quat::Identity(), Vec3(0.05, 0.0, 0.0)));
    p.layers = 1;
    p.iterations = 200;
    const FitResult r = fit(p);
    EXPECT_LT((r.motion.at(1).linear_velocity - scene.velocity_a).norm(), 0.1);
    EXPECT_LT((r.motion.at(2).linear_velocity - scene.velocity_b).norm(), 0.1);
    EXPECT_GT(mean_channel(r.map, Channel::VelocityX, 1), 0.15);
}

TEST(SampleMotion, Cases) {
    MotionTable t;
    ObjectMotion still;
    still.object_id = kStaticObject;
    t.set(still);
    ObjectMotion m;
    m.object_id = 4;
    m.centroid = Vec3(1, 2, 3);
    m.linear_velocity = Vec3(0.1, 0.2, 0.3);
    m.angular_velocity = Vec3(0.0, 0.5, 0.0);
    t.set(m);

    const MotionTable same = sample_motion(t, MotionPriorScale::isotropic(0.0), 7);
    EXPECT_EQ(same.at(4).linear_velocity, m.linear_velocity);
    EXPECT_EQ(same.at(4).angular_velocity, m.angular_velocity);

    const MotionTable a = sample_motion(t, MotionPriorScale::isotropic(0.3), 7);
    const MotionTable b = sample_motion(t, MotionPriorScale::isotropic(0.3), 7);
    EXPECT_EQ(a.at(4).linear_velocity, b.at(4).linear_velocity);
    EXPECT_EQ(a.at(4).angular_velocity, b.at(4).angular_velocity);
    EXPECT_NE(a.at(4).linear_velocity, m.linear_velocity);
    EXPECT_EQ(a.at(kStaticObject).linear_velocity, Vec3::Zero());
    EXPECT_EQ(a.at(kStaticObject).angular_velocity, Vec3::Zero());
    EXPECT_EQ(a.at(4).centroid, m.centroid);

    MotionPriorScale axis;
    axis.linear = Vec3(0.3, 0.0, 0.0);
    double sum = 0.0;
    double sum2 = 0.0;
    const int n = 10000;
    for (int s = 0; s < n; ++s) {
        const MotionTable r = sample_motion(t, axis, static_cast<std::uint64_t>(s));
        const double d = r.at(4).linear_velocity.x() - m.linear_velocity.x();
        sum += d;
        sum2 += d * d;
        EXPECT_EQ(r.at(4).linear_velocity.y(), m.linear_velocity.y());
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    EXPECT_NEAR(sd, 0.3, 0.03 * 0.3);
}
