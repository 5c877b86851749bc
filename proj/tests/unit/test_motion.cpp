// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/error.hpp"
#include "splat4d/motion.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace splat4d;

namespace {

Splat member(const Vec3& mean, const Vec3& v, std::int32_t id) {
    Splat s;
    s.mean = mean;
    s.velocity = v;
    s.object_id = id;
    return s;
}

SplatSet random_object_splats(std::mt19937_64& rng, int count, int objects) {
    std::normal_distribution<double> n(0.0, 1.0);
    SplatSet s;
    for (int i = 0; i < count; ++i) {
        Splat p;
        p.mean = Vec3(n(rng), n(rng), 5.0 + n(rng));
        p.rotation = oracle::random_rotation(rng);
        p.velocity = Vec3(n(rng), n(rng), n(rng));
        p.acceleration = 0.3 * Vec3(n(rng), n(rng), n(rng));
        p.object_id = i % (objects + 1);
        s.splats.push_back(p);
    }
    return s;
}

}  // namespace

TEST(Aggregate, PureTranslation) {
    SplatSet s;
    const Vec3 v0(0.5, -0.25, 1.0);
    for (int i = 0; i < 7; ++i) {
        s.splats.push_back(member(Vec3(i, i * i, 3 + i), v0, 4));
    }
    const MotionTable t = aggregate(s);
    const ObjectMotion& m = t.at(4);
    EXPECT_NEAR((m.linear_velocity - v0).norm(), 0.0, 1e-15);
    EXPECT_NEAR(m.angular_velocity.norm(), 0.0, 1e-15);
    EXPECT_NEAR(m.angular_acceleration.norm(), 0.0, 1e-15);
}

TEST(Aggregate, RingRotation) {
    SplatSet s;
    const Vec3 w(0, 0, 1);
    for (int k = 0; k < 12; ++k) {
        const double a = 2 * std::numbers::pi * k / 12;
        const Vec3 p(std::cos(a), std::sin(a), 0);
        s.splats.push_back(member(p, w.cross(p), 1));
    }
    const ObjectMotion m = aggregate(s).at(1);
    EXPECT_NEAR(m.linear_velocity.norm(), 0.0, 1e-15);
    EXPECT_NEAR((m.angular_velocity - w).norm(), 0.0, 1e-12);
}

TEST(Aggregate, SingleSplatAtCentroid) {
    SplatSet s;
    s.splats.push_back(member(Vec3(1, 2, 3), Vec3(4, 5, 6), 2));
    const ObjectMotion m = aggregate(s).at(2);
    EXPECT_EQ(m.linear_velocity, Vec3(4, 5, 6));
    EXPECT_EQ(m.angular_velocity, Vec3::Zero());
    EXPECT_EQ(m.centroid, Vec3(1, 2, 3));
}

TEST(Aggregate, StaticAndMissingObjects) {
    SplatSet s;
    s.splats.push_back(member(Vec3(1, 2, 3), Vec3(4, 5, 6), 0));
    const MotionTable t = aggregate(s);
    EXPECT_EQ(t.size(), 1u);
    EXPECT_TRUE(t.at(0).is_zero());
    const std::int32_t expected[] = {3};
    EXPECT_THROW(aggregate(s, expected), AggregationError);
    s.splats.push_back(member(Vec3(1, 2, 3), Vec3(4, 5, 6), -1));
    EXPECT_THROW(aggregate(s), AggregationError);
    EXPECT_THROW(t.at(9), DomainError);
}

TEST(Aggregate, RecoversSymmetricRigidFields) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        const auto f = oracle::symmetric_rigid_field(rng, 1, 3 + static_cast<int>(seed % 17));
        const ObjectMotion m = aggregate(f.splats).at(1);
        ASSERT_NEAR((m.linear_velocity - f.v0).norm(), 0.0, 1e-9 * std::max(1.0, f.v0.norm()));
        ASSERT_NEAR((m.angular_velocity - f.omega).norm(), 0.0, 1e-9 * std::max(1.0, f.omega.norm()));
    }
}

TEST(Propagate, LinearShift) {
    SplatSet s;
    for (int i = 0; i < 4; ++i) {
        s.splats.push_back(member(Vec3(i, 0, 4), Vec3(1, 0, 0), 1));
    }
    const SplatSet out = propagate(s, aggregate(s), 0.5);
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR((out.splats[i].mean - Vec3(i + 0.5, 0, 4)).norm(), 0.0, 1e-15);
    }
}

TEST(Propagate, QuarterTurn) {
    MotionTable t;
    ObjectMotion m;
    m.object_id = 1;
    m.angular_velocity = Vec3(0, 0, std::numbers::pi);
    t.set(m);
    SplatSet s;
    s.splats.push_back(member(Vec3(1, 0, 0), Vec3::Zero(), 1));
    const SplatSet out = propagate(s, t, 0.5);
    // Rz(90 deg) built directly.
    Mat3 R;
    R << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    EXPECT_NEAR((out.splats[0].mean - R * Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((out.splats[0].mean - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((out.splats[0].rotation.toRotationMatrix() - R).norm(), 0.0, 1e-15);
}

TEST(Propagate, ZeroDtAndZeroMotionAreBitwiseIdentity) {
    std::mt19937_64 rng(8);
    const SplatSet s = random_object_splats(rng, 200, 3);
    const MotionTable t = aggregate(s);
    EXPECT_TRUE(oracle::bitwise_equal(propagate(s, t, 0.0), s));
    MotionTable still;
    for (const auto& [id, m] : t) {
        ObjectMotion z;
        z.object_id = id;
        z.centroid = m.centroid;
        still.set(z);
    }
    for (double dt : {0.1, 1.0, 7.5}) {
        EXPECT_TRUE(oracle::bitwise_equal(propagate(s, still, dt), s));
    }
    EXPECT_THROW(propagate(s, t, -0.1), DomainError);
}

TEST(Propagate, PreservesRigidDistances) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const SplatSet s = random_object_splats(rng, 60, 2);
        const MotionTable t = aggregate(s);
        const SplatSet out = propagate(s, t, 0.1 + 0.05 * static_cast<double>(seed));
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t j = i + 1; j < s.size(); ++j) {
                if (s.splats[i].object_id != s.splats[j].object_id) {
                    continue;
                }
                const double before = (s.splats[i].mean - s.splats[j].mean).norm();
                const double after = (out.splats[i].mean - out.splats[j].mean).norm();
                ASSERT_NEAR(after, before, 1e-9 * before);
            }
        }
    }
}

TEST(Propagate, ComposesWithAdvancedTable) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    MotionTable t;
    ObjectMotion m;
    m.object_id = 1;
    m.linear_velocity = Vec3(n(rng), n(rng), n(rng));
    m.linear_acceleration = Vec3(n(rng), n(rng), n(rng));
    m.angular_velocity = Vec3(n(rng), n(rng), n(rng));
    m.centroid = Vec3(0.2, -0.1, 5);
    t.set(m);
    SplatSet s;
    for (int i = 0; i < 10; ++i) {
        s.splats.push_back(member(m.centroid + Vec3(n(rng), n(rng), n(rng)), Vec3::Zero(), 1));
    }
    const double t1 = 0.3, t2 = 0.45;
    const SplatSet direct = propagate(s, t, t1 + t2);
    const SplatSet stepped = propagate(propagate(s, t, t1), advance(t, t1), t2);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR((direct.splats[i].mean - stepped.splats[i].mean).norm(), 0.0, 1e-9);
    }
}

TEST(MotionTable, StaticEntryIsForcedToZero) {
    MotionTable t;
    ObjectMotion m;
    m.object_id = 0;
    m.linear_velocity = Vec3(1, 0, 0);
    t.set(m);
    EXPECT_TRUE(t.at(0).is_zero());
}

TEST(PropagateBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    SplatSet s = random_object_splats(rng, 12, 2);
    MotionTable t = aggregate(s);
    for (auto [id, m] : t) {
        if (id != 0) {
            m.angular_acceleration = 0.2 * Vec3(n(rng), n(rng), n(rng));
            t.set(m);
        }
    }
    const double dt = 0.7;
    std::vector<SplatGradient> w(s.size());
    for (auto& g : w) {
        g.mean = Vec3(n(rng), n(rng), n(rng));
        g.rotation = Vec4(n(rng), n(rng), n(rng), n(rng));
        g.velocity = Vec3(n(rng), n(rng), n(rng));
    }
    auto objective = [&](const SplatSet& in, const MotionTable& table) {
        const SplatSet out = propagate(in, table, dt);
        double f = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Splat& p = out.splats[i];
            f += w[i].mean.dot(p.mean) + w[i].velocity.dot(p.velocity) +
                 w[i].rotation.dot(Vec4(p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()));
        }
        return f;
    };
    const PropagateGradients g = propagate_backward(s, t, dt, w);
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            SplatSet up = s, down = s;
            up.splats[i].mean[a] += h;
            down.splats[i].mean[a] -= h;
            EXPECT_NEAR(g.splats[i].mean[a], (objective(up, t) - objective(down, t)) / (2 * h), 1e-6);
            up = s;
            down = s;
            up.splats[i].acceleration[a] += h;
            down.splats[i].acceleration[a] -= h;
            EXPECT_NEAR(g.splats[i].acceleration[a], (objective(up, t) - objective(down, t)) / (2 * h), 1e-6);
        }
    }
    for (const auto& [id, m] : t) {
        if (id == 0) {
            continue;
        }
        const ObjectMotionGradient& gm = g.motion.at(id);
        auto check = [&](Vec3 ObjectMotion::*field, const Vec3& analytic) {
            for (int a = 0; a < 3; ++a) {
                MotionTable up = t, down = t;
                ObjectMotion mu = m, md = m;
                (mu.*field)[a] += h;
                (md.*field)[a] -= h;
                up.set(mu);
                down.set(md);
                EXPECT_NEAR(analytic[a], (objective(s, up) - objective(s, down)) / (2 * h), 1e-6);
            }
        };
        check(&ObjectMotion::linear_velocity, gm.linear_velocity);
        check(&ObjectMotion::linear_acceleration, gm.linear_acceleration);
        check(&ObjectMotion::angular_velocity, gm.angular_velocity);
        check(&ObjectMotion::angular_acceleration, gm.angular_acceleration);
        check(&ObjectMotion::centroid, gm.centroid);
    }
}

TEST(AggregateBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> n(0.0, 1.0);
    const SplatSet s = random_object_splats(rng, 15, 2);
    MotionGradients wm;
    for (int id = 1; id <= 2; ++id) {
        ObjectMotionGradient& g = wm[id];
        g.centroid = Vec3(n(rng), n(rng), n(rng));
        g.linear_velocity = Vec3(n(rng), n(rng), n(rng));
        g.linear_acceleration = Vec3(n(rng), n(rng), n(rng));
        g.angular_velocity = Vec3(n(rng), n(rng), n(rng));
        g.angular_acceleration = Vec3(n(rng), n(rng), n(rng));
    }
    auto objective = [&](const SplatSet& in) {
        const MotionTable t = aggregate(in);
        double f = 0.0;
        for (const auto& [id, g] : wm) {
            const ObjectMotion& m = t.at(id);
            f += g.centroid.dot(m.centroid) + g.linear_velocity.dot(m.linear_velocity) +
                 g.linear_acceleration.dot(m.linear_acceleration) + g.angular_velocity.dot(m.angular_velocity) +
                 g.angular_acceleration.dot(m.angular_acceleration);
        }
        return f;
    };
    std::vector<SplatGradient> g(s.size());
    aggregate_backward(s, wm, g);
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            for (auto field : {&Splat::mean, &Splat::velocity, &Splat::acceleration}) {
                SplatSet up = s, down = s;
                (up.splats[i].*field)[a] += h;
                (down.splats[i].*field)[a] -= h;
                const double fd = (objective(up) - objective(down)) / (2 * h);
                const double an = field == &Splat::mean       ? g[i].mean[a]
                                  : field == &Splat::velocity ? g[i].velocity[a]
                                                              : g[i].acceleration[a];
                EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST(RotationVectorQuaternion, JacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double scale : {1e-5, 1e-3, 0.1, 1.0, 3.0}) {
        const Vec3 theta = scale * Vec3(n(rng), n(rng), n(rng));
        const auto J = rotation_vector_quaternion_jacobian(theta);
        for (int a = 0; a < 3; ++a) {
            Vec3 up = theta, down = theta;
            const double h = 1e-7;
            up[a] += h;
            down[a] -= h;
            const Quat qu = rotation_vector_quaternion(up);
            const Quat qd = rotation_vector_quaternion(down);
            const Vec4 fd = (Vec4(qu.w(), qu.x(), qu.y(), qu.z()) - Vec4(qd.w(), qd.x(), qd.y(), qd.z())) / (2 * h);
            EXPECT_NEAR((J.col(a) - fd).norm(), 0.0, 1e-7);
        }
    }
}
