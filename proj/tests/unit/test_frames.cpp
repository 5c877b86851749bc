// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/error.hpp"
#include "splat4d/frames.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace splat4d;

namespace {

io::Scene scene_from(const oracle::DynamicScene& d, bool with_motion) {
    io::Scene s;
    s.map = d.map;
    s.intrinsics = d.intrinsics;
    if (with_motion) {
        s.motion = d.motion;
    }
    return s;
}

}  // namespace

TEST(FrameMode, ParseAndName) {
    EXPECT_EQ(parse_frame_mode("rgb"), FrameMode::Rgb);
    EXPECT_EQ(parse_frame_mode("depth"), FrameMode::Depth);
    EXPECT_EQ(frame_mode_name(FrameMode::Depth), "depth");
    EXPECT_THROW(parse_frame_mode("RGB"), DomainError);
    EXPECT_THROW(parse_frame_mode(""), DomainError);
}

TEST(ScaledIntrinsics, PixelCentersStayAligned) {
    const auto K = CameraIntrinsics::centered(64, 48, 70.0);
    EXPECT_EQ(scaled_intrinsics(K, 1.0), K);
    const CameraIntrinsics half = scaled_intrinsics(K, 0.5);
    EXPECT_EQ(half, CameraIntrinsics::centered(32, 24, 35.0));
    const CameraIntrinsics quarter = scaled_intrinsics(K, 0.25);
    EXPECT_EQ(quarter, CameraIntrinsics::centered(16, 12, 17.5));
    // A ray hitting the edge of pixel 0 hits the edge of pixel 0 at every scale.
    const Vec3 ray((-0.5 - K.cx) / K.fx, 0.0, 1.0);
    EXPECT_NEAR(half.fx * ray.x() + half.cx, -0.5, 1e-12);
    EXPECT_THROW(scaled_intrinsics(K, 0.3), DomainError);
    EXPECT_THROW(scaled_intrinsics(K, 2.0), DomainError);
}

TEST(Turbo, RangeAndHueOrdering) {
    for (int i = 0; i <= 100; ++i) {
        const auto c = turbo(i / 100.0);
        for (double v : c) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    const auto lo = turbo(0.1);
    const auto mid = turbo(0.5);
    const auto hi = turbo(0.9);
    EXPECT_GT(lo[2], lo[0]);
    EXPECT_GT(mid[1], 0.8);
    EXPECT_GT(hi[0], hi[2]);
    EXPECT_EQ(turbo(-1.0), turbo(0.0));
    EXPECT_EQ(turbo(2.0), turbo(1.0));
}

TEST(ColorizeDepth, EndpointsAndSentinel) {
    Image d(4, 1, 1);
    d.data = {kDepthColormapNear, kDepthColormapFar, 1e4, 0.1};
    const Image c = colorize_depth(d, 1e4);
    ASSERT_EQ(c.channels, 3);
    const auto near = turbo(1.0);
    const auto far = turbo(0.0);
    for (int k = 0; k < 3; ++k) {
        EXPECT_DOUBLE_EQ(c.at(0, 0, k), near[k]);
        EXPECT_NEAR(c.at(1, 0, k), far[k], 1e-12);
        EXPECT_EQ(c.at(2, 0, k), 0.0);
        EXPECT_DOUBLE_EQ(c.at(3, 0, k), near[k]);
    }
    Image one(1, 1, 1, 2.0);
    const double t = (1.0 / 2.0 - 1.0 / kDepthColormapFar) / (1.0 / kDepthColormapNear - 1.0 / kDepthColormapFar);
    EXPECT_DOUBLE_EQ(colorize_depth(one, 1e4).at(0, 0, 1), turbo(t)[1]);
}

TEST(FrameSource, MotionFromFileOrAggregated) {
    const oracle::DynamicScene d = oracle::two_object_scene(16);
    const FrameSource aggregated = FrameSource::from_scene(scene_from(d, false));
    EXPECT_EQ(aggregated.motion.size(), 3u);
    EXPECT_NEAR((aggregated.motion.at(1).linear_velocity - d.velocity_a).norm(), 0.0, 1e-6);

    io::Scene custom = scene_from(d, true);
    custom.motion->at(1).linear_velocity = Vec3(0, 0, 1);
    const FrameSource stored = FrameSource::from_scene(custom);
    EXPECT_EQ(stored.motion.at(1).linear_velocity, Vec3(0, 0, 1));
}

TEST(RenderFrame, MatchesDirectRender) {
    const oracle::DynamicScene d = oracle::two_object_scene(24);
    const FrameSource src = FrameSource::from_scene(scene_from(d, true));
    const Pose pose(Quat(Eigen::AngleAxisd(0.05, Vec3::UnitY())), Vec3(0.1, 0.0, 0.0));
    const io::Bytes png = render_frame_png(src, pose, 0.7, FrameMode::Rgb);
    const RenderOutput direct = render(propagate(src.splats, src.motion, 0.7), pose, src.intrinsics);
    EXPECT_EQ(png, io::encode_png_rgb(direct.rgb));

    const io::Bytes depth_png = render_frame_png(src, pose, 0.7, FrameMode::Depth);
    EXPECT_EQ(depth_png, io::encode_png_rgb(colorize_depth(direct.depth, RenderSettings{}.far_sentinel)));

    const Image small = io::decode_png_rgb(render_frame_png(src, pose, 0.7, FrameMode::Rgb, 0.5));
    EXPECT_EQ(small.width, 12);
    EXPECT_EQ(small.height, 12);
    EXPECT_THROW(render_frame_png(src, pose, 0.7, FrameMode::Rgb, 0.75), DomainError);
}

TEST(RenderFrame, ZeroMotionFramesAreBitIdentical) {
    oracle::DynamicScene d = oracle::two_object_scene(24);
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) {
            for (int a = 0; a < 3; ++a) {
                d.map.at(0, Channel::VelocityX + a, x, y) = 0.0f;
            }
        }
    }
    const FrameSource src = FrameSource::from_scene(scene_from(d, false));
    const io::Bytes first = render_frame_png(src, Pose::identity(), 0.0, FrameMode::Rgb);
    for (double t : {0.5, 1.0, 3.25}) {
        EXPECT_EQ(render_frame_png(src, Pose::identity(), t, FrameMode::Rgb), first) << t;
    }
}
