// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// splat4d command-line tool: render, fit, metrics, aggregate, serve.
#include "splat4d/error.hpp"
#include "splat4d/fitter.hpp"
#include "splat4d/frames.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/objectives.hpp"
#include "splat4d/scene_io.hpp"
#include "splat4d/viewer_server.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace splat4d;

namespace {

std::atomic<bool> g_interrupted{false};

json motion_json(const ObjectMotion& m) {
    auto v = [](const Vec3& x) { return json::array({x.x(), x.y(), x.z()}); };
    return {{"object_id", m.object_id},
            {"linear_velocity", v(m.linear_velocity)},
            {"linear_acceleration", v(m.linear_acceleration)},
            {"angular_velocity", v(m.angular_velocity)},
            {"angular_acceleration", v(m.angular_acceleration)},
            {"centroid", v(m.centroid)}};
}

json metrics_json(const MetricsRecord& m) {
    json j = {{"psnr", m.psnr}, {"ssim", m.ssim}};
    if (m.depth_mre) {
        j["depth_mre"] = *m.depth_mre;
    }
    return j;
}

// ---- render ---------------------------------------------------------------------

struct RenderArgs {
    std::string scene;
    std::string trajectory;
    double fps = 30.0;
    double duration = -1.0;
    std::string out_dir = "frames";
    std::string mode = "rgb";
    double scale = 1.0;
    bool write_depth = false;
    double sample_scale = 0.0;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_render(const RenderArgs& a) {
    if (!(a.fps > 0.0)) {
        throw DomainError("--fps must be positive");
    }
    const io::Scene scene = io::load_scene(a.scene);
    const io::Trajectory traj = io::Trajectory::load(a.trajectory);
    FrameSource source = FrameSource::from_scene(scene);
    if (a.sample_scale > 0.0) {
        source.motion = sample_motion(source.motion, MotionPriorScale::isotropic(a.sample_scale), a.seed);
    }
    const double span = traj.end_time() - traj.start_time();
    const double duration = a.duration < 0.0 ? span : a.duration;
    if (duration > span + 1e-9) {
        throw DomainError("--duration exceeds the trajectory's time span");
    }
    const FrameMode mode = parse_frame_mode(a.mode);
    RenderSettings settings;
    settings.threads = a.threads;
    const CameraIntrinsics K = scaled_intrinsics(source.intrinsics, a.scale);

    fs::create_directories(a.out_dir);
    const auto count = static_cast<long>(std::floor(duration * a.fps + 1e-9)) + 1;
    std::FILE* index = std::fopen((fs::path(a.out_dir) / "frames.txt").c_str(), "w");
    if (index == nullptr) {
        throw io::FileError("cannot write frame index in " + a.out_dir);
    }
    std::fprintf(index, "# frame time_seconds file\n");
    for (long k = 0; k < count; ++k) {
        const double time = std::min(traj.start_time() + static_cast<double>(k) / a.fps, traj.end_time());
        const Pose pose = traj.interpolate(time);
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%05ld", k);
        const io::Bytes png = render_frame_png(source, pose, time, mode, a.scale, settings);
        io::write_file(fs::path(a.out_dir) / (std::string(name) + ".png"), png);
        if (a.write_depth) {
            const RenderOutput out = render(propagate(source.splats, source.motion, time), pose, K, settings);
            io::save_depth(fs::path(a.out_dir) / (std::string(name) + ".d4d"), out.depth);
        }
        std::fprintf(index, "%ld %.17g %s.png\n", k, time, name);
    }
    std::fclose(index);
    std::cout << json{{"frames", count}, {"out_dir", a.out_dir}}.dump() << "\n";
    return 0;
}

// ---- fit ------------------------------------------------------------------------

Pose pose_from(const json& j) {
    if (!j.is_object()) {
        return Pose::identity();
    }
    const auto q = j.value("q", std::vector<double>{1.0, 0.0, 0.0, 0.0});
    const auto t = j.value("t", std::vector<double>{0.0, 0.0, 0.0});
    if (q.size() != 4 || t.size() != 3) {
        throw DomainError("pose needs q[4] and t[3]");
    }
    return Pose::from_wxyz(q[0], q[1], q[2], q[3], Vec3(t[0], t[1], t[2]));
}

Image load_rgb_checked(const fs::path& p, const CameraIntrinsics& K) {
    Image img = io::load_png_rgb(p);
    if (img.width != K.width || img.height != K.height) {
        throw io::DimensionError(p.string() + " does not match the intrinsics size");
    }
    return img;
}

Image load_depth_checked(const fs::path& p, const CameraIntrinsics& K) {
    Image img = io::load_depth(p);
    if (img.width != K.width || img.height != K.height) {
        throw io::DimensionError(p.string() + " does not match the intrinsics size");
    }
    return img;
}

int run_fit(const std::string& config_path, int threads_override) {
    const io::Bytes raw = io::read_file(config_path);
    json cfg;
    try {
        cfg = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        throw io::ParseError(std::string("config: ") + e.what());
    }
    const fs::path base = fs::path(config_path).parent_path();
    auto path = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    FitProblem pb;
    const json& k = cfg.at("intrinsics");
    pb.intrinsics.fx = k.at("fx");
    pb.intrinsics.fy = k.at("fy");
    pb.intrinsics.cx = k.at("cx");
    pb.intrinsics.cy = k.at("cy");
    pb.intrinsics.width = k.at("width");
    pb.intrinsics.height = k.at("height");
    pb.intrinsics.validate();
    const CameraIntrinsics& K = pb.intrinsics;

    const json& in = cfg.at("input");
    pb.input_rgb = load_rgb_checked(path(in.at("rgb")), K);
    pb.input_depth = load_depth_checked(path(in.at("depth")), K);
    pb.mask = in.contains("mask") ? io::load_mask(path(in.at("mask")), K.width, K.height) : LabelMap(K.width, K.height);

    auto frame = [&](const json& j) {
        SupervisionFrame f;
        f.rgb = load_rgb_checked(path(j.at("rgb")), K);
        f.depth = load_depth_checked(path(j.at("depth")), K);
        f.time = j.at("time");
        f.pose = pose_from(j.value("pose", json()));
        return f;
    };
    pb.future = frame(cfg.at("future"));
    pb.intermediate = frame(cfg.at("intermediate"));

    if (cfg.contains("weights")) {
        const json& w = cfg["weights"];
        pb.weights.rgb = w.value("rgb", pb.weights.rgb);
        pb.weights.depth = w.value("depth", pb.weights.depth);
        pb.weights.rgb_diff = w.value("rgb_diff", pb.weights.rgb_diff);
        pb.weights.kl = w.value("kl", pb.weights.kl);
        pb.weights.lambda1 = w.value("lambda1", pb.weights.lambda1);
        pb.weights.lambda2 = w.value("lambda2", pb.weights.lambda2);
        pb.weights.depth_clamp = w.value("depth_clamp", pb.weights.depth_clamp);
    }
    if (cfg.contains("learning_rates")) {
        const json& r = cfg["learning_rates"];
        LearningRates& lr = pb.learning_rates;
        lr.depth_offset = r.value("depth_offset", lr.depth_offset);
        lr.xy_offset = r.value("xy_offset", lr.xy_offset);
        lr.rotation = r.value("rotation", lr.rotation);
        lr.log_scale = r.value("log_scale", lr.log_scale);
        lr.opacity = r.value("opacity", lr.opacity);
        lr.color = r.value("color", lr.color);
        lr.motion = r.value("motion", lr.motion);
        lr.acceleration = r.value("acceleration", lr.acceleration);
        lr.cosine_floor = r.value("cosine_floor", lr.cosine_floor);
    }
    pb.layers = cfg.value("layers", pb.layers);
    pb.iterations = cfg.value("iterations", pb.iterations);
    pb.seed = cfg.value("seed", pb.seed);
    pb.velocity_prior_scale = cfg.value("velocity_prior_scale", pb.velocity_prior_scale);
    pb.velocity_jitter = cfg.value("velocity_jitter", pb.velocity_jitter);
    pb.render.threads = threads_override >= 0 ? threads_override : cfg.value("threads", 0);

    const FitResult result = fit(pb);

    const json out = cfg.value("output", json::object());
    const fs::path scene_path = path(out.value("scene", std::string("fitted.s4d")));
    const fs::path report_path = path(out.value("report", std::string("fit_report.json")));
    io::save_scene(scene_path, io::Scene{result.map, K, result.motion});

    json objects = json::array();
    for (const auto& [id, m] : result.motion) {
        if (id != kStaticObject) {
            objects.push_back(motion_json(m));
        }
    }
    const FitReport& r = result.report;
    const json report = {{"iterations", r.iterations},
                         {"initial_loss", r.initial_loss},
                         {"best_loss", r.best_loss},
                         {"best_iteration", r.best_iteration},
                         {"wall_seconds", r.wall_seconds},
                         {"intermediate_metrics", metrics_json(r.intermediate_metrics)},
                         {"future_metrics", metrics_json(r.future_metrics)},
                         {"motion", objects},
                         {"loss_trace", r.loss_trace}};
    const std::string text = report.dump(2) + "\n";
    io::write_file(report_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    std::cout << json{{"scene", scene_path.string()},
                      {"report", report_path.string()},
                      {"best_loss", r.best_loss},
                      {"future_psnr", r.future_metrics.psnr},
                      {"intermediate_psnr", r.intermediate_metrics.psnr}}
                     .dump()
              << "\n";
    return 0;
}

// ---- metrics --------------------------------------------------------------------

int run_metrics(const std::string& pred_dir, const std::string& gt_dir, double far_limit) {
    std::map<std::string, fs::path> gt;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.path().extension() == ".png") {
            gt[e.path().filename().string()] = e.path();
        }
    }
    std::size_t matched = 0;
    std::size_t missing = 0;
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    double mre_sum = 0.0;
    std::size_t mre_count = 0;
    for (const auto& [name, gt_path] : gt) {
        const fs::path pred_path = fs::path(pred_dir) / name;
        if (!fs::exists(pred_path)) {
            std::cout << json{{"frame", name}, {"error", "missing prediction"}}.dump() << "\n";
            ++missing;
            continue;
        }
        const Image truth = io::load_png_rgb(gt_path);
        const Image pred = io::load_png_rgb(pred_path);
        const fs::path gt_depth = fs::path(gt_path).replace_extension(".d4d");
        const fs::path pred_depth = fs::path(pred_path).replace_extension(".d4d");
        MetricsRecord m;
        if (fs::exists(gt_depth) && fs::exists(pred_depth)) {
            const Image dt = io::load_depth(gt_depth);
            const Image dp = io::load_depth(pred_depth);
            m = metrics(truth, pred, &dt, &dp, far_limit);
        } else {
            m = metrics(truth, pred);
        }
        json line = metrics_json(m);
        line["frame"] = name;
        std::cout << line.dump() << "\n";
        ++matched;
        psnr_sum += m.psnr;
        ssim_sum += m.ssim;
        if (m.depth_mre) {
            mre_sum += *m.depth_mre;
            ++mre_count;
        }
    }
    if (matched == 0) {
        std::cerr << "metrics: no matching frames\n";
        return 1;
    }
    json summary = {{"summary", true},
                    {"frames", matched},
                    {"psnr", psnr_sum / matched},
                    {"ssim", ssim_sum / matched}};
    if (mre_count > 0) {
        summary["depth_mre"] = mre_sum / mre_count;
    }
    std::cout << summary.dump() << "\n";
    return missing == 0 ? 0 : 1;
}

// ---- aggregate ------------------------------------------------------------------

int run_aggregate(const std::string& scene_path, const std::string& mask_path, const std::string& out_path) {
    io::Scene scene = io::load_scene(scene_path);
    const LabelMap mask = io::load_mask(mask_path, scene.map.width, scene.map.height);
    scene.map.object_id = mask.labels;
    const MotionTable table = aggregate(decode(scene.map, scene.intrinsics));
    for (const auto& [id, m] : table) {
        std::cout << motion_json(m).dump() << "\n";
    }
    if (!out_path.empty()) {
        scene.motion = table;
        io::save_scene(out_path, scene);
    }
    return 0;
}

// ---- serve ----------------------------------------------------------------------

int run_serve(const std::string& scene_path, const server::ServerOptions& options) {
    const io::Scene scene = io::load_scene(scene_path);
    server::ViewerServer srv(FrameSource::from_scene(scene), options);
    const std::uint16_t port = srv.start();
    std::cout << json{{"address", options.address}, {"port", port}}.dump() << std::endl;
    std::signal(SIGINT, [](int) { g_interrupted = true; });
    std::signal(SIGTERM, [](int) { g_interrupted = true; });
    while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    srv.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splat4d: 4D Gaussian splat scenes (render, fit, metrics, aggregate, serve)"};
    app.require_subcommand(1);

    RenderArgs ra;
    auto* render_cmd = app.add_subcommand("render", "Render frames along a camera trajectory");
    render_cmd->add_option("scene", ra.scene, "Scene file (.s4d)")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("trajectory", ra.trajectory, "Trajectory text file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--fps", ra.fps, "Frames per second")->capture_default_str();
    render_cmd->add_option("--duration", ra.duration, "Seconds to render (default: whole trajectory)");
    render_cmd->add_option("--out-dir", ra.out_dir, "Output directory")->capture_default_str();
    render_cmd->add_option("--mode", ra.mode, "rgb or depth")->capture_default_str();
    render_cmd->add_option("--scale", ra.scale, "Image scale: 1, 0.5 or 0.25")->capture_default_str();
    render_cmd->add_flag("--write-depth", ra.write_depth, "Also write raw depth planes (.d4d)");
    render_cmd->add_option("--sample-scale", ra.sample_scale,
                           "Std of sampled object velocity perturbations (m/s, rad/s); 0 renders the stored motion")
        ->capture_default_str();
    render_cmd->add_option("--seed", ra.seed, "Seed for --sample-scale")->capture_default_str();
    render_cmd->add_option("--threads", ra.threads, "Render threads (0 = all cores)")->capture_default_str();

    std::string fit_config;
    int fit_threads = -1;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a scene to supervision frames");
    fit_cmd->add_option("config", fit_config, "Fit configuration (JSON)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--threads", fit_threads, "Override the config's thread count");

    std::string pred_dir, gt_dir;
    double far_limit = 1e4;
    auto* metrics_cmd = app.add_subcommand("metrics", "PSNR, SSIM and depth MRE between two frame directories");
    metrics_cmd->add_option("pred-dir", pred_dir, "Predicted frames")->required()->check(CLI::ExistingDirectory);
    metrics_cmd->add_option("gt-dir", gt_dir, "Ground-truth frames")->required()->check(CLI::ExistingDirectory);
    metrics_cmd->add_option("--far-limit", far_limit, "Depths at or beyond this are invalid (m)")->capture_default_str();

    std::string agg_scene, agg_mask, agg_out;
    auto* agg_cmd = app.add_subcommand("aggregate", "Per-object motion from a scene and an instance mask");
    agg_cmd->add_option("scene", agg_scene, "Scene file (.s4d)")->required()->check(CLI::ExistingFile);
    agg_cmd->add_option("mask", agg_mask, "Instance mask PNG (0 = static)")->required()->check(CLI::ExistingFile);
    agg_cmd->add_option("--out", agg_out, "Write the scene with mask labels and motion table here");

    std::string serve_scene;
    server::ServerOptions serve_opts;
    auto* serve_cmd = app.add_subcommand("serve", "Serve interactive renders over HTTP + WebSocket");
    serve_cmd->add_option("scene", serve_scene, "Scene file (.s4d)")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", serve_opts.port, "TCP port (0 = any free port)")->capture_default_str();
    serve_cmd->add_option("--address", serve_opts.address, "Bind address")->capture_default_str();
    serve_cmd->add_option("--max-time", serve_opts.max_time, "Playback range advertised to clients (s)")
        ->capture_default_str();
    serve_cmd->add_option("--threads", serve_opts.render.threads, "Render threads (0 = all cores)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*render_cmd) {
            return run_render(ra);
        }
        if (*fit_cmd) {
            return run_fit(fit_config, fit_threads);
        }
        if (*metrics_cmd) {
            return run_metrics(pred_dir, gt_dir, far_limit);
        }
        if (*agg_cmd) {
            return run_aggregate(agg_scene, agg_mask, agg_out);
        }
        if (*serve_cmd) {
            return run_serve(serve_scene, serve_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "splat4d: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
