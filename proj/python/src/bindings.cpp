// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Images cross the boundary as float64 numpy arrays of shape (H, W, C),
// or (H, W) for single-channel planes; label maps as int32 (H, W).
#include "splat4d/camera.hpp"
#include "splat4d/error.hpp"
#include "splat4d/fitter.hpp"
#include "splat4d/frames.hpp"
#include "splat4d/image.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/objectives.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/scene_io.hpp"
#include "splat4d/splat_model.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace splat4d;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Image to_image(const DoubleArray& a) {
    if (a.ndim() != 2 && a.ndim() != 3) {
        throw ShapeError("image must have shape (H, W) or (H, W, C)");
    }
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(w, h, c);
    std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(double));
    return img;
}

py::array_t<double> from_image(const Image& img) {
    std::vector<py::ssize_t> shape = {img.height, img.width};
    if (img.channels != 1) {
        shape.push_back(img.channels);
    }
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return out;
}

LabelMap to_labels(const IntArray& a) {
    if (a.ndim() != 2) {
        throw ShapeError("mask must have shape (H, W)");
    }
    LabelMap m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(m.labels.data(), a.data(), m.labels.size() * sizeof(std::int32_t));
    return m;
}

py::array_t<std::int32_t> from_labels(const LabelMap& m) {
    py::array_t<std::int32_t> out({m.height, m.width});
    std::memcpy(out.mutable_data(), m.labels.data(), m.labels.size() * sizeof(std::int32_t));
    return out;
}

py::bytes to_bytes(const io::Bytes& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

io::Bytes from_bytes(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

Pose make_pose(const Vec4& q, const Vec3& t) { return Pose::from_wxyz(q[0], q[1], q[2], q[3], t); }

// Zero-copy views into a SplatMap; `owner` keeps the map alive.
template <class T>
py::array_t<T> view(std::vector<T>& v, std::vector<py::ssize_t> shape, py::handle owner) {
    return py::array_t<T>(shape, v.data(), owner);
}

// Per-splat attribute as an (N, k) array.
template <int K, class Get>
py::array_t<double> gather(const SplatSet& s, Get get) {
    py::array_t<double> out({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(K)});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Eigen::Matrix<double, K, 1> v = get(s.splats[i]);
        for (int k = 0; k < K; ++k) {
            m(i, k) = v[k];
        }
    }
    return out;
}

using Rows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rows(const Rows& a, Eigen::Index n, Eigen::Index k, const char* what) {
    if (a.rows() != n || a.cols() != k) {
        throw ShapeError(std::string(what) + " must have shape (N, " + std::to_string(k) + ")");
    }
}

SplatSet splats_from_arrays(const Rows& means, const Rows& rotations, const Rows& scales,
                            const Eigen::VectorXd& opacities, const Rows& colors, const std::optional<Rows>& velocities,
                            const std::optional<Rows>& accelerations,
                            const std::optional<std::vector<std::int32_t>>& object_ids,
                            const std::optional<CameraIntrinsics>& intrinsics) {
    const Eigen::Index n = means.rows();
    require_rows(means, n, 3, "means");
    require_rows(rotations, n, 4, "rotations");
    require_rows(scales, n, 3, "scales");
    require_rows(colors, n, 3, "colors");
    if (opacities.size() != n) {
        throw ShapeError("opacities must have shape (N,)");
    }
    if (velocities) {
        require_rows(*velocities, n, 3, "velocities");
    }
    if (accelerations) {
        require_rows(*accelerations, n, 3, "accelerations");
    }
    if (object_ids && static_cast<Eigen::Index>(object_ids->size()) != n) {
        throw ShapeError("object_ids must have shape (N,)");
    }
    SplatSet s;
    if (intrinsics) {
        s.intrinsics = *intrinsics;
    }
    s.splats.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Splat& p = s.splats[static_cast<std::size_t>(i)];
        p.mean = means.row(i).transpose();
        p.rotation = Quat(rotations(i, 0), rotations(i, 1), rotations(i, 2), rotations(i, 3)).normalized();
        p.scale = scales.row(i).transpose();
        p.opacity = opacities[i];
        p.color = colors.row(i).transpose();
        if (velocities) {
            p.velocity = velocities->row(i).transpose();
        }
        if (accelerations) {
            p.acceleration = accelerations->row(i).transpose();
        }
        if (object_ids) {
            p.object_id = (*object_ids)[static_cast<std::size_t>(i)];
        }
    }
    return s;
}

py::dict metrics_dict(const MetricsRecord& m) {
    py::dict d;
    d["psnr"] = m.psnr;
    d["ssim"] = m.ssim;
    d["depth_mre"] = m.depth_mre ? py::cast(*m.depth_mre) : py::none();
    return d;
}

py::dict parts_dict(const LossParts& p) {
    py::dict d;
    d["rgb"] = p.rgb;
    d["depth"] = p.depth;
    d["rgb_diff"] = p.rgb_diff;
    d["kl"] = p.kl;
    return d;
}

SupervisionFrame make_frame(const DoubleArray& rgb, const DoubleArray& depth, const Pose& pose, double time) {
    return {to_image(rgb), to_image(depth), pose, time};
}

}  // namespace

PYBIND11_MODULE(_splat4d, m) {
    m.doc() = "4D Gaussian splat scenes: rendering, motion, fitting and scene files";

    // Translators run newest first, so bases are registered before derived classes.
    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", error);
    py::register_exception<ShapeError>(m, "ShapeError", error);
    py::register_exception<DecodeError>(m, "DecodeError", error);
    py::register_exception<AggregationError>(m, "AggregationError", error);
    py::register_exception<FitError>(m, "FitError", error);
    py::register_exception<io::FileError>(m, "FileError", error);
    auto format = py::register_exception<io::FormatError>(m, "FormatError", error);
    py::register_exception<io::VersionError>(m, "VersionError", format);
    py::register_exception<io::ChecksumError>(m, "ChecksumError", format);
    py::register_exception<io::TruncatedError>(m, "TruncatedError", format);
    py::register_exception<io::DimensionError>(m, "DimensionError", format);
    py::register_exception<io::ParseError>(m, "ParseError", format);

    // ---- camera
    py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
        .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
                 CameraIntrinsics K{fx, fy, cx, cy, width, height};
                 K.validate();
                 return K;
             }),
             py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
        .def_static("centered", &CameraIntrinsics::centered, py::arg("width"), py::arg("height"), py::arg("focal"))
        .def_readwrite("fx", &CameraIntrinsics::fx)
        .def_readwrite("fy", &CameraIntrinsics::fy)
        .def_readwrite("cx", &CameraIntrinsics::cx)
        .def_readwrite("cy", &CameraIntrinsics::cy)
        .def_readwrite("width", &CameraIntrinsics::width)
        .def_readwrite("height", &CameraIntrinsics::height)
        .def("validate", &CameraIntrinsics::validate)
        .def(py::self == py::self)
        .def("__repr__", [](const CameraIntrinsics& K) {
            return "CameraIntrinsics(fx=" + std::to_string(K.fx) + ", fy=" + std::to_string(K.fy) +
                   ", cx=" + std::to_string(K.cx) + ", cy=" + std::to_string(K.cy) +
                   ", width=" + std::to_string(K.width) + ", height=" + std::to_string(K.height) + ")";
        });

    py::class_<Pose>(m, "Pose", "Camera-from-world rigid transform; q is (w, x, y, z).")
        .def(py::init(&make_pose), py::arg("q") = Vec4(1, 0, 0, 0), py::arg("t") = Vec3::Zero())
        .def_static("identity", &Pose::identity)
        .def_property_readonly("q", &Pose::wxyz)
        .def_property_readonly("t", [](const Pose& p) { return Vec3(p.translation()); })
        .def_property_readonly("rotation_matrix", &Pose::rotation_matrix)
        .def("apply", &Pose::apply, py::arg("point"))
        .def("inverse", &Pose::inverse)
        .def("compose", &Pose::compose, py::arg("first"), "self after first")
        .def("__repr__", [](const Pose& p) {
            const Vec4 q = p.wxyz();
            const Vec3& t = p.translation();
            return "Pose(q=[" + std::to_string(q[0]) + ", " + std::to_string(q[1]) + ", " + std::to_string(q[2]) +
                   ", " + std::to_string(q[3]) + "], t=[" + std::to_string(t[0]) + ", " + std::to_string(t[1]) +
                   ", " + std::to_string(t[2]) + "])";
        });

    // ---- splat model
    auto channel = py::enum_<Channel>(m, "Channel");
    for (int c = 0; c < kChannelCount; ++c) {
        const Channel ch = channel_at(c);
        std::string name(channel_name(ch));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        channel.value(name.c_str(), ch);
    }
    m.attr("CHANNEL_COUNT") = kChannelCount;
    m.attr("DEFAULT_LAYERS") = kDefaultLayers;

    py::class_<SplatMap>(m, "SplatMap")
        .def(py::init<int, int, int>(), py::arg("width"), py::arg("height"), py::arg("layers") = kDefaultLayers)
        .def_readonly("width", &SplatMap::width)
        .def_readonly("height", &SplatMap::height)
        .def_readonly("layers", &SplatMap::layers)
        .def_property_readonly(
            "params",
            [](py::object self) {
                auto& map = self.cast<SplatMap&>();
                return view(map.params, {map.layers, kChannelCount, map.height, map.width}, self);
            },
            "float32 view of shape (layers, channels, H, W)")
        .def_property_readonly(
            "base_depth",
            [](py::object self) {
                auto& map = self.cast<SplatMap&>();
                return view(map.base_depth, {map.height, map.width}, self);
            })
        .def_property_readonly(
            "object_id",
            [](py::object self) {
                auto& map = self.cast<SplatMap&>();
                return view(map.object_id, {map.height, map.width}, self);
            })
        .def("validate", &SplatMap::validate)
        .def("copy", [](const SplatMap& s) { return SplatMap(s); })
        .def(py::self == py::self);

    py::class_<SplatSet>(m, "SplatSet")
        .def(py::init<>())
        .def_static("from_arrays", &splats_from_arrays, py::arg("means"), py::arg("rotations"), py::arg("scales"),
                    py::arg("opacities"), py::arg("colors"), py::arg("velocities") = py::none(),
                    py::arg("accelerations") = py::none(), py::arg("object_ids") = py::none(),
                    py::arg("intrinsics") = py::none(), "Rotations are (w, x, y, z) and get normalized.")
        .def("__len__", &SplatSet::size)
        .def_readwrite("intrinsics", &SplatSet::intrinsics)
        .def_property_readonly("means", [](const SplatSet& s) { return gather<3>(s, [](const Splat& p) { return p.mean; }); })
        .def_property_readonly("rotations", [](const SplatSet& s) {
            return gather<4>(s, [](const Splat& p) {
                return Vec4(p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z());
            });
        })
        .def_property_readonly("scales", [](const SplatSet& s) { return gather<3>(s, [](const Splat& p) { return p.scale; }); })
        .def_property_readonly("colors", [](const SplatSet& s) { return gather<3>(s, [](const Splat& p) { return p.color; }); })
        .def_property_readonly("velocities",
                               [](const SplatSet& s) { return gather<3>(s, [](const Splat& p) { return p.velocity; }); })
        .def_property_readonly("accelerations",
                               [](const SplatSet& s) { return gather<3>(s, [](const Splat& p) { return p.acceleration; }); })
        .def_property_readonly("opacities",
                               [](const SplatSet& s) {
                                   std::vector<double> v;
                                   for (const Splat& p : s.splats) v.push_back(p.opacity);
                                   return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
                               })
        .def_property_readonly("object_ids", [](const SplatSet& s) {
            std::vector<std::int32_t> v;
            for (const Splat& p : s.splats) v.push_back(p.object_id);
            return py::array_t<std::int32_t>(static_cast<py::ssize_t>(v.size()), v.data());
        });

    m.def("decode", &decode, py::arg("map"), py::arg("intrinsics"));
    m.def("opacity_activation", &opacity_activation);
    m.def("opacity_logit", &opacity_logit);

    // ---- rasterizer
    py::class_<RenderSettings>(m, "RenderSettings")
        .def(py::init([](double alpha_floor, double far_sentinel, int threads) {
                 return RenderSettings{alpha_floor, far_sentinel, threads};
             }),
             py::arg("alpha_floor") = RenderSettings{}.alpha_floor,
             py::arg("far_sentinel") = RenderSettings{}.far_sentinel, py::arg("threads") = 0)
        .def_readwrite("alpha_floor", &RenderSettings::alpha_floor)
        .def_readwrite("far_sentinel", &RenderSettings::far_sentinel)
        .def_readwrite("threads", &RenderSettings::threads);

    m.def(
        "render",
        [](const SplatSet& splats, const Pose& pose, const CameraIntrinsics& K, const RenderSettings& settings) {
            RenderOutput out;
            {
                py::gil_scoped_release release;
                out = render(splats, pose, K, settings);
            }
            py::dict d;
            d["rgb"] = from_image(out.rgb);
            d["depth"] = from_image(out.depth);
            d["alpha"] = from_image(out.alpha);
            d["culled"] = out.diagnostics.culled;
            d["degenerate"] = out.diagnostics.degenerate;
            return d;
        },
        py::arg("splats"), py::arg("pose"), py::arg("intrinsics"), py::arg("settings") = RenderSettings{},
        "Returns {'rgb': (H, W, 3), 'depth': (H, W), 'alpha': (H, W), 'culled', 'degenerate'}.");

    // ---- motion
    py::class_<ObjectMotion>(m, "ObjectMotion")
        .def(py::init<>())
        .def_readwrite("object_id", &ObjectMotion::object_id)
        .def_readwrite("linear_velocity", &ObjectMotion::linear_velocity)
        .def_readwrite("linear_acceleration", &ObjectMotion::linear_acceleration)
        .def_readwrite("angular_velocity", &ObjectMotion::angular_velocity)
        .def_readwrite("angular_acceleration", &ObjectMotion::angular_acceleration)
        .def_readwrite("centroid", &ObjectMotion::centroid)
        .def("is_zero", &ObjectMotion::is_zero);

    py::class_<MotionTable>(m, "MotionTable")
        .def(py::init<>())
        .def("set", &MotionTable::set, py::arg("motion"))
        .def("__len__", &MotionTable::size)
        .def("__contains__", &MotionTable::contains)
        .def("__getitem__", [](const MotionTable& t, std::int32_t id) {
            if (!t.contains(id)) {
                throw py::key_error(std::to_string(id));
            }
            return t.at(id);
        })
        .def("ids", [](const MotionTable& t) {
            std::vector<std::int32_t> ids;
            for (const auto& [id, motion] : t) ids.push_back(id);
            return ids;
        })
        .def(py::self == py::self);

    m.def("aggregate", py::overload_cast<const SplatSet&>(&aggregate), py::arg("splats"));
    m.def("propagate", &propagate, py::arg("splats"), py::arg("motion"), py::arg("dt"));
    m.def("advance", &advance, py::arg("motion"), py::arg("dt"));
    m.def(
        "sample_motion",
        [](const MotionTable& t, double scale, std::uint64_t seed) {
            return sample_motion(t, MotionPriorScale::isotropic(scale), seed);
        },
        py::arg("motion"), py::arg("scale"), py::arg("seed"));

    // ---- objectives
    m.def("psnr", [](const DoubleArray& a, const DoubleArray& b) { return psnr(to_image(a), to_image(b)); },
          py::arg("truth"), py::arg("pred"));
    m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) { return ssim(to_image(a), to_image(b)); },
          py::arg("a"), py::arg("b"));
    m.def(
        "metrics",
        [](const DoubleArray& truth, const DoubleArray& pred, std::optional<DoubleArray> depth_truth,
           std::optional<DoubleArray> depth_pred, double far_limit) {
            if (depth_truth.has_value() != depth_pred.has_value()) {
                throw ShapeError("metrics: pass both depth maps or neither");
            }
            if (depth_truth) {
                const Image dt = to_image(*depth_truth);
                const Image dp = to_image(*depth_pred);
                return metrics_dict(metrics(to_image(truth), to_image(pred), &dt, &dp, far_limit));
            }
            return metrics_dict(metrics(to_image(truth), to_image(pred)));
        },
        py::arg("truth"), py::arg("pred"), py::arg("depth_truth") = py::none(), py::arg("depth_pred") = py::none(),
        py::arg("far_limit") = 1e4);
    m.def(
        "mean_relative_error",
        [](const DoubleArray& truth, const DoubleArray& pred, double clamp) {
            const Image t = to_image(truth);
            return mean_relative_error(t, to_image(pred), clamp, PixelMask(t.pixel_count(), 1));
        },
        py::arg("truth"), py::arg("pred"), py::arg("clamp") = kDefaultDepthClamp);
    m.def(
        "kl_to_standard_normal",
        [](std::vector<double> mean, std::vector<double> stddev) {
            return kl_to_standard_normal({std::move(mean), std::move(stddev)});
        },
        py::arg("mean"), py::arg("stddev"));

    // ---- fitting
    py::class_<LossWeights>(m, "LossWeights")
        .def(py::init<>())
        .def_readwrite("rgb", &LossWeights::rgb)
        .def_readwrite("depth", &LossWeights::depth)
        .def_readwrite("rgb_diff", &LossWeights::rgb_diff)
        .def_readwrite("kl", &LossWeights::kl)
        .def_readwrite("lambda1", &LossWeights::lambda1)
        .def_readwrite("lambda2", &LossWeights::lambda2)
        .def_readwrite("depth_clamp", &LossWeights::depth_clamp);

    py::class_<LearningRates>(m, "LearningRates")
        .def(py::init<>())
        .def_readwrite("depth_offset", &LearningRates::depth_offset)
        .def_readwrite("xy_offset", &LearningRates::xy_offset)
        .def_readwrite("rotation", &LearningRates::rotation)
        .def_readwrite("log_scale", &LearningRates::log_scale)
        .def_readwrite("opacity", &LearningRates::opacity)
        .def_readwrite("color", &LearningRates::color)
        .def_readwrite("motion", &LearningRates::motion)
        .def_readwrite("acceleration", &LearningRates::acceleration)
        .def_readwrite("cosine_floor", &LearningRates::cosine_floor);

    py::class_<SupervisionFrame>(m, "SupervisionFrame")
        .def(py::init(&make_frame), py::arg("rgb"), py::arg("depth"), py::arg("pose"), py::arg("time"))
        .def_property_readonly("rgb", [](const SupervisionFrame& f) { return from_image(f.rgb); })
        .def_property_readonly("depth", [](const SupervisionFrame& f) { return from_image(f.depth); })
        .def_readwrite("pose", &SupervisionFrame::pose)
        .def_readwrite("time", &SupervisionFrame::time);

    py::class_<FitProblem>(m, "FitProblem")
        .def(py::init([](const CameraIntrinsics& K, const DoubleArray& rgb, const DoubleArray& depth,
                         std::optional<IntArray> mask, const SupervisionFrame& intermediate,
                         const SupervisionFrame& future) {
                 FitProblem p;
                 p.intrinsics = K;
                 p.input_rgb = to_image(rgb);
                 p.input_depth = to_image(depth);
                 p.mask = mask ? to_labels(*mask) : LabelMap(K.width, K.height);
                 p.intermediate = intermediate;
                 p.future = future;
                 return p;
             }),
             py::arg("intrinsics"), py::arg("input_rgb"), py::arg("input_depth"), py::arg("mask"),
             py::arg("intermediate"), py::arg("future"))
        .def_readwrite("intrinsics", &FitProblem::intrinsics)
        .def_property_readonly("input_rgb", [](const FitProblem& p) { return from_image(p.input_rgb); })
        .def_property_readonly("input_depth", [](const FitProblem& p) { return from_image(p.input_depth); })
        .def_property_readonly("mask", [](const FitProblem& p) { return from_labels(p.mask); })
        .def_readwrite("intermediate", &FitProblem::intermediate)
        .def_readwrite("future", &FitProblem::future)
        .def_readwrite("weights", &FitProblem::weights)
        .def_readwrite("learning_rates", &FitProblem::learning_rates)
        .def_readwrite("layers", &FitProblem::layers)
        .def_readwrite("iterations", &FitProblem::iterations)
        .def_readwrite("seed", &FitProblem::seed)
        .def_readwrite("velocity_prior_scale", &FitProblem::velocity_prior_scale)
        .def_readwrite("velocity_jitter", &FitProblem::velocity_jitter)
        .def_readwrite("fixed_motion", &FitProblem::fixed_motion)
        .def_readwrite("render", &FitProblem::render)
        .def("validate", &FitProblem::validate);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("map", &FitResult::map)
        .def_readonly("motion", &FitResult::motion)
        .def_property_readonly("report", [](const FitResult& r) {
            const FitReport& f = r.report;
            py::dict d;
            d["loss_trace"] = f.loss_trace;
            d["best_loss_trace"] = f.best_loss_trace;
            d["initial_loss"] = f.initial_loss;
            d["best_loss"] = f.best_loss;
            d["best_iteration"] = f.best_iteration;
            d["iterations"] = f.iterations;
            d["intermediate_metrics"] = metrics_dict(f.intermediate_metrics);
            d["future_metrics"] = metrics_dict(f.future_metrics);
            d["wall_seconds"] = f.wall_seconds;
            return d;
        });

    m.def(
        "init_splat_map",
        [](const DoubleArray& rgb, const DoubleArray& depth, const IntArray& mask, const CameraIntrinsics& K,
           int layers) { return init_splat_map(to_image(rgb), to_image(depth), to_labels(mask), K, layers); },
        py::arg("rgb"), py::arg("depth"), py::arg("mask"), py::arg("intrinsics"), py::arg("layers") = kDefaultLayers);
    m.def(
        "evaluate_objective",
        [](const SplatMap& map, const FitProblem& problem, bool with_gradient) {
            ObjectiveEvaluation e;
            {
                py::gil_scoped_release release;
                e = evaluate_objective(map, problem, with_gradient);
            }
            py::dict d;
            d["loss"] = e.loss;
            d["parts"] = parts_dict(e.parts);
            d["motion"] = e.motion;
            if (with_gradient) {
                py::array_t<double> g({map.layers, kChannelCount, map.height, map.width});
                std::memcpy(g.mutable_data(), e.gradient.data(), e.gradient.size() * sizeof(double));
                d["gradient"] = g;
            } else {
                d["gradient"] = py::none();
            }
            return d;
        },
        py::arg("map"), py::arg("problem"), py::arg("with_gradient") = false);
    m.def(
        "fit",
        [](const FitProblem& p) {
            py::gil_scoped_release release;
            return fit(p);
        },
        py::arg("problem"));
    m.def(
        "fit_from",
        [](const FitProblem& p, SplatMap initial) {
            py::gil_scoped_release release;
            return fit_from(p, std::move(initial));
        },
        py::arg("problem"), py::arg("initial"));

    // ---- scene files
    py::class_<io::Scene>(m, "Scene")
        .def(py::init([](SplatMap map, const CameraIntrinsics& K, std::optional<MotionTable> motion) {
                 return io::Scene{std::move(map), K, std::move(motion)};
             }),
             py::arg("map"), py::arg("intrinsics"), py::arg("motion") = py::none())
        .def_readwrite("map", &io::Scene::map)
        .def_readwrite("intrinsics", &io::Scene::intrinsics)
        .def_readwrite("motion", &io::Scene::motion)
        .def(py::self == py::self);

    m.def("encode_scene", [](const io::Scene& s) { return to_bytes(io::encode_scene(s)); }, py::arg("scene"));
    m.def("decode_scene", [](const py::bytes& b) { return io::decode_scene(from_bytes(b)); }, py::arg("data"));
    m.def("save_scene", &io::save_scene, py::arg("path"), py::arg("scene"));
    m.def("load_scene", &io::load_scene, py::arg("path"));
    m.def("checksum", [](const py::bytes& b) { return io::checksum(from_bytes(b)); }, py::arg("data"));

    m.def("save_depth", [](const std::filesystem::path& p, const DoubleArray& d) { io::save_depth(p, to_image(d)); },
          py::arg("path"), py::arg("depth"));
    m.def("load_depth", [](const std::filesystem::path& p) { return from_image(io::load_depth(p)); }, py::arg("path"));
    m.def("encode_png", [](const DoubleArray& rgb) { return to_bytes(io::encode_png_rgb(to_image(rgb))); },
          py::arg("rgb"));
    m.def("decode_png", [](const py::bytes& b) { return from_image(io::decode_png_rgb(from_bytes(b))); },
          py::arg("data"));
    m.def("save_png", [](const std::filesystem::path& p, const DoubleArray& rgb) { io::save_png_rgb(p, to_image(rgb)); },
          py::arg("path"), py::arg("rgb"));
    m.def("load_png", [](const std::filesystem::path& p) { return from_image(io::load_png_rgb(p)); }, py::arg("path"));
    m.def("save_mask", [](const std::filesystem::path& p, const IntArray& mask) { io::save_mask(p, to_labels(mask)); },
          py::arg("path"), py::arg("mask"));
    m.def(
        "load_mask", [](const std::filesystem::path& p) { return from_labels(io::load_mask(p)); }, py::arg("path"));

    py::class_<io::Trajectory>(m, "Trajectory")
        .def(py::init([](const std::vector<std::pair<double, Pose>>& samples) {
                 std::vector<io::TrajectorySample> s;
                 for (const auto& [t, p] : samples) s.push_back({t, p});
                 return io::Trajectory(std::move(s));
             }),
             py::arg("samples"), "samples: list of (time, Pose)")
        .def_static("parse", &io::Trajectory::parse, py::arg("text"))
        .def_static("load", &io::Trajectory::load, py::arg("path"))
        .def("save", &io::Trajectory::save, py::arg("path"))
        .def("to_text", &io::Trajectory::to_text)
        .def("interpolate", &io::Trajectory::interpolate, py::arg("time"))
        .def_property_readonly("start_time", &io::Trajectory::start_time)
        .def_property_readonly("end_time", &io::Trajectory::end_time)
        .def_property_readonly("samples", [](const io::Trajectory& t) {
            std::vector<std::pair<double, Pose>> out;
            for (const auto& s : t.samples()) out.emplace_back(s.time, s.pose);
            return out;
        });

    // ---- frames
    py::class_<FrameSource>(m, "FrameSource")
        .def_static("from_scene", &FrameSource::from_scene, py::arg("scene"))
        .def_readonly("splats", &FrameSource::splats)
        .def_readonly("motion", &FrameSource::motion)
        .def_readonly("intrinsics", &FrameSource::intrinsics);

    m.def(
        "render_frame_png",
        [](const FrameSource& src, const Pose& pose, double time, const std::string& mode, double scale,
           const RenderSettings& settings) {
            io::Bytes png;
            {
                py::gil_scoped_release release;
                png = render_frame_png(src, pose, time, parse_frame_mode(mode), scale, settings);
            }
            return to_bytes(png);
        },
        py::arg("source"), py::arg("pose"), py::arg("time"), py::arg("mode") = "rgb", py::arg("scale") = 1.0,
        py::arg("settings") = RenderSettings{});
}
