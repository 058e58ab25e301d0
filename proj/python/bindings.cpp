// Python bindings. Depth maps cross the boundary as 2-D float64 arrays with
// NaN (or any non-positive value) marking invalid pixels.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "affdepth/curriculum.hpp"
#include "affdepth/error.hpp"
#include "affdepth/evaluate.hpp"
#include "affdepth/geometry.hpp"
#include "affdepth/gradcheck.hpp"
#include "affdepth/ingest.hpp"
#include "affdepth/io.hpp"
#include "affdepth/scene.hpp"
#include "affdepth/trainer.hpp"

namespace py = pybind11;
using namespace affdepth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::pair<int, int> shape_of(const Array& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
    return {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))};
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

DepthMap to_depth(const Array& a) {
    const auto [w, h] = shape_of(a);
    return DepthMap::from_values(w, h, flat(a));
}

Array to_array(int w, int h, std::span<const double> v) {
    Array out({h, w});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array depth_array(const DepthMap& d) {
    std::vector<double> v(d.values().begin(), d.values().end());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!d.valid(i)) v[i] = std::numeric_limits<double>::quiet_NaN();
    }
    return to_array(d.width(), d.height(), v);
}

Mask to_mask(const Array& a) {
    Mask m(static_cast<std::size_t>(a.size()));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.data()[i] != 0.0;
    return m;
}

CameraIntrinsics intrinsics(const DepthMap& d, std::optional<double> fx, std::optional<double> fy,
                            std::optional<double> cx, std::optional<double> cy) {
    CameraIntrinsics k = scene_intrinsics(d.width(), d.height());
    if (fx) k.fx = *fx;
    if (fy) k.fy = *fy;
    if (cx) k.cx = *cx;
    if (cy) k.cy = *cy;
    k.validate();
    return k;
}

LossKind loss_kind(const std::string& name) {
    const auto kind = parse_loss(name);
    if (!kind) throw py::value_error("unknown loss: " + name);
    return *kind;
}

FlowField to_flow(const Array& dx, const Array& dy) {
    const auto [w, h] = shape_of(dx);
    if (shape_of(dy) != std::pair{w, h}) throw py::value_error("dx and dy differ in shape");
    FlowField f{w, h, flat(dx), flat(dy), Mask(static_cast<std::size_t>(dx.size()))};
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.mask[i] = std::isfinite(f.dx[i]) && std::isfinite(f.dy[i]);
        if (!f.mask[i]) f.dx[i] = f.dy[i] = 0.0;
    }
    return f;
}

py::dict report_dict(const IngestReport& r) {
    py::dict d;
    d["n_total"] = r.n_total;
    d["n_initially_invalid"] = r.n_initially_invalid;
    d["n_removed_vertical"] = r.n_removed_vertical;
    d["n_removed_lr"] = r.n_removed_lr;
    d["n_valid"] = r.n_valid;
    d["accepted"] = r.accepted;
    d["n_depth_valid"] = r.n_depth_valid;
    return d;
}

}  // namespace

PYBIND11_MODULE(_affdepth, m) {
    m.doc() = "Affine-invariant depth losses, metrics, curriculum sampling and stereo ingest";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def(
        "loss",
        [](const std::string& name, const Array& pred, const Array& gt, std::optional<double> fx,
           std::optional<double> fy, std::optional<double> cx, std::optional<double> cy, double lambda,
           std::uint64_t seed) {
            const auto p = to_depth(pred), g = to_depth(gt);
            if (!p.same_shape(g)) throw py::value_error("pred and gt differ in shape");
            const auto r = sample_loss(loss_kind(name), p, g, intrinsics(g, fx, fy, cx, cy), lambda, seed);
            return py::make_tuple(r.value, to_array(p.width(), p.height(), r.gradient));
        },
        py::arg("name"), py::arg("pred"), py::arg("gt"), py::arg("fx") = py::none(), py::arg("fy") = py::none(),
        py::arg("cx") = py::none(), py::arg("cy") = py::none(), py::arg("lam") = 1.0, py::arg("seed") = 0,
        "Loss value and gradient with respect to pred. Ranking uses pairs drawn from gt.");

    m.def("loss_names", [] {
        std::vector<std::string> out;
        for (auto k : {LossKind::mse, LossKind::silog, LossKind::ranking, LossKind::ssi, LossKind::vnl, LossKind::sn,
                       LossKind::combined}) {
            out.emplace_back(loss_name(k));
        }
        return out;
    });

    m.def(
        "lsq_align",
        [](const Array& pred, const Array& gt) {
            const auto a = lsq_align(to_depth(pred), to_depth(gt));
            return py::make_tuple(a.scale, a.shift);
        },
        py::arg("pred"), py::arg("gt"), "Least-squares (scale, shift) mapping pred onto gt.");

    m.def(
        "evaluate",
        [](const Array& pred, const Array& gt, const std::string& align, std::optional<Array> submask,
           const std::vector<std::tuple<std::size_t, std::size_t, int, double>>& pairs, double whdr_tau) {
            EvaluateOptions opts;
            if (align != "lsq" && align != "none") throw py::value_error("align must be 'lsq' or 'none'");
            opts.align = align == "lsq" ? Alignment::lsq : Alignment::none;
            opts.whdr_tau = whdr_tau;
            if (submask) opts.submask = to_mask(*submask);
            for (const auto& [i, j, label, w] : pairs) {
                if (label < -1 || label > 1) throw py::value_error("pair labels are -1, 0 or 1");
                opts.pairs.push_back({{i, j, static_cast<OrdinalLabel>(label)}, w});
            }
            const auto r = evaluate(to_depth(pred), to_depth(gt), opts);
            py::dict d;
            d["abs_rel"] = r.abs_rel;
            d["whdr"] = r.whdr ? py::cast(*r.whdr) : py::none();
            d["si_rms"] = r.si_rms;
            d["si_hum"] = r.si_masked ? py::cast(r.si_masked->first) : py::none();
            d["si_env"] = r.si_masked ? py::cast(r.si_masked->second) : py::none();
            d["scale"] = r.alignment.scale;
            d["shift"] = r.alignment.shift;
            d["n_valid"] = r.n_valid;
            d["pearson_r"] = r.pearson_r;
            d["negative_scale"] = r.negative_scale;
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("align") = "lsq", py::arg("submask") = py::none(),
        py::arg("pairs") = std::vector<std::tuple<std::size_t, std::size_t, int, double>>{},
        py::arg("whdr_tau") = 0.02,
        "Metrics report. Pairs are (flat index i, flat index j, label, weight) with label -1 when i is closer.");

    m.def(
        "unproject",
        [](const Array& depth, double fx, double fy, double cx, double cy) {
            const auto cloud = unproject(to_depth(depth), {fx, fy, cx, cy});
            py::array_t<double> out({static_cast<py::ssize_t>(cloud.points.size()), py::ssize_t{3}});
            auto* p = out.mutable_data();
            for (const auto& q : cloud.points) {
                *p++ = q.x;
                *p++ = q.y;
                *p++ = q.z;
            }
            return out;
        },
        py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
        "Camera-frame points of the valid pixels in row-major order, shape (n, 3).");

    m.def(
        "surface_normals",
        [](const Array& depth, double fx, double fy, double cx, double cy) {
            const auto nf = surface_normals(to_depth(depth), {fx, fy, cx, cy});
            py::array_t<double> out({static_cast<py::ssize_t>(nf.height), static_cast<py::ssize_t>(nf.width),
                                     py::ssize_t{3}});
            auto* p = out.mutable_data();
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t i = 0; i < nf.normals.size(); ++i) {
                const auto& n = nf.normals[i];
                const bool ok = nf.mask[i] != 0;
                *p++ = ok ? n.x : nan;
                *p++ = ok ? n.y : nan;
                *p++ = ok ? n.z : nan;
            }
            return out;
        },
        py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
        "Unit normals facing the camera, shape (h, w, 3); NaN where undefined.");

    m.def(
        "pacing",
        [](std::size_t k, std::size_t part_index, const std::vector<double>& p, std::size_t step_len,
           std::size_t batch_size, std::size_t total_iters, std::size_t n_j) {
            return pacing(k, part_index, PacingConfig{p, step_len, batch_size, total_iters}, n_j);
        },
        py::arg("k"), py::arg("part_index"), py::arg("p"), py::arg("step_len"), py::arg("batch_size"),
        py::arg("total_iters"), py::arg("n_j"), "Number of easiest samples of a part eligible at pacing step k.");

    m.def(
        "make_plan",
        [](const std::vector<std::pair<int, std::vector<SampleId>>>& parts, const DifficultyScores& scores,
           const std::vector<double>& p, std::size_t step_len, std::size_t batch_size, std::size_t total_iters,
           const std::string& mode) {
            const auto md = parse_mode(mode);
            if (!md) throw py::value_error("unknown curriculum mode: " + mode);
            std::vector<Part> ps;
            for (const auto& [id, ids] : parts) ps.push_back({id, ids});
            const auto plan = make_plan(ps, scores, PacingConfig{p, step_len, batch_size, total_iters}, *md);
            py::dict orders;
            for (std::size_t j = 0; j < plan.part_ids.size(); ++j) orders[py::int_(plan.part_ids[j])] = plan.orders[j];
            return orders;
        },
        py::arg("parts"), py::arg("scores"), py::arg("p"), py::arg("step_len"), py::arg("batch_size"),
        py::arg("total_iters"), py::arg("mode") = "mcl",
        "Sorted sample order per part. parts is a list of (part_id, sample_ids); scores maps id to difficulty.");

    m.def(
        "batches",
        [](const std::vector<std::pair<int, std::vector<SampleId>>>& parts, const DifficultyScores& scores,
           const std::vector<double>& p, std::size_t step_len, std::size_t batch_size, std::size_t total_iters,
           const std::string& mode, std::uint64_t seed) {
            const auto md = parse_mode(mode);
            if (!md) throw py::value_error("unknown curriculum mode: " + mode);
            std::vector<Part> ps;
            for (const auto& [id, ids] : parts) ps.push_back({id, ids});
            BatchSequence seq(make_plan(ps, scores, PacingConfig{p, step_len, batch_size, total_iters}, *md), seed);
            std::vector<std::vector<SampleId>> out;
            while (auto b = seq.next()) out.push_back(b->ids);
            return out;
        },
        py::arg("parts"), py::arg("scores"), py::arg("p"), py::arg("step_len"), py::arg("batch_size"),
        py::arg("total_iters"), py::arg("mode") = "mcl", py::arg("seed") = 0, "Every batch of the sequence.");

    m.def(
        "ingest",
        [](const Array& lr_dx, const Array& lr_dy, const Array& rl_dx, const Array& rl_dy, double v_thresh,
           double lr_thresh, double min_valid, double min_disparity, std::optional<double> scale) {
            const IngestThresholds th{v_thresh, lr_thresh, min_valid, min_disparity};
            const auto r = ingest_pipeline(to_flow(lr_dx, lr_dy), to_flow(rl_dx, rl_dy), th,
                                           scale ? DepthScale::fixed(*scale) : DepthScale::median_one());
            return py::make_tuple(r.depth ? py::object(depth_array(*r.depth)) : py::none(), report_dict(r.report));
        },
        py::arg("lr_dx"), py::arg("lr_dy"), py::arg("rl_dx"), py::arg("rl_dy"), py::arg("v_thresh") = 5.0,
        py::arg("lr_thresh") = 2.0, py::arg("min_valid") = 0.30, py::arg("min_disparity") = 1e-3,
        py::arg("scale") = py::none(), "Filter a stereo flow pair; returns (depth or None, report).");

    m.def(
        "read_pfm", [](const std::string& path) { return depth_array(read_pfm(path)); }, py::arg("path"));
    m.def(
        "write_pfm", [](const Array& depth, const std::string& path) { write_pfm(to_depth(depth), path); },
        py::arg("depth"), py::arg("path"));

    m.def(
        "gradcheck",
        [](const std::string& name, std::size_t trials, std::uint64_t seed, bool pipeline) {
            const auto s = run_gradcheck(loss_kind(name), trials, seed, pipeline);
            return py::make_tuple(s.worst(), s.passed());
        },
        py::arg("loss"), py::arg("trials") = 10, py::arg("seed") = 0, py::arg("pipeline") = false,
        "Finite-difference check; returns (worst relative error, passed).");
}
