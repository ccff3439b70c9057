#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "regfuse/alignment.hpp"
#include "regfuse/correspondence.hpp"
#include "regfuse/datagen.hpp"
#include "regfuse/error.hpp"
#include "regfuse/fusion.hpp"
#include "regfuse/metrics.hpp"
#include "regfuse/pipeline_a.hpp"
#include "regfuse/ransac.hpp"

namespace py = pybind11;
using namespace regfuse;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

PointCloud to_cloud(const Points& m) {
    std::vector<Vec3> pts(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) pts[static_cast<std::size_t>(i)] = m.row(i).transpose();
    return PointCloud(std::move(pts));
}

Points to_array(const PointCloud& c) {
    Points m(static_cast<Eigen::Index>(c.size()), 3);
    for (std::size_t i = 0; i < c.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = c[i].transpose();
    return m;
}

py::dict result_dict(const RegistrationResult& r) {
    py::dict d;
    d["transform"] = r.transform.matrix();
    d["overlap"] = r.overlap;
    d["flags"] = std::vector<std::string>(r.degenerate_flags.begin(), r.degenerate_flags.end());
    d["residuals"] = r.per_iteration_residuals;
    return d;
}

RngSeed seed_of(std::uint64_t s) { return RngSeed{s}; }

}  // namespace

PYBIND11_MODULE(_regfuse, m) {
    m.doc() = "Partial-overlap point cloud registration";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<InvalidWeights>(m, "InvalidWeights", PyExc_ValueError);
    py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", PyExc_RuntimeError);
    py::register_exception<DegenerateSet>(m, "DegenerateSet", PyExc_RuntimeError);

    m.def(
        "weighted_kabsch",
        [](const Points& src, const Points& tgt, std::optional<Eigen::VectorXd> weights) {
            if (src.rows() != tgt.rows()) throw InvalidInput("src and tgt must have the same number of rows");
            if (weights && weights->size() != src.rows()) throw InvalidInput("one weight per row expected");
            CorrespondenceSet corr;
            for (Eigen::Index i = 0; i < src.rows(); ++i) {
                corr.push_back({static_cast<std::size_t>(i), tgt.row(i).transpose(), weights ? (*weights)(i) : 1.0});
            }
            return weighted_kabsch(to_cloud(src), corr).matrix();
        },
        py::arg("src"), py::arg("tgt"), py::arg("weights") = py::none(),
        "4x4 rigid transform minimizing the weighted squared distance of row pairs.");

    m.def(
        "evaluate_pair",
        [](const Mat4& pred, const Mat4& gt) {
            const PairMetrics pm = evaluate_pair(RigidTransform::from_matrix(pred), RigidTransform::from_matrix(gt));
            py::dict d;
            d["error_r_deg"] = pm.error_r_deg;
            d["error_t"] = pm.error_t;
            d["mae_r_deg"] = pm.mae_r_deg;
            d["mae_t"] = pm.mae_t;
            d["mse"] = pm.mse;
            d["gimbal_lock"] = pm.gimbal_lock;
            return d;
        },
        py::arg("predicted"), py::arg("ground_truth"));

    m.def(
        "chamfer_distance", [](const Points& a, const Points& b) { return chamfer_distance(to_cloud(a), to_cloud(b)); },
        py::arg("a"), py::arg("b"));

    m.def(
        "compute_descriptors",
        [](const Points& cloud, double radius, double normal_radius) {
            return compute_descriptors(to_cloud(cloud), radius, normal_radius).descriptors;
        },
        py::arg("cloud"), py::arg("radius") = 0.3, py::arg("normal_radius") = 0.15);

    m.def(
        "generate_pair",
        [](const std::string& shape, int rot_level, double overlap, double noise_sigma, std::size_t points,
           std::uint64_t seed) {
            PairSpec spec;
            spec.shape = shape_kind_from_string(shape);
            spec.rot_level = rot_level;
            spec.overlap_target = overlap;
            spec.noise_sigma = noise_sigma;
            spec.points_per_cloud = points;
            spec.seed = seed_of(seed);
            const GeneratedPair p = generate_pair(spec);
            py::dict d;
            d["src"] = to_array(p.src);
            d["tgt"] = to_array(p.tgt);
            d["gt"] = p.gt.matrix();
            d["mask"] = p.overlap_mask_src;
            return d;
        },
        py::arg("shape") = "random_blob", py::arg("rot_level") = 0, py::arg("overlap") = 0.7, py::arg("noise_sigma") = 0.0,
        py::arg("points") = 512, py::arg("seed") = 0);

    m.def(
        "register_a",
        [](const Points& src, const Points& tgt, std::uint64_t seed, double tau) {
            PipelineAConfig cfg;
            cfg.tau = tau;
            const PointCloud s = to_cloud(src), t = to_cloud(tgt);
            RegistrationResult r;
            {
                py::gil_scoped_release release;
                r = register_a(s, t, cfg, seed_of(seed));
            }
            return result_dict(r);
        },
        py::arg("src"), py::arg("tgt"), py::arg("seed") = 0, py::arg("tau") = 0.05);

    m.def(
        "register_a_bidirectional",
        [](const Points& src, const Points& tgt, std::uint64_t seed) {
            auto [r1, r2] = register_a_bidirectional(to_cloud(src), to_cloud(tgt), PipelineAConfig{}, seed_of(seed));
            return py::make_tuple(result_dict(r1), result_dict(r2));
        },
        py::arg("src"), py::arg("tgt"), py::arg("seed") = 0);

    m.def(
        "ransac_register",
        [](const Points& src, const Points& tgt, std::uint64_t seed, std::size_t max_iterations,
           const std::string& objective, double tau) {
            RansacConfig cfg;
            cfg.seed = seed_of(seed);
            cfg.max_iterations = max_iterations;
            cfg.tau = tau;
            if (objective == "inlier_count") {
                cfg.objective = RansacObjective::InlierCount;
            } else if (objective == "overlap_fitness") {
                cfg.objective = RansacObjective::OverlapFitness;
            } else {
                throw InvalidInput("objective must be inlier_count or overlap_fitness");
            }
            return result_dict(ransac_register(to_cloud(src), to_cloud(tgt), cfg));
        },
        py::arg("src"), py::arg("tgt"), py::arg("seed") = 0, py::arg("max_iterations") = 100000,
        py::arg("objective") = "inlier_count", py::arg("tau") = 0.05);

    m.def(
        "fuse",
        [](const Mat4& t1, const Mat4& t2, const Mat4& t3, double ol1, double ol3, double d1, double d2, double d3,
           double d4) {
            FusionThresholds th;
            th.d1 = d1;
            th.d2 = d2;
            th.d3 = d3;
            th.d4 = d4;
            const FusionInput in{RigidTransform::from_matrix(t1), RigidTransform::from_matrix(t2),
                                 RigidTransform::from_matrix(t3), ol1, ol3};
            const FusionDecision dec = fuse(in, th);
            py::dict d;
            d["chosen"] = dec.chosen == Model::A ? "A" : "B";
            d["transform"] = dec.transform.matrix();
            d["l1"] = dec.l1;
            d["l2"] = dec.l2;
            d["l3"] = dec.l3;
            d["l4"] = dec.l4;
            d["rot_consistency_deg"] = dec.rot_consistency_deg;
            d["angle_r1_deg"] = dec.angle_r1_deg;
            return d;
        },
        py::arg("t1"), py::arg("t2"), py::arg("t3"), py::arg("ol1"), py::arg("ol3"), py::arg("d1") = 15.0,
        py::arg("d2") = 60.0, py::arg("d3") = 0.3, py::arg("d4") = 0.05);
}
