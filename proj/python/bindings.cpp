// Python bindings for the main reconstruction operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "surfrec/analytic.hpp"
#include "surfrec/marching_cubes.hpp"
#include "surfrec/mesh_io.hpp"
#include "surfrec/metrics.hpp"
#include "surfrec/pipeline.hpp"

namespace py = pybind11;
using namespace surfrec;

namespace {

using Rows3 = std::vector<std::array<double, 3>>;
using Tris = std::vector<std::array<std::uint32_t, 3>>;

OrientedPointCloud make_cloud(const Rows3& positions, const Rows3& normals) {
    if (positions.size() != normals.size())
        throw std::invalid_argument("positions and normals differ in length");
    OrientedPointCloud cloud;
    cloud.positions.reserve(positions.size());
    cloud.normals.reserve(normals.size());
    for (const auto& p : positions) cloud.positions.push_back({p[0], p[1], p[2]});
    for (const auto& n : normals) cloud.normals.push_back({n[0], n[1], n[2]});
    cloud.validate_and_renormalize();
    return cloud;
}

Rows3 to_rows(const std::vector<Vec3>& v) {
    Rows3 out;
    out.reserve(v.size());
    for (const Vec3& p : v) out.push_back({p.x, p.y, p.z});
    return out;
}

TriangleMesh make_mesh(const Rows3& vertices, const Tris& triangles) {
    TriangleMesh mesh;
    for (const auto& v : vertices) mesh.vertices.push_back({v[0], v[1], v[2]});
    mesh.triangles = triangles;
    mesh.validate();
    return mesh;
}

}  // namespace

PYBIND11_MODULE(_surfrec, m) {
    m.doc() = "surface reconstruction from oriented point clouds";

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("depth", &PipelineConfig::depth)
        .def_readwrite("normalize_padding", &PipelineConfig::normalize_padding)
        .def_readwrite("max_batch", &PipelineConfig::max_batch)
        .def_readwrite("pad", &PipelineConfig::pad)
        .def_readwrite("force_parts", &PipelineConfig::force_parts)
        .def_readwrite("extent", &PipelineConfig::extent)
        .def_readwrite("base_radius_cells", &PipelineConfig::base_radius_cells)
        .def_readwrite("w1", &PipelineConfig::w1)
        .def_readwrite("w2", &PipelineConfig::w2)
        .def_readwrite("w3", &PipelineConfig::w3)
        .def_readwrite("steps", &PipelineConfig::steps)
        .def_readwrite("step_size", &PipelineConfig::step_size)
        .def_readwrite("smoothing_lambda", &PipelineConfig::lambda)
        .def_readwrite("smoothing_mu", &PipelineConfig::mu)
        .def_readwrite("smoothing_iterations", &PipelineConfig::iterations)
        .def_readwrite("workers", &PipelineConfig::workers)
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("samples", &PipelineConfig::samples);

    m.def("load_config", &load_config, py::arg("path"));
    m.def("config_hash", &config_hash, py::arg("config"));

    m.def(
        "gen_analytic",
        [](const std::string& shape, std::size_t count, std::uint64_t seed,
           double sigma) {
            const Vec3 c{0.5, 0.5, 0.5};
            OrientedPointCloud cloud;
            if (shape == "sphere")
                cloud = sample_sphere_cloud(c, 0.3, count, seed, sigma);
            else if (shape == "torus")
                cloud = sample_torus_cloud(c, 0.25, 0.1, count, seed, sigma);
            else if (shape == "plane")
                cloud = sample_plane_cloud(c, 0.35, count, seed, sigma);
            else
                throw std::invalid_argument("shape must be sphere, torus, or plane");
            return py::make_tuple(to_rows(cloud.positions), to_rows(cloud.normals));
        },
        py::arg("shape"), py::arg("count") = 50000, py::arg("seed") = 0,
        py::arg("sigma") = 0.0,
        "Sample an analytic test shape; returns (positions, normals).");

    m.def(
        "reconstruct",
        [](const Rows3& positions, const Rows3& normals,
           const PipelineConfig& cfg, const std::optional<std::string>& checkpoint) {
            OrientedPointCloud cloud = make_cloud(positions, normals);
            NetworkState net;
            const NetworkState* ptr = nullptr;
            if (checkpoint) {
                net = load_checkpoint(*checkpoint);
                ptr = &net;
            }
            ReconstructionResult r = reconstruct(cloud, cfg, ptr);
            py::dict out;
            out["vertices"] = to_rows(r.mesh.vertices);
            out["triangles"] = r.mesh.triangles;
            out["labels"] = r.labels.labels;
            out["parts"] = r.part_count;
            out["grid_vertices"] = r.vertex_count;
            return out;
        },
        py::arg("positions"), py::arg("normals"),
        py::arg("config") = PipelineConfig{},
        py::arg("checkpoint") = std::nullopt,
        "Reconstruct a surface; uses the geometric baseline unless a "
        "checkpoint path is given.");

    m.def(
        "chamfer_l1",
        [](const Rows3& va, const Tris& ta, const Rows3& vb, const Tris& tb,
           std::size_t samples, std::uint64_t seed) {
            SampledSurface a = sample_mesh(make_mesh(va, ta), samples, seed);
            SampledSurface b = sample_mesh(make_mesh(vb, tb), samples, seed + 1);
            return chamfer_l1(a, b);
        },
        py::arg("vertices_a"), py::arg("triangles_a"), py::arg("vertices_b"),
        py::arg("triangles_b"), py::arg("samples") = 100000, py::arg("seed") = 0);

    m.def("save_mesh",
          [](const Rows3& vertices, const Tris& triangles,
             const std::string& path) {
              save_mesh(make_mesh(vertices, triangles), path);
          });
    m.def("load_mesh", [](const std::string& path) {
        TriangleMesh mesh = load_mesh(path);
        return py::make_tuple(to_rows(mesh.vertices), mesh.triangles);
    });
    m.def("load_point_cloud", [](const std::string& path) {
        OrientedPointCloud cloud = load_point_cloud(path);
        return py::make_tuple(to_rows(cloud.positions), to_rows(cloud.normals));
    });
    m.def("save_point_cloud",
          [](const Rows3& positions, const Rows3& normals,
             const std::string& path) {
              save_point_cloud(make_cloud(positions, normals), path,
                               cloud_format_from_path(path));
          });

    m.def("prepare", &cmd_prepare, py::arg("cloud_path"), py::arg("gt_mesh_path"),
          py::arg("out_dir"), py::arg("config") = PipelineConfig{});
    m.def("train", &cmd_train, py::arg("dataset_dirs"),
          py::arg("validation_dirs"), py::arg("checkpoint_path"),
          py::arg("curve_path") = std::string{},
          py::arg("config") = PipelineConfig{});
    m.def(
        "evaluate",
        [](const std::string& pred_mesh, const std::optional<std::string>& gt_mesh,
           const std::optional<std::string>& pred_labels,
           const std::optional<std::string>& gt_labels, const PipelineConfig& cfg) {
            MetricsReport r =
                cmd_evaluate(pred_mesh, gt_mesh, pred_labels, gt_labels, cfg);
            py::dict out;
            for (const auto& [k, v] : r.values) out[py::str(k)] = v;
            for (const auto& [k, v] : r.provenance) out[py::str(k)] = v;
            return out;
        },
        py::arg("pred_mesh"), py::arg("gt_mesh") = std::nullopt,
        py::arg("pred_labels") = std::nullopt, py::arg("gt_labels") = std::nullopt,
        py::arg("config") = PipelineConfig{});
}
