#ifndef SURFREC_MESH_IO_HPP
#define SURFREC_MESH_IO_HPP

#include <string>

#include "surfrec/point_cloud.hpp"

namespace surfrec {

enum class CloudFormat { kPly, kObj, kXyz };
enum class MeshFormat { kPly, kObj };
enum class PlyEncoding { kAscii, kBinaryLittleEndian };

CloudFormat cloud_format_from_path(const std::string& path);
MeshFormat mesh_format_from_path(const std::string& path);

/// Every record must carry a normal; normals are renormalized on load.
OrientedPointCloud load_point_cloud(const std::string& path, CloudFormat format);
OrientedPointCloud load_point_cloud(const std::string& path);

/// `comment` (single line) is embedded as a PLY comment / '#' line; used by
/// the pipeline for config-hash + seed provenance.
void save_point_cloud(const OrientedPointCloud& cloud, const std::string& path,
                      CloudFormat format,
                      PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian,
                      const std::string& comment = "");

TriangleMesh load_mesh(const std::string& path, MeshFormat format);
TriangleMesh load_mesh(const std::string& path);

void save_mesh(const TriangleMesh& mesh, const std::string& path,
               MeshFormat format,
               PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian,
               const std::string& comment = "");
void save_mesh(const TriangleMesh& mesh, const std::string& path);

}  // namespace surfrec

#endif
