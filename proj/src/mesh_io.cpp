#include "surfrec/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "surfrec/errors.hpp"

namespace surfrec {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

enum class PlyType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::kInt8:
        case PlyType::kUInt8: return 1;
        case PlyType::kInt16:
        case PlyType::kUInt16: return 2;
        case PlyType::kInt32:
        case PlyType::kUInt32:
        case PlyType::kFloat32: return 4;
        case PlyType::kFloat64: return 8;
    }
    return 0;
}

PlyType parse_ply_type(const std::string& s, const std::string& where) {
    if (s == "char" || s == "int8") return PlyType::kInt8;
    if (s == "uchar" || s == "uint8") return PlyType::kUInt8;
    if (s == "short" || s == "int16") return PlyType::kInt16;
    if (s == "ushort" || s == "uint16") return PlyType::kUInt16;
    if (s == "int" || s == "int32") return PlyType::kInt32;
    if (s == "uint" || s == "uint32") return PlyType::kUInt32;
    if (s == "float" || s == "float32") return PlyType::kFloat32;
    if (s == "double" || s == "float64") return PlyType::kFloat64;
    throw MalformedFile("unknown ply type '" + s + "' in " + where);
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::kFloat32;
    bool is_list = false;
    PlyType count_type = PlyType::kUInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t header_bytes = 0;
};

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
    PlyHeader header;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw MalformedFile(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    if (!std::getline(in, line)) fail("empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") fail("missing ply magic");

    bool have_format = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "ascii") header.binary = false;
            else if (fmt == "binary_little_endian") header.binary = true;
            else fail("unsupported ply format '" + fmt + "'");
            have_format = true;
        } else if (word == "element") {
            PlyElement elem;
            ls >> elem.name >> elem.count;
            if (ls.fail()) fail("bad element line");
            header.elements.push_back(elem);
        } else if (word == "property") {
            if (header.elements.empty()) fail("property before element");
            PlyProperty prop;
            std::string type;
            ls >> type;
            if (type == "list") {
                prop.is_list = true;
                std::string count_type, value_type;
                ls >> count_type >> value_type >> prop.name;
                prop.count_type = parse_ply_type(count_type, path);
                prop.type = parse_ply_type(value_type, path);
            } else {
                prop.type = parse_ply_type(type, path);
                ls >> prop.name;
            }
            if (ls.fail()) fail("bad property line");
            header.elements.back().properties.push_back(prop);
        } else if (word == "end_header") {
            if (!have_format) fail("end_header before format");
            header.header_bytes = static_cast<std::size_t>(in.tellg());
            return header;
        } else {
            fail("unknown header keyword '" + word + "'");
        }
    }
    fail("unterminated header");
    return header;  // unreachable
}

double read_binary_scalar(std::istream& in, PlyType t, const std::string& path) {
    unsigned char buf[8];
    std::size_t n = ply_type_size(t);
    if (!in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
        throw MalformedFile(path + ": truncated binary payload at byte " +
                            std::to_string(static_cast<long long>(in.tellg())));
    switch (t) {
        case PlyType::kInt8: return static_cast<double>(static_cast<signed char>(buf[0]));
        case PlyType::kUInt8: return static_cast<double>(buf[0]);
        case PlyType::kInt16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::kUInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::kInt32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::kUInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::kFloat32: { float v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::kFloat64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
}

double read_ascii_scalar(std::istringstream& ls, const std::string& path,
                         std::size_t record) {
    double v;
    if (!(ls >> v))
        throw MalformedFile(path + ": short or malformed record " +
                            std::to_string(record));
    return v;
}

struct PlyContents {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    bool has_normals = false;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

PlyContents read_ply(const std::string& path, bool need_normals) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    PlyHeader header = read_ply_header(in, path);

    PlyContents out;
    for (const PlyElement& elem : header.elements) {
        if (elem.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
            for (std::size_t p = 0; p < elem.properties.size(); ++p) {
                const std::string& n = elem.properties[p].name;
                int idx = static_cast<int>(p);
                if (n == "x") ix = idx;
                else if (n == "y") iy = idx;
                else if (n == "z") iz = idx;
                else if (n == "nx") inx = idx;
                else if (n == "ny") iny = idx;
                else if (n == "nz") inz = idx;
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw MalformedFile(path + ": vertex element lacks x/y/z");
            out.has_normals = inx >= 0 && iny >= 0 && inz >= 0;
            if (need_normals && !out.has_normals)
                throw MissingNormals(path + ": vertex element lacks nx/ny/nz");

            out.positions.reserve(elem.count);
            if (out.has_normals) out.normals.reserve(elem.count);
            std::vector<double> values(elem.properties.size());
            std::string line;
            for (std::size_t r = 0; r < elem.count; ++r) {
                if (header.binary) {
                    for (std::size_t p = 0; p < elem.properties.size(); ++p) {
                        if (elem.properties[p].is_list)
                            throw MalformedFile(path + ": list property in vertex element");
                        values[p] = read_binary_scalar(in, elem.properties[p].type, path);
                    }
                } else {
                    if (!std::getline(in, line))
                        throw MalformedFile(path + ": missing vertex record " +
                                            std::to_string(r));
                    std::istringstream ls(line);
                    for (std::size_t p = 0; p < elem.properties.size(); ++p)
                        values[p] = read_ascii_scalar(ls, path, r);
                }
                out.positions.push_back({values[ix], values[iy], values[iz]});
                if (out.has_normals)
                    out.normals.push_back({values[inx], values[iny], values[inz]});
            }
        } else if (elem.name == "face") {
            int list_prop = -1;
            for (std::size_t p = 0; p < elem.properties.size(); ++p)
                if (elem.properties[p].is_list &&
                    (elem.properties[p].name == "vertex_indices" ||
                     elem.properties[p].name == "vertex_index"))
                    list_prop = static_cast<int>(p);
            if (list_prop < 0)
                throw MalformedFile(path + ": face element lacks vertex_indices");

            out.triangles.reserve(elem.count);
            std::string line;
            for (std::size_t r = 0; r < elem.count; ++r) {
                std::vector<std::uint32_t> face;
                if (header.binary) {
                    for (std::size_t p = 0; p < elem.properties.size(); ++p) {
                        const PlyProperty& prop = elem.properties[p];
                        if (!prop.is_list) {
                            read_binary_scalar(in, prop.type, path);
                            continue;
                        }
                        auto n = static_cast<std::size_t>(
                            read_binary_scalar(in, prop.count_type, path));
                        for (std::size_t k = 0; k < n; ++k) {
                            double v = read_binary_scalar(in, prop.type, path);
                            if (static_cast<int>(p) == list_prop)
                                face.push_back(static_cast<std::uint32_t>(v));
                        }
                    }
                } else {
                    if (!std::getline(in, line))
                        throw MalformedFile(path + ": missing face record " +
                                            std::to_string(r));
                    std::istringstream ls(line);
                    auto n = static_cast<std::size_t>(read_ascii_scalar(ls, path, r));
                    face.resize(n);
                    for (std::size_t k = 0; k < n; ++k)
                        face[k] = static_cast<std::uint32_t>(read_ascii_scalar(ls, path, r));
                }
                if (face.size() < 3)
                    throw MalformedFile(path + ": face record " + std::to_string(r) +
                                        " has fewer than 3 indices");
                // fan-triangulate polygons
                for (std::size_t k = 2; k < face.size(); ++k)
                    out.triangles.push_back({face[0], face[k - 1], face[k]});
            }
        } else {
            // skip unknown elements
            std::string line;
            for (std::size_t r = 0; r < elem.count; ++r) {
                if (header.binary) {
                    for (const PlyProperty& prop : elem.properties) {
                        if (prop.is_list) {
                            auto n = static_cast<std::size_t>(
                                read_binary_scalar(in, prop.count_type, path));
                            for (std::size_t k = 0; k < n; ++k)
                                read_binary_scalar(in, prop.type, path);
                        } else {
                            read_binary_scalar(in, prop.type, path);
                        }
                    }
                } else if (!std::getline(in, line)) {
                    throw MalformedFile(path + ": truncated element '" + elem.name + "'");
                }
            }
        }
    }
    return out;
}

void append_le(std::string& buf, const void* data, std::size_t n) {
    buf.append(static_cast<const char*>(data), n);
}

std::string one_line(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

void write_ply(const std::string& path, const std::vector<Vec3>& positions,
               const std::vector<Vec3>* normals,
               const std::vector<std::array<std::uint32_t, 3>>* triangles,
               PlyEncoding encoding, const std::string& comment = "") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");

    bool binary = encoding == PlyEncoding::kBinaryLittleEndian;
    out << "ply\nformat "
        << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    if (!comment.empty()) out << "comment " << one_line(comment) << "\n";
    out << "element vertex " << positions.size() << "\n";
    out << "property float64 x\nproperty float64 y\nproperty float64 z\n";
    if (normals)
        out << "property float64 nx\nproperty float64 ny\nproperty float64 nz\n";
    if (triangles) {
        out << "element face " << triangles->size() << "\n";
        out << "property list uint8 uint32 vertex_indices\n";
    }
    out << "end_header\n";

    if (binary) {
        std::string buf;
        for (std::size_t i = 0; i < positions.size(); ++i) {
            double v[6] = {positions[i].x, positions[i].y, positions[i].z,
                           normals ? (*normals)[i].x : 0.0,
                           normals ? (*normals)[i].y : 0.0,
                           normals ? (*normals)[i].z : 0.0};
            append_le(buf, v, normals ? 48 : 24);
        }
        if (triangles) {
            for (const auto& t : *triangles) {
                std::uint8_t n = 3;
                append_le(buf, &n, 1);
                append_le(buf, t.data(), 12);
            }
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    } else {
        out.precision(17);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            out << positions[i].x << ' ' << positions[i].y << ' ' << positions[i].z;
            if (normals)
                out << ' ' << (*normals)[i].x << ' ' << (*normals)[i].y << ' '
                    << (*normals)[i].z;
            out << '\n';
        }
        if (triangles)
            for (const auto& t : *triangles)
                out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    if (!out) throw IoFailure("write failed for " + path);
}

// ---------------------------------------------------------------------------
// OBJ / XYZ
// ---------------------------------------------------------------------------

TriangleMesh load_obj_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "v") {
            Vec3 p;
            if (!(ls >> p.x >> p.y >> p.z))
                throw MalformedFile(path + ":" + std::to_string(line_no) +
                                    ": malformed vertex");
            mesh.vertices.push_back(p);
        } else if (word == "f") {
            std::vector<std::uint32_t> face;
            std::string tok;
            while (ls >> tok) {
                // accept "i", "i/t", "i/t/n", "i//n"
                long idx = std::strtol(tok.c_str(), nullptr, 10);
                if (idx == 0)
                    throw MalformedFile(path + ":" + std::to_string(line_no) +
                                        ": malformed face index '" + tok + "'");
                if (idx < 0) idx += static_cast<long>(mesh.vertices.size()) + 1;
                face.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            if (face.size() < 3)
                throw MalformedFile(path + ":" + std::to_string(line_no) +
                                    ": face with fewer than 3 vertices");
            for (std::size_t k = 2; k < face.size(); ++k)
                mesh.triangles.push_back({face[0], face[k - 1], face[k]});
        }
        // ignore vt/vn/usemtl/etc.
    }
    mesh.validate();
    return mesh;
}

void save_obj_mesh(const TriangleMesh& mesh, const std::string& path,
                   const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.precision(17);
    if (!comment.empty()) out << "# " << one_line(comment) << '\n';
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw IoFailure("write failed for " + path);
}

OrientedPointCloud load_xyz_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    OrientedPointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        Vec3 p, n;
        if (!(ls >> p.x)) continue;  // blank line
        if (!(ls >> p.y >> p.z))
            throw MalformedFile(path + ":" + std::to_string(line_no) +
                                ": malformed position");
        if (!(ls >> n.x >> n.y >> n.z))
            throw MissingNormals(path + ":" + std::to_string(line_no) +
                                 ": record lacks normal fields");
        cloud.positions.push_back(p);
        cloud.normals.push_back(n);
    }
    return cloud;
}

void save_xyz_cloud(const OrientedPointCloud& cloud, const std::string& path,
                    const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.precision(17);
    if (!comment.empty()) out << "# " << one_line(comment) << '\n';
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        const Vec3& n = cloud.normals[i];
        out << p.x << ' ' << p.y << ' ' << p.z << ' ' << n.x << ' ' << n.y << ' '
            << n.z << '\n';
    }
    if (!out) throw IoFailure("write failed for " + path);
}

OrientedPointCloud load_obj_cloud(const std::string& path) {
    // positions from "v", normals from "vn" paired by order
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    OrientedPointCloud cloud;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "v") {
            Vec3 p;
            ls >> p.x >> p.y >> p.z;
            cloud.positions.push_back(p);
        } else if (word == "vn") {
            Vec3 n;
            ls >> n.x >> n.y >> n.z;
            cloud.normals.push_back(n);
        }
    }
    if (cloud.normals.size() != cloud.positions.size())
        throw MissingNormals(path + ": obj cloud needs one vn per v");
    return cloud;
}

}  // namespace

CloudFormat cloud_format_from_path(const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == "ply") return CloudFormat::kPly;
    if (ext == "obj") return CloudFormat::kObj;
    if (ext == "xyz" || ext == "txt") return CloudFormat::kXyz;
    throw MalformedFile("unrecognized point cloud extension: " + path);
}

MeshFormat mesh_format_from_path(const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == "ply") return MeshFormat::kPly;
    if (ext == "obj") return MeshFormat::kObj;
    throw MalformedFile("unrecognized mesh extension: " + path);
}

OrientedPointCloud load_point_cloud(const std::string& path, CloudFormat format) {
    OrientedPointCloud cloud;
    switch (format) {
        case CloudFormat::kPly: {
            PlyContents contents = read_ply(path, /*need_normals=*/true);
            cloud.positions = std::move(contents.positions);
            cloud.normals = std::move(contents.normals);
            break;
        }
        case CloudFormat::kObj:
            cloud = load_obj_cloud(path);
            break;
        case CloudFormat::kXyz:
            cloud = load_xyz_cloud(path);
            break;
    }
    if (cloud.empty()) throw MalformedFile(path + ": no points");
    cloud.validate_and_renormalize();
    return cloud;
}

OrientedPointCloud load_point_cloud(const std::string& path) {
    return load_point_cloud(path, cloud_format_from_path(path));
}

void save_point_cloud(const OrientedPointCloud& cloud, const std::string& path,
                      CloudFormat format, PlyEncoding encoding,
                      const std::string& comment) {
    switch (format) {
        case CloudFormat::kPly:
            write_ply(path, cloud.positions, &cloud.normals, nullptr, encoding,
                      comment);
            break;
        case CloudFormat::kObj: {
            std::ofstream out(path);
            if (!out) throw IoFailure("cannot open " + path + " for writing");
            out.precision(17);
            if (!comment.empty()) out << "# " << one_line(comment) << '\n';
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                const Vec3& p = cloud.positions[i];
                const Vec3& n = cloud.normals[i];
                out << "v " << p.x << ' ' << p.y << ' ' << p.z << '\n';
                out << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
            }
            break;
        }
        case CloudFormat::kXyz:
            save_xyz_cloud(cloud, path, comment);
            break;
    }
}

TriangleMesh load_mesh(const std::string& path, MeshFormat format) {
    if (format == MeshFormat::kObj) return load_obj_mesh(path);
    PlyContents contents = read_ply(path, /*need_normals=*/false);
    TriangleMesh mesh;
    mesh.vertices = std::move(contents.positions);
    mesh.triangles = std::move(contents.triangles);
    mesh.validate();
    return mesh;
}

TriangleMesh load_mesh(const std::string& path) {
    return load_mesh(path, mesh_format_from_path(path));
}

void save_mesh(const TriangleMesh& mesh, const std::string& path,
               MeshFormat format, PlyEncoding encoding,
               const std::string& comment) {
    mesh.validate();
    if (format == MeshFormat::kObj) {
        save_obj_mesh(mesh, path, comment);
    } else {
        write_ply(path, mesh.vertices, nullptr, &mesh.triangles, encoding, comment);
    }
}

void save_mesh(const TriangleMesh& mesh, const std::string& path) {
    save_mesh(mesh, path, mesh_format_from_path(path));
}

}  // namespace surfrec
