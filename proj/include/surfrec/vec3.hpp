#ifndef SURFREC_VEC3_HPP
#define SURFREC_VEC3_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace surfrec {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? *this / n : Vec3{0.0, 0.0, 0.0};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Axis-aligned box. Interval convention (closed vs half-open) is decided
/// by the caller; `contains_half_open` is what the partitioner uses.
struct Box3 {
    Vec3 lo{std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void expand(const Vec3& p) {
        for (int a = 0; a < 3; ++a) {
            if (p[a] < lo[a]) lo[a] = p[a];
            if (p[a] > hi[a]) hi[a] = p[a];
        }
    }
    void expand(const Box3& b) { expand(b.lo); expand(b.hi); }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    Vec3 extent() const { return hi - lo; }
    double longest_extent(int* axis = nullptr) const {
        Vec3 e = extent();
        int best = 0;
        if (e.y > e[best]) best = 1;
        if (e.z > e[best]) best = 2;
        if (axis) *axis = best;
        return e[best];
    }
    bool contains_half_open(const Vec3& p) const {
        return p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y &&
               p.z >= lo.z && p.z < hi.z;
    }
    bool contains_closed(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    Box3 padded(double pad) const {
        return Box3{{lo.x - pad, lo.y - pad, lo.z - pad},
                    {hi.x + pad, hi.y + pad, hi.z + pad}};
    }
    Box3 clipped_to_unit_cube() const {
        Box3 b = *this;
        for (int a = 0; a < 3; ++a) {
            if (b.lo[a] < 0.0) b.lo[a] = 0.0;
            if (b.hi[a] > 1.0) b.hi[a] = 1.0;
        }
        return b;
    }
};

}  // namespace surfrec

#endif
