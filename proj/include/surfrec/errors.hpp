#ifndef SURFREC_ERRORS_HPP
#define SURFREC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace surfrec {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// io
struct MalformedFile : Error { using Error::Error; };
struct MissingNormals : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };
struct DegenerateExtent : Error { using Error::Error; };

// octree / pyramid
struct DepthOutOfRange : Error { using Error::Error; };
struct DepthTooShallow : Error { using Error::Error; };

// partitioner
struct UnsatisfiableCap : Error { using Error::Error; };
struct CoverageGap : Error { using Error::Error; };

// tangent frames
struct TooFewNeighbors : Error { using Error::Error; };

// network
struct ShapeMismatch : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct HyperparameterMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct CorruptCheckpoint : Error { using Error::Error; };

// labeling / metrics
struct EmptyCloud : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct ZeroArea : Error { using Error::Error; };
struct InconsistentWinding : Error { using Error::Error; };

// config
struct ConfigError : Error { using Error::Error; };

}  // namespace surfrec

#endif
