#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace surfmap {

template <typename T>
using Raster = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raster index encoding; these values are written verbatim into 8-bit masks.
enum class SurfaceClass : std::uint8_t {
  Unknown = 0,
  Road = 1,
  Pedestrian = 2,
  Crossing = 3,
  Obstacle = 4,
};

inline constexpr int kNumRasterClasses = 5;
// Belief vectors exclude Unknown: component k holds class k+1.
inline constexpr int kNumBeliefClasses = 4;

constexpr std::uint8_t to_index(SurfaceClass c) { return static_cast<std::uint8_t>(c); }
constexpr SurfaceClass class_from_belief_index(int k) { return static_cast<SurfaceClass>(k + 1); }
constexpr int belief_index(SurfaceClass c) { return static_cast<int>(c) - 1; }

std::string_view class_name(SurfaceClass c);

// Road blue, Pedestrian yellow, Crossing green, Obstacle red, Unknown black.
std::array<std::uint8_t, 3> class_color(SurfaceClass c);

/// Per-pixel SurfaceClass indices, Unknown (0) by default.
using AnnotationImage = Raster<std::uint8_t>;

inline AnnotationImage make_annotation(int width, int height) {
  return AnnotationImage::Zero(height, width);
}

enum class ErrorKind {
  BehindCamera,
  NonPositiveDepth,
  EmptyDepthImage,
  DegenerateCloud,
  NoValidDepth,
  TooFewPoints,
  DimensionMismatch,
  FrameOutsideMap,
  TooFewPatches,
  GridMismatch,
  MissingClassCost,
  NoPath,
  InvalidEndpoint,
  InfeasibleLayout,
  RouteOffSurface,
  InvalidArgument,
  MissingInput,
  FormatError,
  ConfigError,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace surfmap
