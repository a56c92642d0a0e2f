#include "surfmap/types.hpp"

namespace surfmap {

std::string_view class_name(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::Unknown: return "Unknown";
    case SurfaceClass::Road: return "Road";
    case SurfaceClass::Pedestrian: return "Pedestrian";
    case SurfaceClass::Crossing: return "Crossing";
    case SurfaceClass::Obstacle: return "Obstacle";
  }
  return "Invalid";
}

std::array<std::uint8_t, 3> class_color(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::Road: return {0, 0, 255};
    case SurfaceClass::Pedestrian: return {255, 255, 0};
    case SurfaceClass::Crossing: return {0, 255, 0};
    case SurfaceClass::Obstacle: return {255, 0, 0};
    default: return {0, 0, 0};
  }
}

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::EmptyDepthImage: return "EmptyDepthImage";
    case ErrorKind::DegenerateCloud: return "DegenerateCloud";
    case ErrorKind::NoValidDepth: return "NoValidDepth";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::FrameOutsideMap: return "FrameOutsideMap";
    case ErrorKind::TooFewPatches: return "TooFewPatches";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::MissingClassCost: return "MissingClassCost";
    case ErrorKind::NoPath: return "NoPath";
    case ErrorKind::InvalidEndpoint: return "InvalidEndpoint";
    case ErrorKind::InfeasibleLayout: return "InfeasibleLayout";
    case ErrorKind::RouteOffSurface: return "RouteOffSurface";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace surfmap
