#pragma once

// Run-directory and artifact formats.
//
//   poses.txt        timestamp tx ty tz qx qy qz qw      (base in world)
//   calib.txt        fx/fy/cx/cy/width/height lines, base_to_cam as 16 row-major values
//   tracklets.csv    track_id,agent_class,timestamp,x,y,z
//   detections.csv   track_id,agent_class,timestamp,u_min,v_min,u_max,v_max
//   depth/*.png      16-bit, millimetres, 0 = invalid
//   *.sprb           "SPRB", u32 width, u32 height, u8 K, then f32 probabilities (pixel-major)
//   *.tmap           "TMAP", u16 version, grid header, per-cell log odds / count / elevation sum
//   *.geo            origin_x origin_y resolution for a class raster PNG
//   *.tmesh          "tmesh <vertices> <faces>", then "x y z" and "a b c class" lines
//
// Binary fields are little-endian.

#include "surfmap/annotate.hpp"
#include "surfmap/fuse.hpp"
#include "surfmap/geometry.hpp"
#include "surfmap/mesh.hpp"
#include "surfmap/types.hpp"

#include <filesystem>
#include <vector>

namespace surfmap::io {

namespace fs = std::filesystem;

AnnotationImage read_png8(const fs::path& path);
void write_png8(const fs::path& path, const Raster<std::uint8_t>& image);
Raster<std::uint16_t> read_png16(const fs::path& path);
void write_png16(const fs::path& path, const Raster<std::uint16_t>& image);

/// Interleaved RGB, `width * 3` bytes per row.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  void set(int col, int row, const std::array<std::uint8_t, 3>& c) {
    std::copy(c.begin(), c.end(), data.begin() + (static_cast<std::size_t>(row) * width + col) * 3);
  }
};
void write_png_rgb(const fs::path& path, const RgbImage& image);
RgbImage colorize(const AnnotationImage& classes);

/// Metres in, millimetres on disk. Depths beyond the 16-bit range are stored as invalid.
DepthImage read_depth(const fs::path& path);
void write_depth(const fs::path& path, const DepthImage& depth);

struct StampedPose {
  double timestamp = 0.0;
  RigidTransformd base_to_world;
};
std::vector<StampedPose> read_poses(const fs::path& path);
void write_poses(const fs::path& path, const std::vector<StampedPose>& poses);

struct Calibration {
  CameraIntrinsics K;
  RigidTransformd base_to_cam;
};
Calibration read_calibration(const fs::path& path);
void write_calibration(const fs::path& path, const Calibration& calib);

/// Rows grouped by track id (ascending) and sorted by time; base_width comes from `widths`.
std::vector<Tracklet> read_tracklets(const fs::path& path, const AgentWidths& widths = {});
void write_tracklets(const fs::path& path, const std::vector<Tracklet>& tracklets);

std::vector<DetectionBox> read_detections(const fs::path& path);
void write_detections(const fs::path& path, const std::vector<DetectionBox>& boxes);

PredictionImage read_prediction(const fs::path& path);
void write_prediction(const fs::path& path, const PredictionImage& pred);

SurfaceMap read_map(const fs::path& path);
void write_map(const fs::path& path, const SurfaceMap& map);

GridGeometry read_geo(const fs::path& path, int width, int height);
void write_geo(const fs::path& path, const GridGeometry& grid);

/// Class PNG plus its .geo sidecar (same stem).
ClassGrid read_class_grid(const fs::path& png);
void write_class_grid(const fs::path& png, const ClassGrid& grid);

SemanticMesh read_mesh(const fs::path& path);
void write_mesh(const fs::path& path, const SemanticMesh& mesh);

/// Throws MissingInput naming the file when it does not exist.
void require_file(const fs::path& path);

/// "000042" style frame file names.
std::string frame_name(std::size_t index, std::string_view extension);

/// Whole string, binary mode; creates parent directories.
void write_text(const fs::path& path, const std::string& text);

}  // namespace surfmap::io
