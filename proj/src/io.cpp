#include "surfmap/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace surfmap::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  if (mode[0] == 'w' && path.has_parent_path()) fs::create_directories(path.parent_path());
  File f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r' && !fs::exists(path)) throw Error(ErrorKind::MissingInput, "missing " + path.string());
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  return f;
}

void png_warn(png_structp, png_const_charp) {}

// Quiet replacement for libpng's default handler, which prints to stderr.
[[noreturn]] void png_fail(png_structp png, png_const_charp) { png_longjmp(png, 1); }

struct PngData {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;  // 16-bit samples in host order
};

PngData read_png(const fs::path& path) {
  File f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  PngData out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::FormatError, "cannot decode " + path.string());
  }
  {
    png_init_io(png, f.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.bytes.resize(stride * out.height);
    rows.resize(out.height);
    for (int r = 0; r < out.height; ++r) rows[r] = out.bytes.data() + stride * r;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const fs::path& path, int width, int height, int bit_depth, int color_type, const std::uint8_t* data,
               std::size_t stride) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "cannot encode " + path.string());
  }
  {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    for (int r = 0; r < height; ++r) png_write_row(png, data + stride * r);
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
}

// Little-endian binary helpers.
class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    const U u = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(T); ++b) buf_.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, fs::path path) : data_(std::move(data)), path_(std::move(path)) {}
  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    need(sizeof(T));
    U u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b));
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorKind::FormatError, path_.string() + ": truncated");
  }
  std::string data_;
  fs::path path_;
  std::size_t pos_ = 0;
};

std::string read_all(const fs::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_line(const fs::path& path, std::size_t line) {
  throw Error(ErrorKind::FormatError, path.string() + ":" + std::to_string(line) + ": malformed line");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double to_double(const std::string& s, const fs::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    bad_line(path, line);
  }
  if (used != s.size()) bad_line(path, line);
  return v;
}

std::vector<std::pair<std::size_t, std::string>> data_lines(const fs::path& path, bool has_header) {
  std::istringstream in(read_all(path));
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (has_header && n == 1) continue;
    out.emplace_back(n, line);
  }
  return out;
}

}  // namespace

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingInput, "missing " + path.string());
}

std::string frame_name(std::size_t index, std::string_view extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return std::string(buf) + std::string(extension);
}

void write_text(const fs::path& path, const std::string& text) {
  File f = open_file(path, "wb");
  if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
    throw Error(ErrorKind::IoError, "short write to " + path.string());
}

AnnotationImage read_png8(const fs::path& path) {
  const PngData d = read_png(path);
  if (d.bit_depth != 8 || d.channels != 1) throw Error(ErrorKind::FormatError, path.string() + ": expected 8-bit gray");
  AnnotationImage out(d.height, d.width);
  std::memcpy(out.data(), d.bytes.data(), d.bytes.size());
  return out;
}

void write_png8(const fs::path& path, const Raster<std::uint8_t>& image) {
  write_png(path, static_cast<int>(image.cols()), static_cast<int>(image.rows()), 8, PNG_COLOR_TYPE_GRAY,
            image.data(), static_cast<std::size_t>(image.cols()));
}

Raster<std::uint16_t> read_png16(const fs::path& path) {
  const PngData d = read_png(path);
  if (d.bit_depth != 16 || d.channels != 1)
    throw Error(ErrorKind::FormatError, path.string() + ": expected 16-bit gray");
  Raster<std::uint16_t> out(d.height, d.width);
  std::memcpy(out.data(), d.bytes.data(), d.bytes.size());
  return out;
}

void write_png16(const fs::path& path, const Raster<std::uint16_t>& image) {
  write_png(path, static_cast<int>(image.cols()), static_cast<int>(image.rows()), 16, PNG_COLOR_TYPE_GRAY,
            reinterpret_cast<const std::uint8_t*>(image.data()), static_cast<std::size_t>(image.cols()) * 2);
}

void write_png_rgb(const fs::path& path, const RgbImage& image) {
  write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, image.data.data(),
            static_cast<std::size_t>(image.width) * 3);
}

RgbImage colorize(const AnnotationImage& classes) {
  RgbImage out{static_cast<int>(classes.cols()), static_cast<int>(classes.rows()), {}};
  out.data.resize(static_cast<std::size_t>(classes.size()) * 3);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      const int v = classes(r, c);
      out.set(c, r, class_color(v < kNumRasterClasses ? static_cast<SurfaceClass>(v) : SurfaceClass::Unknown));
    }
  return out;
}

DepthImage read_depth(const fs::path& path) { return read_png16(path).cast<float>() / 1000.0f; }

void write_depth(const fs::path& path, const DepthImage& depth) {
  Raster<std::uint16_t> mm(depth.rows(), depth.cols());
  for (Eigen::Index n = 0; n < depth.size(); ++n) {
    const double v = std::round(static_cast<double>(depth.data()[n]) * 1000.0);
    mm.data()[n] = (v > 0 && v <= 65535.0) ? static_cast<std::uint16_t>(v) : 0;
  }
  write_png16(path, mm);
}

std::vector<StampedPose> read_poses(const fs::path& path) {
  std::vector<StampedPose> out;
  for (const auto& [n, line] : data_lines(path, false)) {
    std::istringstream ss(line);
    double v[8];
    for (double& x : v)
      if (!(ss >> x)) bad_line(path, n);
    std::string extra;
    if (ss >> extra) bad_line(path, n);
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-12) bad_line(path, n);
    if (!out.empty() && !(v[0] > out.back().timestamp))
      throw Error(ErrorKind::FormatError, path.string() + ":" + std::to_string(n) + ": timestamps must increase");
    out.push_back({v[0], RigidTransformd(q, Vec3(v[1], v[2], v[3]))});
  }
  return out;
}

void write_poses(const fs::path& path, const std::vector<StampedPose>& poses) {
  std::string s;
  for (const auto& p : poses) {
    const auto& t = p.base_to_world.translation();
    const auto& q = p.base_to_world.rotation();
    for (double v : {p.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z()}) s += fmt(v) + " ";
    s += fmt(q.w()) + "\n";
  }
  write_text(path, s);
}

Calibration read_calibration(const fs::path& path) {
  std::map<std::string, std::vector<double>> kv;
  for (const auto& [n, line] : data_lines(path, false)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof()) bad_line(path, n);
    kv[key] = vals;
  }
  auto scalar = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.size() != 1)
      throw Error(ErrorKind::FormatError, path.string() + ": missing or malformed " + key);
    return it->second[0];
  };
  Calibration c;
  c.K = {scalar("fx"), scalar("fy"), scalar("cx"), scalar("cy"), static_cast<int>(scalar("width")),
         static_cast<int>(scalar("height"))};
  c.K.validate();
  auto it = kv.find("base_to_cam");
  if (it == kv.end() || it->second.size() != 16)
    throw Error(ErrorKind::FormatError, path.string() + ": base_to_cam needs 16 values");
  Eigen::Matrix4d m;
  for (int k = 0; k < 16; ++k) m(k / 4, k % 4) = it->second[k];
  c.base_to_cam = RigidTransformd::FromMatrix(m);
  return c;
}

void write_calibration(const fs::path& path, const Calibration& calib) {
  std::string s = "fx " + fmt(calib.K.fx) + "\nfy " + fmt(calib.K.fy) + "\ncx " + fmt(calib.K.cx) + "\ncy " +
                  fmt(calib.K.cy) + "\nwidth " + std::to_string(calib.K.width) + "\nheight " +
                  std::to_string(calib.K.height) + "\nbase_to_cam";
  const Eigen::Matrix4d m = calib.base_to_cam.matrix();
  for (int k = 0; k < 16; ++k) s += " " + fmt(m(k / 4, k % 4));
  write_text(path, s + "\n");
}

std::vector<Tracklet> read_tracklets(const fs::path& path, const AgentWidths& widths) {
  std::map<int, Tracklet> tracks;
  for (const auto& [n, line] : data_lines(path, true)) {
    const auto f = split_csv(line);
    if (f.size() != 6) bad_line(path, n);
    const int id = static_cast<int>(to_double(f[0], path, n));
    Tracklet& t = tracks[id];
    t.id = id;
    try {
      t.agent_class = parse_agent_class(f[1]);
    } catch (const Error&) {
      bad_line(path, n);
    }
    t.base_width = widths.of(t.agent_class);
    t.points.push_back({to_double(f[2], path, n),
                        WorldPoint(to_double(f[3], path, n), to_double(f[4], path, n), to_double(f[5], path, n))});
  }
  std::vector<Tracklet> out;
  for (auto& [id, t] : tracks) {
    std::stable_sort(t.points.begin(), t.points.end(),
                     [](const TrackPoint& a, const TrackPoint& b) { return a.timestamp < b.timestamp; });
    out.push_back(std::move(t));
  }
  return out;
}

void write_tracklets(const fs::path& path, const std::vector<Tracklet>& tracklets) {
  std::string s = "track_id,agent_class,timestamp,x,y,z\n";
  for (const auto& t : tracklets)
    for (const auto& p : t.points)
      s += std::to_string(t.id) + "," + std::string(agent_class_name(t.agent_class)) + "," + fmt(p.timestamp) + "," +
           fmt(p.position.x()) + "," + fmt(p.position.y()) + "," + fmt(p.position.z()) + "\n";
  write_text(path, s);
}

std::vector<DetectionBox> read_detections(const fs::path& path) {
  std::vector<DetectionBox> out;
  for (const auto& [n, line] : data_lines(path, true)) {
    const auto f = split_csv(line);
    if (f.size() != 7) bad_line(path, n);
    DetectionBox b;
    b.track_id = static_cast<int>(to_double(f[0], path, n));
    try {
      b.agent_class = parse_agent_class(f[1]);
    } catch (const Error&) {
      bad_line(path, n);
    }
    b.timestamp = to_double(f[2], path, n);
    b.u_min = to_double(f[3], path, n);
    b.v_min = to_double(f[4], path, n);
    b.u_max = to_double(f[5], path, n);
    b.v_max = to_double(f[6], path, n);
    out.push_back(b);
  }
  return out;
}

void write_detections(const fs::path& path, const std::vector<DetectionBox>& boxes) {
  std::string s = "track_id,agent_class,timestamp,u_min,v_min,u_max,v_max\n";
  for (const auto& b : boxes)
    s += std::to_string(b.track_id) + "," + std::string(agent_class_name(b.agent_class)) + "," + fmt(b.timestamp) +
         "," + fmt(b.u_min) + "," + fmt(b.v_min) + "," + fmt(b.u_max) + "," + fmt(b.v_max) + "\n";
  write_text(path, s);
}

PredictionImage read_prediction(const fs::path& path) {
  Reader r(read_all(path), path);
  if (r.bytes(4) != "SPRB") throw Error(ErrorKind::FormatError, path.string() + ": bad magic");
  PredictionImage p;
  p.width = static_cast<int>(r.get<std::uint32_t>());
  p.height = static_cast<int>(r.get<std::uint32_t>());
  const int k = r.get<std::uint8_t>();
  p.probabilities.resize(k, static_cast<Eigen::Index>(p.width) * p.height);
  for (Eigen::Index n = 0; n < p.probabilities.cols(); ++n)
    for (int c = 0; c < k; ++c) p.probabilities(c, n) = r.get<float>();
  if (!r.done()) throw Error(ErrorKind::FormatError, path.string() + ": trailing bytes");
  return p;
}

void write_prediction(const fs::path& path, const PredictionImage& pred) {
  Writer w;
  w.bytes("SPRB");
  w.put<std::uint32_t>(pred.width);
  w.put<std::uint32_t>(pred.height);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(pred.probabilities.rows()));
  for (Eigen::Index n = 0; n < pred.probabilities.cols(); ++n)
    for (Eigen::Index c = 0; c < pred.probabilities.rows(); ++c) w.put<float>(pred.probabilities(c, n));
  write_text(path, w.str());
}

SurfaceMap read_map(const fs::path& path) {
  Reader r(read_all(path), path);
  if (r.bytes(4) != "TMAP") throw Error(ErrorKind::FormatError, path.string() + ": bad magic");
  if (r.get<std::uint16_t>() != 1) throw Error(ErrorKind::FormatError, path.string() + ": unsupported version");
  GridGeometry g;
  g.origin_x = r.get<double>();
  g.origin_y = r.get<double>();
  g.resolution = r.get<double>();
  g.width = static_cast<int>(r.get<std::uint32_t>());
  g.height = static_cast<int>(r.get<std::uint32_t>());
  const int k = r.get<std::uint8_t>();
  if (!(g.resolution > 0) || k < 2) throw Error(ErrorKind::FormatError, path.string() + ": bad header");
  SurfaceMap map(g, k);
  Eigen::VectorXd h(k);
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    for (int c = 0; c < k; ++c) h(c) = r.get<float>();
    const std::uint32_t count = r.get<std::uint32_t>();
    const double elev = r.get<float>();
    map.set_cell(cell, h, count, elev);
  }
  if (!r.done()) throw Error(ErrorKind::FormatError, path.string() + ": trailing bytes");
  return map;
}

void write_map(const fs::path& path, const SurfaceMap& map) {
  const GridGeometry& g = map.geometry();
  Writer w;
  w.bytes("TMAP");
  w.put<std::uint16_t>(1);
  w.put<double>(g.origin_x);
  w.put<double>(g.origin_y);
  w.put<double>(g.resolution);
  w.put<std::uint32_t>(g.width);
  w.put<std::uint32_t>(g.height);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(map.num_classes()));
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    for (int c = 0; c < map.num_classes(); ++c)
      w.put<float>(static_cast<float>(map.log_odds()(c, static_cast<Eigen::Index>(cell))));
    w.put<std::uint32_t>(map.counts()[cell]);
    w.put<float>(static_cast<float>(map.elevation_sums()[cell]));
  }
  write_text(path, w.str());
}

GridGeometry read_geo(const fs::path& path, int width, int height) {
  const auto lines = data_lines(path, false);
  if (lines.size() != 1) throw Error(ErrorKind::FormatError, path.string() + ": expected one line");
  std::istringstream ss(lines[0].second);
  GridGeometry g;
  g.width = width;
  g.height = height;
  if (!(ss >> g.origin_x >> g.origin_y >> g.resolution) || !(g.resolution > 0)) bad_line(path, lines[0].first);
  return g;
}

void write_geo(const fs::path& path, const GridGeometry& grid) {
  write_text(path, fmt(grid.origin_x) + " " + fmt(grid.origin_y) + " " + fmt(grid.resolution) + "\n");
}

ClassGrid read_class_grid(const fs::path& png) {
  ClassGrid g;
  g.classes = read_png8(png);
  fs::path geo = png;
  geo.replace_extension(".geo");
  g.geometry = read_geo(geo, static_cast<int>(g.classes.cols()), static_cast<int>(g.classes.rows()));
  return g;
}

void write_class_grid(const fs::path& png, const ClassGrid& grid) {
  write_png8(png, grid.classes);
  fs::path geo = png;
  geo.replace_extension(".geo");
  write_geo(geo, grid.geometry);
}

SemanticMesh read_mesh(const fs::path& path) {
  std::istringstream in(read_all(path));
  std::string magic;
  long nv = -1, nf = -1;
  if (!(in >> magic >> nv >> nf) || magic != "tmesh" || nv < 0 || nf < 0)
    throw Error(ErrorKind::FormatError, path.string() + ": bad header");
  SemanticMesh m;
  m.vertices.resize(3, nv);
  m.faces.resize(3, nf);
  m.face_classes.resize(nf);
  for (long v = 0; v < nv; ++v)
    if (!(in >> m.vertices(0, v) >> m.vertices(1, v) >> m.vertices(2, v)))
      throw Error(ErrorKind::FormatError, path.string() + ": truncated vertex list");
  for (long f = 0; f < nf; ++f) {
    int cls = 0;
    if (!(in >> m.faces(0, f) >> m.faces(1, f) >> m.faces(2, f) >> cls))
      throw Error(ErrorKind::FormatError, path.string() + ": truncated face list");
    if (m.faces.col(f).minCoeff() < 0 || m.faces.col(f).maxCoeff() >= nv || cls < 0 || cls >= kNumRasterClasses)
      throw Error(ErrorKind::FormatError, path.string() + ": face out of range");
    m.face_classes[f] = static_cast<std::uint8_t>(cls);
  }
  return m;
}

void write_mesh(const fs::path& path, const SemanticMesh& mesh) {
  std::string s = "tmesh " + std::to_string(mesh.num_vertices()) + " " + std::to_string(mesh.num_faces()) + "\n";
  for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v)
    s += fmt(mesh.vertices(0, v)) + " " + fmt(mesh.vertices(1, v)) + " " + fmt(mesh.vertices(2, v)) + "\n";
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f)
    s += std::to_string(mesh.faces(0, f)) + " " + std::to_string(mesh.faces(1, f)) + " " +
         std::to_string(mesh.faces(2, f)) + " " + std::to_string(mesh.face_classes[f]) + "\n";
  write_text(path, s);
}

}  // namespace surfmap::io
