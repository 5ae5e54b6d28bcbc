#include "mspc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "mspc/error.hpp"
#include "mspc/image_io.hpp"
#include "mspc/spatial_transformer.hpp"

namespace mspc {
namespace {

namespace fs = std::filesystem;

constexpr double kMaskThreshold = 0.25;
constexpr float kEdgeValue = 1.f;
constexpr float kInteriorGain = -0.5f;
constexpr double kMaxScaleGap = 3.0;
constexpr double kMaxShiftGap = 0.25;

struct ShapeSpec {
  bool disc = true;
  double cx = 0, cy = 0, radius = 0.3;
  std::vector<std::array<double, 2>> vertices;  ///< polygons only, absolute coordinates
  std::array<float, 3> colour{};
};

ShapeSpec sample_shape(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ShapeSpec s;
  s.disc = u(rng) < 0.4;
  s.cx = (u(rng) * 2 - 1) * 0.25;
  s.cy = (u(rng) * 2 - 1) * 0.25;
  s.radius = 0.2 + 0.15 * u(rng);
  if (!s.disc) {
    const int n = 3 + static_cast<int>(u(rng) * 4);  // 3..6 vertices
    const double start = u(rng) * 2 * std::numbers::pi;
    for (int k = 0; k < n; ++k) {
      // Evenly spread angles with jitter keep the polygon simple (star-shaped).
      const double ang = start + 2 * std::numbers::pi * (k + 0.35 * (u(rng) - 0.5)) / n;
      const double r = s.radius * (0.8 + 0.2 * u(rng));
      s.vertices.push_back({s.cx + r * std::cos(ang), s.cy + r * std::sin(ang)});
    }
  }
  for (auto& c : s.colour) {
    const float mag = static_cast<float>(0.6 + 0.4 * u(rng));
    c = u(rng) < 0.5 ? -mag : mag;
  }
  return s;
}

bool inside(const ShapeSpec& s, double x, double y) {
  if (s.disc) return std::hypot(x - s.cx, y - s.cy) <= s.radius;
  bool in = false;
  const size_t n = s.vertices.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = s.vertices[i];
    const auto& b = s.vertices[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
  }
  return in;
}

Tensor<float> render_source(const ShapeSpec& s, int size) {
  Tensor<float> img(Shape{3, size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (inside(s, lattice_coord<double>(x, size), lattice_coord<double>(y, size)))
        for (int c = 0; c < 3; ++c) img.ptr()[(c * size + y) * size + x] = s.colour[static_cast<size_t>(c)];
  return img;
}

void check_task_args(int n, int size) {
  if (n < 2) throw ConfigError("task.n must be at least 2, got " + std::to_string(n));
  if (size < 8) throw ConfigError("task.size must be at least 8, got " + std::to_string(size));
}

/// Builds a synthetic task: n shapes, each rendered once per domain, with
/// the two domain orders drawn independently.
TaskDataset build_task(const std::string& name, uint64_t seed, int n, int size,
                       std::function<Tensor<float>(const Tensor<float>&)> gt) {
  check_task_args(n, size);
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x5a4eu};
  std::mt19937_64 rng(seq);
  std::vector<ShapeSpec> shapes;
  for (int i = 0; i < n; ++i) shapes.push_back(sample_shape(rng));

  TaskDataset d;
  d.name = name;
  d.size = size;
  d.channels = 3;
  d.seed = seed;
  d.source_shape_ids.resize(static_cast<size_t>(n));
  d.target_shape_ids.resize(static_cast<size_t>(n));
  std::iota(d.source_shape_ids.begin(), d.source_shape_ids.end(), 0);
  std::iota(d.target_shape_ids.begin(), d.target_shape_ids.end(), 0);
  std::shuffle(d.source_shape_ids.begin(), d.source_shape_ids.end(), rng);
  std::shuffle(d.target_shape_ids.begin(), d.target_shape_ids.end(), rng);

  std::vector<Tensor<float>> src, tgt;
  for (int i = 0; i < n; ++i) {
    src.push_back(render_source(shapes[static_cast<size_t>(d.source_shape_ids[static_cast<size_t>(i)])], size));
    tgt.push_back(gt(render_source(shapes[static_cast<size_t>(d.target_shape_ids[static_cast<size_t>(i)])], size)));
  }
  d.source = stack<float>(src);
  d.target = stack<float>(tgt);
  d.ground_truth = std::move(gt);
  return d;
}

std::vector<fs::path> png_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  if (out.empty()) throw ConfigError("no PNG images in " + dir);
  std::sort(out.begin(), out.end());
  return out;
}

Tensor<float> load_domain(const std::string& dir, int size) {
  std::vector<Tensor<float>> images;
  for (const auto& p : png_files(dir)) {
    Tensor<float> img = read_png(p.string());
    if (img.dim(0) == 1) {
      Tensor<float> rgb(Shape{3, img.dim(1), img.dim(2)});
      for (int c = 0; c < 3; ++c) std::copy_n(img.ptr(), img.size(), rgb.ptr() + c * static_cast<int64_t>(img.size()));
      img = std::move(rgb);
    }
    images.push_back(resize_bilinear(img, size, size));
  }
  return stack<float>(images);
}

}  // namespace

std::vector<uint8_t> foreground_mask(const Tensor<float>& image) {
  MSPC_REQUIRE(image.rank() == 3, "foreground_mask: expected [C,H,W], got " + shape_str(image.shape()));
  const int64_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
  std::vector<uint8_t> mask(static_cast<size_t>(hw), 0);
  for (int64_t k = 0; k < c; ++k)
    for (int64_t i = 0; i < hw; ++i)
      if (std::abs(image.ptr()[k * hw + i]) > kMaskThreshold) mask[static_cast<size_t>(i)] = 1;
  return mask;
}

Tensor<float> render_edges(const std::vector<uint8_t>& mask, const Tensor<float>& colour_source) {
  MSPC_REQUIRE(colour_source.rank() == 3, "render_edges: expected [C,H,W]");
  const int64_t c = colour_source.dim(0), h = colour_source.dim(1), w = colour_source.dim(2);
  MSPC_REQUIRE(static_cast<int64_t>(mask.size()) == h * w, "render_edges: mask size mismatch");
  auto on = [&](int64_t y, int64_t x) {
    return y >= 0 && y < h && x >= 0 && x < w && mask[static_cast<size_t>(y * w + x)] != 0;
  };
  Tensor<float> out(colour_source.shape());
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      if (!on(y, x)) continue;
      const bool edge = !on(y - 1, x) || !on(y + 1, x) || !on(y, x - 1) || !on(y, x + 1);
      for (int64_t k = 0; k < c; ++k) {
        const int64_t i = (k * h + y) * w + x;
        out.ptr()[i] = edge ? kEdgeValue : kInteriorGain * colour_source.ptr()[i];
      }
    }
  return out;
}

Tensor<float> respatialize(const Tensor<float>& image, double scale, double shift) {
  MSPC_REQUIRE(image.rank() == 3 && scale > 0, "respatialize: expected [C,H,W] and positive scale");
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (scale == 1.0 && shift == 0.0) return image;
  Tensor<float> out(image.shape());
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double sx = (lattice_coord<double>(x, w) - shift) / scale;
      const double sy = (lattice_coord<double>(y, h) - shift) / scale;
      const int64_t ix = std::llround((sx + 1) * 0.5 * static_cast<double>(w - 1));
      const int64_t iy = std::llround((sy + 1) * 0.5 * static_cast<double>(h - 1));
      if (ix < 0 || ix >= w || iy < 0 || iy >= h) continue;
      for (int64_t k = 0; k < c; ++k) out.ptr()[(k * h + y) * w + x] = image.ptr()[(k * h + iy) * w + ix];
    }
  return out;
}

Tensor<float> misaligned_ground_truth(const Tensor<float>& image, double scale_gap, double shift_gap) {
  const Tensor<float> moved = respatialize(image, scale_gap, shift_gap);
  return render_edges(foreground_mask(moved), moved);
}

TaskDataset make_shapes_task(uint64_t seed, int n, int size) {
  return build_task("shapes", seed, n, size, [](const Tensor<float>& img) { return misaligned_ground_truth(img, 1.0, 0.0); });
}

TaskDataset make_misaligned_task(uint64_t seed, int n, int size, double scale_gap, double shift_gap) {
  if (!(scale_gap >= 1.0 / kMaxScaleGap && scale_gap <= kMaxScaleGap))
    throw ConfigError("task.scale_gap must lie in [1/3, 3], got " + std::to_string(scale_gap));
  if (!(std::abs(shift_gap) <= kMaxShiftGap))
    throw ConfigError("task.shift_gap must lie in [-0.25, 0.25], got " + std::to_string(shift_gap));
  const bool degenerate = scale_gap == 1.0 && shift_gap == 0.0;
  return build_task(degenerate ? "shapes" : "misaligned", seed, n, size, [scale_gap, shift_gap](const Tensor<float>& img) {
    return misaligned_ground_truth(img, scale_gap, shift_gap);
  });
}

TaskDataset load_folder_pair(const std::string& src_dir, const std::string& tgt_dir, int size) {
  if (size < 1) throw ConfigError("task.size must be positive");
  TaskDataset d;
  d.name = "folder";
  d.size = size;
  d.channels = 3;
  d.source = load_domain(src_dir, size);
  d.target = load_domain(tgt_dir, size);
  return d;
}

void write_dataset_folder(const TaskDataset& data, const std::string& dir) {
  for (const char* sub : {"source", "target"}) fs::create_directories(fs::path(dir) / sub);
  auto dump = [&](const Tensor<float>& images, const char* sub) {
    for (int64_t i = 0; i < images.dim(0); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%04lld.png", static_cast<long long>(i));
      write_png((fs::path(dir) / sub / name).string(), select_leading(images, i));
    }
  };
  dump(data.source, "source");
  dump(data.target, "target");
  std::ofstream m(fs::path(dir) / "manifest.txt");
  if (!m) throw IoError("cannot write " + (fs::path(dir) / "manifest.txt").string());
  m << "name = " << data.name << "\nsize = " << data.size << "\nchannels = " << data.channels
    << "\nseed = " << data.seed << "\nsource_count = " << data.source_count()
    << "\ntarget_count = " << data.target_count() << "\nground_truth = " << (data.has_ground_truth() ? "yes" : "no")
    << "\n";
}

}  // namespace mspc
