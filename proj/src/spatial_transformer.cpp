#include "mspc/spatial_transformer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mspc {
namespace {

// Position of pixel `index` on the control lattice: cell and fraction.
template <class T>
struct Basis {
  int cell;
  T frac;
};

template <class T>
std::vector<Basis<T>> lattice_basis(int64_t extent, int K) {
  std::vector<Basis<T>> out(static_cast<size_t>(extent));
  for (int64_t i = 0; i < extent; ++i) {
    const T g = extent > 1 ? static_cast<T>(i) * static_cast<T>(K - 1) / static_cast<T>(extent - 1) : T(0);
    int cell = static_cast<int>(std::floor(g));
    cell = std::clamp(cell, 0, K - 2);
    out[static_cast<size_t>(i)] = {cell, g - static_cast<T>(cell)};
  }
  return out;
}

template <class T>
void densify_forward(const T* grids, int64_t batch, int K, int64_t h, int64_t w, T* fields) {
  const Tensor<T> ref = reference_grid<T>(K);
  const auto bx = lattice_basis<T>(w, K);
  const auto by = lattice_basis<T>(h, K);
  const int64_t kk2 = static_cast<int64_t>(K) * K * 2;
  std::vector<T> disp(static_cast<size_t>(kk2));
  for (int64_t b = 0; b < batch; ++b) {
    const T* g = grids + b * kk2;
    for (int64_t i = 0; i < kk2; ++i) disp[static_cast<size_t>(i)] = g[i] - ref[static_cast<size_t>(i)];
    T* f = fields + b * h * w * 2;
    for (int64_t y = 0; y < h; ++y) {
      const auto [i0, ty] = by[static_cast<size_t>(y)];
      for (int64_t x = 0; x < w; ++x) {
        const auto [j0, tx] = bx[static_cast<size_t>(x)];
        const T w00 = (T(1) - ty) * (T(1) - tx), w01 = (T(1) - ty) * tx, w10 = ty * (T(1) - tx), w11 = ty * tx;
        const T* d00 = &disp[static_cast<size_t>((i0 * K + j0) * 2)];
        const T* d01 = d00 + 2;
        const T* d10 = d00 + 2 * K;
        const T* d11 = d10 + 2;
        T* out = f + (y * w + x) * 2;
        for (int a = 0; a < 2; ++a) {
          const T s = w00 * d00[a] + w01 * d01[a] + w10 * d10[a] + w11 * d11[a];
          const T base = a == 0 ? lattice_coord<T>(x, w) : lattice_coord<T>(y, h);
          out[a] = base + s;
        }
      }
    }
  }
}

template <class T>
void densify_backward(const T* gfields, int64_t batch, int K, int64_t h, int64_t w, T* ggrids) {
  const auto bx = lattice_basis<T>(w, K);
  const auto by = lattice_basis<T>(h, K);
  const int64_t kk2 = static_cast<int64_t>(K) * K * 2;
  for (int64_t b = 0; b < batch; ++b) {
    const T* gf = gfields + b * h * w * 2;
    T* gg = ggrids + b * kk2;
    for (int64_t y = 0; y < h; ++y) {
      const auto [i0, ty] = by[static_cast<size_t>(y)];
      for (int64_t x = 0; x < w; ++x) {
        const auto [j0, tx] = bx[static_cast<size_t>(x)];
        const T w00 = (T(1) - ty) * (T(1) - tx), w01 = (T(1) - ty) * tx, w10 = ty * (T(1) - tx), w11 = ty * tx;
        const T* gin = gf + (y * w + x) * 2;
        T* g00 = gg + (i0 * K + j0) * 2;
        T* g01 = g00 + 2;
        T* g10 = g00 + 2 * K;
        T* g11 = g10 + 2;
        for (int a = 0; a < 2; ++a) {
          g00[a] += w00 * gin[a];
          g01[a] += w01 * gin[a];
          g10[a] += w10 * gin[a];
          g11[a] += w11 * gin[a];
        }
      }
    }
  }
}

// Source position in pixel units. The field is read relative to the pixel's
// own lattice coordinate so an identity field lands exactly on integers.
template <class T>
struct Sample {
  int64_t x0, y0;
  T fx, fy;
};

template <class T>
Sample<T> source_position(const T* f, int64_t x, int64_t y, int64_t h, int64_t w) {
  const T u = static_cast<T>(x) + (f[0] - lattice_coord<T>(x, w)) * static_cast<T>(w - 1) / T(2);
  const T v = static_cast<T>(y) + (f[1] - lattice_coord<T>(y, h)) * static_cast<T>(h - 1) / T(2);
  const T xf = std::floor(u), yf = std::floor(v);
  return {static_cast<int64_t>(xf), static_cast<int64_t>(yf), u - xf, v - yf};
}

template <class T>
void warp_forward(const T* images, const T* fields, int64_t batch, int64_t c, int64_t h, int64_t w, T* out) {
  const int64_t plane = h * w;
  for (int64_t b = 0; b < batch; ++b) {
    const T* img = images + b * c * plane;
    const T* fb = fields + b * plane * 2;
    T* ob = out + b * c * plane;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const auto s = source_position(fb + (y * w + x) * 2, x, y, h, w);
        const bool in_x0 = s.x0 >= 0 && s.x0 < w, in_x1 = s.x0 + 1 >= 0 && s.x0 + 1 < w;
        const bool in_y0 = s.y0 >= 0 && s.y0 < h, in_y1 = s.y0 + 1 >= 0 && s.y0 + 1 < h;
        const T w00 = (T(1) - s.fx) * (T(1) - s.fy), w01 = s.fx * (T(1) - s.fy);
        const T w10 = (T(1) - s.fx) * s.fy, w11 = s.fx * s.fy;
        for (int64_t ch = 0; ch < c; ++ch) {
          const T* p = img + ch * plane;
          T acc = 0;
          if (in_y0 && in_x0) acc += w00 * p[s.y0 * w + s.x0];
          if (in_y0 && in_x1) acc += w01 * p[s.y0 * w + s.x0 + 1];
          if (in_y1 && in_x0) acc += w10 * p[(s.y0 + 1) * w + s.x0];
          if (in_y1 && in_x1) acc += w11 * p[(s.y0 + 1) * w + s.x0 + 1];
          ob[ch * plane + y * w + x] = acc;
        }
      }
    }
  }
}

template <class T>
void warp_backward(const T* images, const T* fields, const T* gout, int64_t batch, int64_t c, int64_t h, int64_t w,
                   T* gimages, T* gfields) {
  const int64_t plane = h * w;
  const T sx = static_cast<T>(w - 1) / T(2), sy = static_cast<T>(h - 1) / T(2);
  for (int64_t b = 0; b < batch; ++b) {
    const T* img = images + b * c * plane;
    const T* fb = fields + b * plane * 2;
    const T* gb = gout + b * c * plane;
    T* gi = gimages ? gimages + b * c * plane : nullptr;
    T* gf = gfields ? gfields + b * plane * 2 : nullptr;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const auto s = source_position(fb + (y * w + x) * 2, x, y, h, w);
        const bool in_x0 = s.x0 >= 0 && s.x0 < w, in_x1 = s.x0 + 1 >= 0 && s.x0 + 1 < w;
        const bool in_y0 = s.y0 >= 0 && s.y0 < h, in_y1 = s.y0 + 1 >= 0 && s.y0 + 1 < h;
        const T w00 = (T(1) - s.fx) * (T(1) - s.fy), w01 = s.fx * (T(1) - s.fy);
        const T w10 = (T(1) - s.fx) * s.fy, w11 = s.fx * s.fy;
        const int64_t i00 = s.y0 * w + s.x0;
        T du = 0, dv = 0;
        for (int64_t ch = 0; ch < c; ++ch) {
          const T g = gb[ch * plane + y * w + x];
          if (g == T(0)) continue;
          const T* p = img + ch * plane;
          const T u00 = in_y0 && in_x0 ? p[i00] : T(0);
          const T u01 = in_y0 && in_x1 ? p[i00 + 1] : T(0);
          const T u10 = in_y1 && in_x0 ? p[i00 + w] : T(0);
          const T u11 = in_y1 && in_x1 ? p[i00 + w + 1] : T(0);
          if (gi) {
            T* q = gi + ch * plane;
            if (in_y0 && in_x0) q[i00] += w00 * g;
            if (in_y0 && in_x1) q[i00 + 1] += w01 * g;
            if (in_y1 && in_x0) q[i00 + w] += w10 * g;
            if (in_y1 && in_x1) q[i00 + w + 1] += w11 * g;
          }
          du += g * ((T(1) - s.fy) * (u01 - u00) + s.fy * (u11 - u10));
          dv += g * ((T(1) - s.fx) * (u10 - u00) + s.fx * (u11 - u01));
        }
        if (gf) {
          gf[(y * w + x) * 2] += du * sx;
          gf[(y * w + x) * 2 + 1] += dv * sy;
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> reference_grid(int K) {
  MSPC_REQUIRE(K >= 2, "control grid side K must be at least 2, got " + std::to_string(K));
  Tensor<T> q(Shape{K, K, 2});
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      q[static_cast<size_t>((i * K + j) * 2)] = lattice_coord<T>(j, K);
      q[static_cast<size_t>((i * K + j) * 2 + 1)] = lattice_coord<T>(i, K);
    }
  return q;
}

template <class T>
SamplingField<T> densify(const DeformationGrid<T>& grid, int height, int width) {
  MSPC_REQUIRE(grid.K >= 2, "densify: K must be at least 2");
  MSPC_REQUIRE(grid.points.shape() == (Shape{grid.K, grid.K, 2}), "densify: grid points must be [K,K,2]");
  MSPC_REQUIRE(height >= 2 && width >= 2, "densify: field must be at least 2x2");
  SamplingField<T> f{Tensor<T>(Shape{height, width, 2})};
  densify_forward(grid.points.ptr(), 1, grid.K, height, width, f.coords.ptr());
  return f;
}

template <class T>
Tensor<T> warp(const Tensor<T>& image, const SamplingField<T>& field) {
  MSPC_REQUIRE(image.rank() == 3, "warp: image must be [C,H,W], got " + shape_str(image.shape()));
  MSPC_REQUIRE(field.coords.rank() == 3 && field.height() == image.dim(1) && field.width() == image.dim(2) &&
                   field.coords.dim(2) == 2,
               "warp: field " + shape_str(field.coords.shape()) + " does not match image " + shape_str(image.shape()));
  Tensor<T> out(image.shape());
  warp_forward(image.ptr(), field.coords.ptr(), 1, image.dim(0), image.dim(1), image.dim(2), out.ptr());
  return out;
}

template <class T>
Tensor<T> stack_grids(const std::vector<DeformationGrid<T>>& grids) {
  std::vector<Tensor<T>> pts;
  pts.reserve(grids.size());
  for (const auto& g : grids) pts.push_back(g.points);
  return stack<T>(pts);
}

template <class T>
std::vector<DeformationGrid<T>> unstack_grids(const Tensor<T>& grids) {
  MSPC_REQUIRE(grids.rank() == 4 && grids.dim(1) == grids.dim(2) && grids.dim(3) == 2,
               "unstack_grids: expected [B,K,K,2], got " + shape_str(grids.shape()));
  std::vector<DeformationGrid<T>> out;
  const int K = static_cast<int>(grids.dim(1));
  for (int64_t b = 0; b < grids.dim(0); ++b)
    out.push_back({K, slice_leading(grids, b, 1).reshaped(Shape{K, K, 2})});
  return out;
}

template <class T>
Var<T> densify(Var<T> grids, int height, int width) {
  const auto& gs = grids.shape();
  MSPC_REQUIRE(gs.size() == 4 && gs[1] == gs[2] && gs[3] == 2, "densify: grids must be [B,K,K,2], got " + shape_str(gs));
  const int K = static_cast<int>(gs[1]);
  MSPC_REQUIRE(K >= 2, "densify: K must be at least 2, got " + std::to_string(K));
  MSPC_REQUIRE(height >= 2 && width >= 2, "densify: field must be at least 2x2");
  const int64_t batch = gs[0];
  Tensor<T> out(Shape{batch, height, width, 2});
  densify_forward(grids.value().ptr(), batch, K, height, width, out.ptr());
  const int ig = grids.id();
  return grids.tape().record(std::move(out), {grids}, [=](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    densify_backward(g.ptr(), batch, K, height, width, t.grad_buffer(ig).ptr());
  });
}

template <class T>
Var<T> warp(Var<T> images, Var<T> fields) {
  const auto& is = images.shape();
  const auto& fs = fields.shape();
  MSPC_REQUIRE(is.size() == 4, "warp: images must be [B,C,H,W], got " + shape_str(is));
  MSPC_REQUIRE(fs.size() == 4 && fs[0] == is[0] && fs[1] == is[2] && fs[2] == is[3] && fs[3] == 2,
               "warp: field " + shape_str(fs) + " does not match images " + shape_str(is));
  const int64_t batch = is[0], c = is[1], h = is[2], w = is[3];
  Tensor<T> out(is);
  warp_forward(images.value().ptr(), fields.value().ptr(), batch, c, h, w, out.ptr());
  const int ii = images.id(), iff = fields.id();
  return images.tape().record(std::move(out), {images, fields}, [=](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    T* gi = t.requires_grad(ii) ? t.grad_buffer(ii).ptr() : nullptr;
    T* gf = t.requires_grad(iff) ? t.grad_buffer(iff).ptr() : nullptr;
    warp_backward(t.value(ii).ptr(), t.value(iff).ptr(), g.ptr(), batch, c, h, w, gi, gf);
  });
}

template <class T>
Var<T> predict_grid(const Module<T>& t_net, Var<T> images, ParamMode mode) {
  Var<T> grids = t_net.forward(images, mode);
  MSPC_REQUIRE(grids.shape().size() == 4 && grids.dim(0) == images.dim(0) && grids.dim(3) == 2,
               "predict_grid: T-net must emit [B,K,K,2], got " + shape_str(grids.shape()));
  return grids;
}

template <class T>
Var<T> apply_T(const Module<T>& t_net, Var<T> source, Var<T> target, ParamMode mode) {
  MSPC_REQUIRE(source.shape() == target.shape(),
               "apply_T: source " + shape_str(source.shape()) + " and target " + shape_str(target.shape()) +
                   " must share resolution");
  Var<T> grids = predict_grid(t_net, source, mode);
  Var<T> fields = densify(grids, static_cast<int>(target.dim(2)), static_cast<int>(target.dim(3)));
  return warp(target, fields);
}

void write_grid_text(std::ostream& os, const DeformationGrid<double>& grid) {
  os << grid.K << '\n' << std::setprecision(17);
  for (int i = 0; i < grid.K; ++i)
    for (int j = 0; j < grid.K; ++j) {
      const auto p = grid.at(i, j);
      os << p[0] << ' ' << p[1] << '\n';
    }
}

DeformationGrid<double> read_grid_text(std::istream& is) {
  std::string line;
  int lineno = 0;
  int K = -1;
  std::vector<double> coords;
  auto fail = [&](const std::string& why) {
    throw ConfigError("grid file line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (K < 0) {
      if (!(ls >> K)) fail("expected grid side K, got '" + line + "'");
      std::string rest;
      if (ls >> rest) fail("unexpected trailing text after K");
      if (K < 2) fail("grid side K must be at least 2, got " + std::to_string(K));
      continue;
    }
    double x = 0, y = 0;
    if (!(ls >> x >> y)) fail("expected two coordinates, got '" + line + "'");
    std::string rest;
    if (ls >> rest) fail("unexpected trailing text '" + rest + "'");
    if (!std::isfinite(x) || !std::isfinite(y)) fail("coordinates must be finite");
    if (coords.size() == static_cast<size_t>(K * K * 2)) fail("more than K*K coordinate pairs");
    coords.push_back(x);
    coords.push_back(y);
  }
  if (K < 0) fail("empty grid file");
  if (coords.size() != static_cast<size_t>(K * K * 2))
    fail("expected " + std::to_string(K * K) + " coordinate pairs, found " + std::to_string(coords.size() / 2));
  return DeformationGrid<double>{K, Tensor<double>(Shape{K, K, 2}, std::move(coords))};
}

DeformationGrid<double> load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file " + path);
  try {
    return read_grid_text(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_grid_file(const std::string& path, const DeformationGrid<double>& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write grid file " + path);
  write_grid_text(out, grid);
}

#define MSPC_INSTANTIATE_ST(T)                                                     \
  template Tensor<T> reference_grid<T>(int);                                       \
  template SamplingField<T> densify(const DeformationGrid<T>&, int, int);          \
  template Tensor<T> warp(const Tensor<T>&, const SamplingField<T>&);              \
  template Tensor<T> stack_grids(const std::vector<DeformationGrid<T>>&);          \
  template std::vector<DeformationGrid<T>> unstack_grids(const Tensor<T>&);        \
  template Var<T> densify(Var<T>, int, int);                                       \
  template Var<T> warp(Var<T>, Var<T>);                                            \
  template Var<T> predict_grid(const Module<T>&, Var<T>, ParamMode);               \
  template Var<T> apply_T(const Module<T>&, Var<T>, Var<T>, ParamMode);

MSPC_INSTANTIATE_ST(float)
MSPC_INSTANTIATE_ST(double)

}  // namespace mspc
