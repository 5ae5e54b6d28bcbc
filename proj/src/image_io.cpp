#include "mspc/image_io.hpp"

#include <png.h>

#include <cstring>

#include "mspc/error.hpp"

namespace mspc {

Tensor<float> read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError("cannot decode PNG " + path + ": " + img.message);
  const bool colour = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  // Read with an alpha channel and discard it afterwards, so transparent
  // pixels keep their stored colour instead of being composited.
  img.format = colour ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
  const int stored = colour ? 4 : 2;
  const int channels = colour ? 3 : 1;
  const int64_t h = img.height, w = img.width;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path + ": " + msg);
  }
  Tensor<float> out(Shape{channels, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        out.ptr()[(c * h + y) * w + x] = from_byte(buf[static_cast<size_t>((y * w + x) * stored + c)]);
  return out;
}

void write_png(const std::string& path, const Tensor<float>& image) {
  MSPC_REQUIRE(image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3),
               "write_png: expected [1|3,H,W], got " + shape_str(image.shape()));
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<uint8_t> buf(static_cast<size_t>(c * h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t k = 0; k < c; ++k) buf[static_cast<size_t>((y * w + x) * c + k)] = to_byte(image.ptr()[(k * h + y) * w + x]);
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path + ": " + img.message);
}

Tensor<float> resize_bilinear(const Tensor<float>& image, int height, int width) {
  MSPC_REQUIRE(image.rank() == 3 && height > 0 && width > 0, "resize_bilinear: expected [C,H,W] and positive size");
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == height && w == width) return image;
  Tensor<float> out(Shape{c, height, width});
  auto src_pos = [](int64_t i, int64_t out_n, int64_t in_n) {
    return out_n > 1 ? static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1) : 0.0;
  };
  for (int64_t y = 0; y < height; ++y) {
    const double sy = src_pos(y, height, h);
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(sy), h - 1), y1 = std::min<int64_t>(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (int64_t x = 0; x < width; ++x) {
      const double sx = src_pos(x, width, w);
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(sx), w - 1), x1 = std::min<int64_t>(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (int64_t k = 0; k < c; ++k) {
        const float* p = image.ptr() + k * h * w;
        const double v = (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
                         fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
        out.ptr()[(k * height + y) * width + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor<float> tile_images(const std::vector<std::vector<Tensor<float>>>& rows) {
  MSPC_REQUIRE(!rows.empty() && !rows[0].empty(), "tile_images: nothing to tile");
  const Tensor<float>& first = rows[0][0];
  MSPC_REQUIRE(first.rank() == 3, "tile_images: expected [C,H,W] tiles");
  const int64_t c = first.dim(0), h = first.dim(1), w = first.dim(2);
  size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const int64_t H = static_cast<int64_t>(rows.size()) * (h + 1) + 1, W = static_cast<int64_t>(cols) * (w + 1) + 1;
  Tensor<float> out(Shape{c, H, W}, -1.f);
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t k = 0; k < rows[r].size(); ++k) {
      const Tensor<float>& t = rows[r][k];
      MSPC_REQUIRE(t.shape() == first.shape(), "tile_images: tiles differ in shape");
      const int64_t oy = static_cast<int64_t>(r) * (h + 1) + 1, ox = static_cast<int64_t>(k) * (w + 1) + 1;
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h; ++y)
          std::copy_n(t.ptr() + (ch * h + y) * w, w, out.ptr() + (ch * H + oy + y) * W + ox);
    }
  return out;
}

}  // namespace mspc
