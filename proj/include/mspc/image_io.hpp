#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mspc/tensor.hpp"

namespace mspc {

/// 8-bit PNG to [C,H,W] in [-1, 1] (v / 127.5 - 1). Gray and gray+alpha
/// become one channel, RGB and RGBA three; alpha is dropped. 16-bit input
/// is reduced to 8 bits. Throws IoError naming the file.
Tensor<float> read_png(const std::string& path);

/// [C,H,W] with C in {1, 3}, values clamped to [-1, 1] and rounded to 8 bits.
void write_png(const std::string& path, const Tensor<float>& image);

/// Exact inverse of the read quantization for values already on the 8-bit grid.
inline uint8_t to_byte(float v) {
  const float c = v < -1.f ? -1.f : (v > 1.f ? 1.f : v);
  return static_cast<uint8_t>(std::lround((c + 1.f) * 127.5f));
}
inline float from_byte(uint8_t b) { return static_cast<float>(b) / 127.5f - 1.f; }

/// Bilinear resize of [C,H,W] with align-corners sampling.
Tensor<float> resize_bilinear(const Tensor<float>& image, int height, int width);

/// Tiles images [C,h,w] into a rows x cols sheet separated by 1-pixel black lines.
Tensor<float> tile_images(const std::vector<std::vector<Tensor<float>>>& rows);

}  // namespace mspc
