#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mspc/tensor.hpp"

namespace mspc {

/// Unpaired source/target image sets in [-1, 1], stored as [N,C,S,S].
struct TaskDataset {
  std::string name;
  int size = 32;
  int channels = 3;
  uint64_t seed = 0;
  Tensor<float> source;
  Tensor<float> target;
  /// Maps one source image [C,S,S] to its true translation. Empty for
  /// folder data.
  std::function<Tensor<float>(const Tensor<float>&)> ground_truth;
  /// Synthetic tasks only: which underlying shape each image shows.
  std::vector<int> source_shape_ids;
  std::vector<int> target_shape_ids;

  int64_t source_count() const { return source.dim(0); }
  int64_t target_count() const { return target.dim(0); }
  bool has_ground_truth() const { return static_cast<bool>(ground_truth); }
  Tensor<float> source_image(int64_t i) const { return select_leading(source, i); }
  Tensor<float> target_image(int64_t i) const { return select_leading(target, i); }
};

// ---- synthetic tasks ------------------------------------------------------------
//
// Source images show one hard-edged filled polygon or disc in a saturated
// colour on a zero background. The target style outlines the shape in white
// (+1) and fills it with the negated, halved source colour. Background stays
// 0 so that zero padding in the warp is neutral.

/// Foreground mask of a source-style image: any channel with |v| > 0.25.
std::vector<uint8_t> foreground_mask(const Tensor<float>& image);

/// Target-style rendering of a mask, with interior colour taken from
/// `colour_source` at the same pixel.
Tensor<float> render_edges(const std::vector<uint8_t>& mask, const Tensor<float>& colour_source);

/// Moves the content of `image` by scaling about the centre then shifting
/// (normalized units), nearest-neighbour inverse mapping, zero fill.
Tensor<float> respatialize(const Tensor<float>& image, double scale, double shift);

/// The operator mapping a source image to its translation under the gap.
Tensor<float> misaligned_ground_truth(const Tensor<float>& image, double scale_gap, double shift_gap);

/// Throws ConfigError when n < 2 or size < 8.
TaskDataset make_shapes_task(uint64_t seed, int n = 64, int size = 32);

/// Target objects scaled by scale_gap about the centre and shifted by
/// shift_gap along both axes. Throws ConfigError unless
/// scale_gap in [1/3, 3] and |shift_gap| <= 0.25, the default feasible warp range.
TaskDataset make_misaligned_task(uint64_t seed, int n = 64, int size = 32, double scale_gap = 1.5,
                                 double shift_gap = 0.1);

// ---- real image folders ----------------------------------------------------------

/// All *.png files in each directory (sorted by name), resized bilinearly to
/// size x size, grayscale replicated to 3 channels, alpha dropped.
TaskDataset load_folder_pair(const std::string& src_dir, const std::string& tgt_dir, int size);

/// Writes source/ and target/ PNG folders plus manifest.txt.
void write_dataset_folder(const TaskDataset& data, const std::string& dir);

}  // namespace mspc
