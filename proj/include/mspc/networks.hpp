#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mspc/adam.hpp"
#include "mspc/module.hpp"

namespace mspc {

/// Desk-scale architecture knobs shared by all four networks.
struct NetworkConfig {
  int image_channels = 3;
  int image_size = 32;
  int base_width = 16;
  int num_blocks = 2;
  int grid_K = 2;
  /// Output scale s in p = q + s * tanh(raw).
  double grid_offset_scale = 1.0;

  /// Throws ConfigError: image_size must be a power of two >= 16,
  /// base_width >= 8, grid_K >= 2, num_blocks >= 0, channels >= 1.
  void validate() const;
};

// ---- building blocks ---------------------------------------------------------

template <class T>
struct Conv2d {
  Parameter<T> weight;  ///< [out, in, k, k]
  Parameter<T> bias;    ///< [out]
  int stride = 1;
  int pad = 0;

  Var<T> operator()(Var<T> x, ParamMode mode) const;
};

template <class T>
struct ConvTranspose2d {
  Parameter<T> weight;  ///< [in, out, k, k]
  Parameter<T> bias;    ///< [out]
  int stride = 2;
  int pad = 1;

  Var<T> operator()(Var<T> x, ParamMode mode) const;
};

template <class T>
struct Dense {
  Parameter<T> weight;  ///< [out, in]
  Parameter<T> bias;    ///< [out]

  Var<T> operator()(Var<T> x, ParamMode mode) const;
};

// ---- networks ----------------------------------------------------------------

/// Residual encoder-decoder: stem conv, two stride-2 downsamplings, residual
/// blocks at 1/4 resolution, two transposed-conv upsamplings, tanh output.
/// Instance normalization after every hidden conv.
template <class T>
class Translator final : public Module<T> {
 public:
  Translator(const NetworkConfig& cfg, uint64_t seed);

  Var<T> forward(Var<T> x, ParamMode mode) const override;
  std::vector<Parameter<T>*> parameters() override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Translator>(*this); }

 private:
  NetworkConfig cfg_;
  Conv2d<T> stem_, down1_, down2_;
  std::vector<std::pair<Conv2d<T>, Conv2d<T>>> blocks_;
  ConvTranspose2d<T> up1_, up2_;
  Conv2d<T> head_;
};

/// PatchGAN-style critic: three stride-2 convolutions then a 3x3 conv to a
/// one-channel logit map of side image_size / 8.
template <class T>
class PatchDiscriminator final : public Module<T> {
 public:
  PatchDiscriminator(const NetworkConfig& cfg, uint64_t seed, const std::string& prefix);

  Var<T> forward(Var<T> x, ParamMode mode) const override;
  std::vector<Parameter<T>*> parameters() override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<PatchDiscriminator>(*this); }

 private:
  NetworkConfig cfg_;
  std::vector<Conv2d<T>> convs_;
};

/// Grid predictor: strided conv encoder, one hidden dense layer, and a
/// zero-initialized dense head emitting 2*K*K offsets. Output
/// p = q + s * tanh(raw), so a fresh network predicts the identity grid.
template <class T>
class TransformerNet final : public Module<T> {
 public:
  TransformerNet(const NetworkConfig& cfg, uint64_t seed);

  /// images [B,C,S,S] -> grids [B,K,K,2]
  Var<T> forward(Var<T> x, ParamMode mode) const override;
  std::vector<Parameter<T>*> parameters() override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<TransformerNet>(*this); }

  int grid_side() const { return cfg_.grid_K; }

 private:
  NetworkConfig cfg_;
  std::vector<Conv2d<T>> convs_;
  Dense<T> hidden_;
  Dense<T> head_;
};

/// G, D, D_T and the T-net, each with its own Adam state.
template <class T>
struct ModelSet {
  NetworkConfig config;
  std::unique_ptr<Module<T>> translator;
  std::unique_ptr<Module<T>> discriminator;
  std::unique_ptr<Module<T>> align_discriminator;
  std::unique_ptr<Module<T>> t_net;
  AdamState<T> opt_translator;
  AdamState<T> opt_discriminator;
  AdamState<T> opt_align_discriminator;
  AdamState<T> opt_t_net;

  ModelSet() = default;
  ModelSet(ModelSet&&) noexcept = default;
  ModelSet& operator=(ModelSet&&) noexcept = default;

  ModelSet clone() const;

  /// All parameters, prefixed "G.", "D.", "D_T.", "T." in that order.
  std::vector<std::pair<std::string, Parameter<T>*>> named_parameters();
};

template <class T>
ModelSet<T> build_models(const NetworkConfig& cfg, uint64_t seed, const AdamConfig& adam = {});

/// Order-sensitive hash of every parameter value; used to assert that a step
/// leaves a network untouched.
template <class T>
uint64_t parameter_checksum(const Module<T>& m);

// ---- checkpoints ---------------------------------------------------------------
//
// Little-endian binary:
//   "MSPC" | u32 version | u64 config digest |
//   repeated { u32 name length | name | u32 rank | u64 extents[rank] | f32 payload }
// Records run to end of file.

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  uint64_t config_digest = 0;
  std::vector<CheckpointRecord> records;
};

void save_checkpoint(const std::string& path, ModelSet<float>& models, uint64_t config_digest);
Checkpoint read_checkpoint(const std::string& path);
/// Copies every record into the matching parameter; names and shapes must
/// match one-to-one.
void apply_checkpoint(const Checkpoint& ckpt, ModelSet<float>& models);

}  // namespace mspc
