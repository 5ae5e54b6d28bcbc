#include "mspc/networks.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_map>

#include "mspc/error.hpp"
#include "mspc/ops.hpp"
#include "mspc/spatial_transformer.hpp"

namespace mspc {
namespace {

constexpr double kInitStd = 0.02;

std::mt19937_64 make_rng(uint64_t seed, uint64_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(stream)};
  return std::mt19937_64(seq);
}

template <class T>
Tensor<T> normal_tensor(const Shape& shape, std::mt19937_64& rng) {
  Tensor<T> t(shape);
  std::normal_distribution<double> dist(0.0, kInitStd);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Conv2d<T> make_conv(const std::string& name, int in, int out, int k, int stride, int pad, std::mt19937_64& rng) {
  Conv2d<T> c;
  c.weight = {name + ".weight", normal_tensor<T>({out, in, k, k}, rng)};
  c.bias = {name + ".bias", Tensor<T>(Shape{out})};
  c.stride = stride;
  c.pad = pad;
  return c;
}

template <class T>
ConvTranspose2d<T> make_convt(const std::string& name, int in, int out, std::mt19937_64& rng) {
  ConvTranspose2d<T> c;
  c.weight = {name + ".weight", normal_tensor<T>({in, out, 4, 4}, rng)};
  c.bias = {name + ".bias", Tensor<T>(Shape{out})};
  return c;
}

template <class T>
Dense<T> make_dense(const std::string& name, int in, int out, std::mt19937_64* rng) {
  Dense<T> d;
  d.weight = {name + ".weight", rng ? normal_tensor<T>({out, in}, *rng) : Tensor<T>(Shape{out, in})};
  d.bias = {name + ".bias", Tensor<T>(Shape{out})};
  return d;
}

template <class T>
Var<T> param(Var<T> like, const Parameter<T>& p, ParamMode mode) {
  return like.tape().parameter(p, mode == ParamMode::Trainable);
}

void require_image(const Shape& s, const NetworkConfig& cfg, const char* who) {
  MSPC_REQUIRE(s.size() == 4 && s[1] == cfg.image_channels && s[2] == cfg.image_size && s[3] == cfg.image_size,
               std::string(who) + ": expected [B," + std::to_string(cfg.image_channels) + "," +
                   std::to_string(cfg.image_size) + "," + std::to_string(cfg.image_size) + "], got " + shape_str(s));
}

template <class T>
Var<T> act(Var<T> x) {
  return ops::leaky_relu(x, T(0.2));
}

}  // namespace

void NetworkConfig::validate() const {
  if (image_channels < 1) throw ConfigError("model.image_channels must be at least 1");
  if (image_size < 16 || !std::has_single_bit(static_cast<unsigned>(image_size)))
    throw ConfigError("model.image_size must be a power of two >= 16, got " + std::to_string(image_size));
  if (base_width < 8) throw ConfigError("model.base_width must be at least 8, got " + std::to_string(base_width));
  if (num_blocks < 0) throw ConfigError("model.num_blocks must be non-negative");
  if (grid_K < 2) throw ConfigError("model.grid_K must be at least 2, got " + std::to_string(grid_K));
  if (!(grid_offset_scale > 0.0) || !std::isfinite(grid_offset_scale))
    throw ConfigError("model.grid_offset_scale must be positive");
}

template <class T>
Var<T> Conv2d<T>::operator()(Var<T> x, ParamMode mode) const {
  return ops::conv2d(x, param(x, weight, mode), param(x, bias, mode), stride, pad);
}

template <class T>
Var<T> ConvTranspose2d<T>::operator()(Var<T> x, ParamMode mode) const {
  return ops::conv_transpose2d(x, param(x, weight, mode), param(x, bias, mode), stride, pad);
}

template <class T>
Var<T> Dense<T>::operator()(Var<T> x, ParamMode mode) const {
  return ops::linear(x, param(x, weight, mode), param(x, bias, mode));
}

// ---- Translator --------------------------------------------------------------

template <class T>
Translator<T>::Translator(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  auto rng = make_rng(seed, 0);
  const int c = cfg.image_channels, w = cfg.base_width;
  stem_ = make_conv<T>("G.stem", c, w, 3, 1, 1, rng);
  down1_ = make_conv<T>("G.down1", w, 2 * w, 4, 2, 1, rng);
  down2_ = make_conv<T>("G.down2", 2 * w, 4 * w, 4, 2, 1, rng);
  for (int i = 0; i < cfg.num_blocks; ++i) {
    const std::string n = "G.block" + std::to_string(i);
    auto a = make_conv<T>(n + ".conv1", 4 * w, 4 * w, 3, 1, 1, rng);
    auto b = make_conv<T>(n + ".conv2", 4 * w, 4 * w, 3, 1, 1, rng);
    blocks_.emplace_back(std::move(a), std::move(b));
  }
  up1_ = make_convt<T>("G.up1", 4 * w, 2 * w, rng);
  up2_ = make_convt<T>("G.up2", 2 * w, w, rng);
  head_ = make_conv<T>("G.head", w, c, 3, 1, 1, rng);
}

template <class T>
Var<T> Translator<T>::forward(Var<T> x, ParamMode mode) const {
  require_image(x.shape(), cfg_, "Translator");
  Var<T> h = act(ops::instance_norm(stem_(x, mode)));
  h = act(ops::instance_norm(down1_(h, mode)));
  h = act(ops::instance_norm(down2_(h, mode)));
  for (const auto& [c1, c2] : blocks_) {
    Var<T> r = act(ops::instance_norm(c1(h, mode)));
    r = ops::instance_norm(c2(r, mode));
    h = ops::add(h, r);
  }
  h = act(ops::instance_norm(up1_(h, mode)));
  h = act(ops::instance_norm(up2_(h, mode)));
  return ops::tanh(head_(h, mode));
}

template <class T>
std::vector<Parameter<T>*> Translator<T>::parameters() {
  std::vector<Parameter<T>*> out;
  auto add_conv = [&](auto& c) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  };
  add_conv(stem_);
  add_conv(down1_);
  add_conv(down2_);
  for (auto& [c1, c2] : blocks_) {
    add_conv(c1);
    add_conv(c2);
  }
  add_conv(up1_);
  add_conv(up2_);
  add_conv(head_);
  return out;
}

// ---- PatchDiscriminator --------------------------------------------------------

template <class T>
PatchDiscriminator<T>::PatchDiscriminator(const NetworkConfig& cfg, uint64_t seed, const std::string& prefix)
    : cfg_(cfg) {
  cfg.validate();
  auto rng = make_rng(seed, prefix == "D" ? 1 : 2);
  const int c = cfg.image_channels, w = cfg.base_width;
  convs_.push_back(make_conv<T>(prefix + ".conv0", c, w, 4, 2, 1, rng));
  convs_.push_back(make_conv<T>(prefix + ".conv1", w, 2 * w, 4, 2, 1, rng));
  convs_.push_back(make_conv<T>(prefix + ".conv2", 2 * w, 4 * w, 4, 2, 1, rng));
  convs_.push_back(make_conv<T>(prefix + ".out", 4 * w, 1, 3, 1, 1, rng));
}

template <class T>
Var<T> PatchDiscriminator<T>::forward(Var<T> x, ParamMode mode) const {
  require_image(x.shape(), cfg_, "PatchDiscriminator");
  Var<T> h = x;
  for (size_t i = 0; i + 1 < convs_.size(); ++i) h = act(convs_[i](h, mode));
  return convs_.back()(h, mode);
}

template <class T>
std::vector<Parameter<T>*> PatchDiscriminator<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

// ---- TransformerNet ------------------------------------------------------------

namespace {
constexpr int kTNetHidden = 32;
}

template <class T>
TransformerNet<T>::TransformerNet(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  auto rng = make_rng(seed, 3);
  const int c = cfg.image_channels, w = cfg.base_width;
  convs_.push_back(make_conv<T>("T.conv0", c, w, 4, 2, 1, rng));
  convs_.push_back(make_conv<T>("T.conv1", w, 2 * w, 4, 2, 1, rng));
  convs_.push_back(make_conv<T>("T.conv2", 2 * w, 2 * w, 4, 2, 1, rng));
  const int side = cfg.image_size / 8;
  hidden_ = make_dense<T>("T.hidden", 2 * w * side * side, kTNetHidden, &rng);
  head_ = make_dense<T>("T.head", kTNetHidden, 2 * cfg.grid_K * cfg.grid_K, nullptr);
}

template <class T>
Var<T> TransformerNet<T>::forward(Var<T> x, ParamMode mode) const {
  require_image(x.shape(), cfg_, "TransformerNet");
  const int64_t batch = x.dim(0);
  const int K = cfg_.grid_K;
  Var<T> h = x;
  for (const auto& c : convs_) h = act(c(h, mode));
  h = ops::reshape(h, Shape{batch, static_cast<int64_t>(h.value().size()) / batch});
  h = act(hidden_(h, mode));
  Var<T> raw = ops::tanh(head_(h, mode));
  Var<T> offsets = ops::reshape(ops::scale(raw, static_cast<T>(cfg_.grid_offset_scale)), Shape{batch, K, K, 2});

  const Tensor<T> q = reference_grid<T>(K);
  Tensor<T> tiled(Shape{batch, K, K, 2});
  for (int64_t b = 0; b < batch; ++b)
    std::copy(q.ptr(), q.ptr() + q.size(), tiled.ptr() + b * q.size());
  return ops::add(x.tape().constant(std::move(tiled)), offsets);
}

template <class T>
std::vector<Parameter<T>*> TransformerNet<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  for (auto* d : {&hidden_, &head_}) {
    out.push_back(&d->weight);
    out.push_back(&d->bias);
  }
  return out;
}

// ---- ModelSet ------------------------------------------------------------------

template <class T>
ModelSet<T> ModelSet<T>::clone() const {
  ModelSet<T> m;
  m.config = config;
  m.translator = translator ? translator->clone() : nullptr;
  m.discriminator = discriminator ? discriminator->clone() : nullptr;
  m.align_discriminator = align_discriminator ? align_discriminator->clone() : nullptr;
  m.t_net = t_net ? t_net->clone() : nullptr;
  m.opt_translator = opt_translator;
  m.opt_discriminator = opt_discriminator;
  m.opt_align_discriminator = opt_align_discriminator;
  m.opt_t_net = opt_t_net;
  return m;
}

template <class T>
std::vector<std::pair<std::string, Parameter<T>*>> ModelSet<T>::named_parameters() {
  std::vector<std::pair<std::string, Parameter<T>*>> out;
  auto add = [&](Module<T>* m, const std::string& prefix) {
    if (!m) return;
    for (auto* p : m->parameters()) {
      // Built-in networks already carry their prefix; stubs may not.
      const bool prefixed = p->name.rfind(prefix, 0) == 0;
      out.emplace_back(prefixed ? p->name : prefix + p->name, p);
    }
  };
  add(translator.get(), "G.");
  add(discriminator.get(), "D.");
  add(align_discriminator.get(), "D_T.");
  add(t_net.get(), "T.");
  return out;
}

template <class T>
ModelSet<T> build_models(const NetworkConfig& cfg, uint64_t seed, const AdamConfig& adam) {
  cfg.validate();
  ModelSet<T> m;
  m.config = cfg;
  m.translator = std::make_unique<Translator<T>>(cfg, seed);
  m.discriminator = std::make_unique<PatchDiscriminator<T>>(cfg, seed, "D");
  m.align_discriminator = std::make_unique<PatchDiscriminator<T>>(cfg, seed, "D_T");
  m.t_net = std::make_unique<TransformerNet<T>>(cfg, seed);
  for (auto* s : {&m.opt_translator, &m.opt_discriminator, &m.opt_align_discriminator, &m.opt_t_net}) s->config = adam;
  return m;
}

template <class T>
uint64_t parameter_checksum(const Module<T>& m) {
  uint64_t h = 1469598103934665603ull;
  for (const auto* p : m.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.ptr());
    for (size_t i = 0; i < p->value.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

// ---- checkpoints -----------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
bool get(std::istream& is, U& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(U)));
}

}  // namespace

void save_checkpoint(const std::string& path, ModelSet<float>& models, uint64_t config_digest) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("MSPC", 4);
  put<uint32_t>(os, kCheckpointVersion);
  put<uint64_t>(os, config_digest);
  for (auto& [name, p] : models.named_parameters()) {
    put<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(os, static_cast<uint32_t>(p->value.rank()));
    for (int64_t e : p->value.shape()) put<uint64_t>(os, static_cast<uint64_t>(e));
    os.write(reinterpret_cast<const char*>(p->value.ptr()), static_cast<std::streamsize>(p->value.size() * 4));
  }
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MSPC", 4) != 0) throw IoError(path + ": not a checkpoint file");
  uint32_t version = 0;
  Checkpoint ck;
  if (!get(is, version) || !get(is, ck.config_digest)) throw IoError(path + ": truncated header");
  if (version != kCheckpointVersion) throw IoError(path + ": unsupported version " + std::to_string(version));
  while (is.peek() != std::char_traits<char>::eof()) {
    CheckpointRecord rec;
    uint32_t len = 0, rank = 0;
    if (!get(is, len) || len > 4096) throw IoError(path + ": corrupt record header");
    rec.name.resize(len);
    if (!is.read(rec.name.data(), len) || !get(is, rank) || rank > 8) throw IoError(path + ": corrupt record " + rec.name);
    size_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t e = 0;
      if (!get(is, e) || e == 0 || e > (1ull << 31)) throw IoError(path + ": bad extent in " + rec.name);
      rec.shape.push_back(static_cast<int64_t>(e));
      n *= e;
    }
    rec.data.resize(n);
    if (!is.read(reinterpret_cast<char*>(rec.data.data()), static_cast<std::streamsize>(n * 4)))
      throw IoError(path + ": truncated payload in " + rec.name);
    ck.records.push_back(std::move(rec));
  }
  return ck;
}

void apply_checkpoint(const Checkpoint& ckpt, ModelSet<float>& models) {
  auto named = models.named_parameters();
  if (named.size() != ckpt.records.size())
    throw IoError("checkpoint has " + std::to_string(ckpt.records.size()) + " tensors, model expects " +
                  std::to_string(named.size()));
  std::unordered_map<std::string, Parameter<float>*> by_name;
  for (auto& [name, p] : named) by_name[name] = p;
  for (const auto& rec : ckpt.records) {
    auto it = by_name.find(rec.name);
    if (it == by_name.end()) throw IoError("checkpoint tensor " + rec.name + " has no counterpart in the model");
    Parameter<float>& p = *it->second;
    if (p.value.shape() != rec.shape)
      throw IoError("checkpoint tensor " + rec.name + " has shape " + shape_str(rec.shape) + ", model expects " +
                    shape_str(p.value.shape()));
    std::copy(rec.data.begin(), rec.data.end(), p.value.ptr());
  }
}

#define MSPC_INSTANTIATE_NETWORKS(T)                                                         \
  template struct Conv2d<T>;                                                                 \
  template struct ConvTranspose2d<T>;                                                        \
  template struct Dense<T>;                                                                  \
  template class Translator<T>;                                                              \
  template class PatchDiscriminator<T>;                                                      \
  template class TransformerNet<T>;                                                          \
  template struct ModelSet<T>;                                                               \
  template ModelSet<T> build_models(const NetworkConfig&, uint64_t, const AdamConfig&);      \
  template uint64_t parameter_checksum(const Module<T>&);

MSPC_INSTANTIATE_NETWORKS(float)
MSPC_INSTANTIATE_NETWORKS(double)

}  // namespace mspc
