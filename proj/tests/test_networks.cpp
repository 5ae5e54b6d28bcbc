#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mspc/metrics.hpp"
#include "support.hpp"

using namespace mspc;
using namespace mspc::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mspc_networks_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Networks, TranslatorShapeAndRange) {
  NetworkConfig cfg;
  auto m = build_models<float>(cfg, 1);
  std::mt19937_64 rng(1);
  const auto x = random_tensor_t<float>({2, 3, 32, 32}, rng);
  const auto y = m.translator->evaluate(x);
  EXPECT_EQ(y.shape(), (Shape{2, 3, 32, 32}));
  for (float v : y.data()) {
    EXPECT_GT(v, -1.f);
    EXPECT_LT(v, 1.f);
  }
}

TEST(Networks, DiscriminatorLogitMapIsFourByFour) {
  NetworkConfig cfg;
  auto m = build_models<float>(cfg, 1);
  std::mt19937_64 rng(2);
  const auto x = random_tensor_t<float>({2, 3, 32, 32}, rng);
  EXPECT_EQ(m.discriminator->evaluate(x).shape(), (Shape{2, 1, 4, 4}));
  EXPECT_EQ(m.align_discriminator->evaluate(x).shape(), (Shape{2, 1, 4, 4}));
}

TEST(Networks, FreshTransformerPredictsIdentity) {
  NetworkConfig cfg;
  auto m = build_models<float>(cfg, 1);
  std::mt19937_64 rng(3);
  const auto g = m.t_net->evaluate(random_tensor_t<float>({3, 3, 32, 32}, rng));
  const auto q = reference_grid<float>(2);
  ASSERT_EQ(g.shape(), (Shape{3, 2, 2, 2}));
  for (size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g[k], q[k % q.size()]);
}

TEST(Networks, ParameterCountManifest) {
  struct Row {
    int width, blocks;
    size_t g, d, t;
  };
  for (const Row& r : {Row{16, 2, 230659, 42417, 42104}, Row{8, 2, 57987, 10969, 15056}}) {
    NetworkConfig cfg;
    cfg.base_width = r.width;
    cfg.num_blocks = r.blocks;
    auto m = build_models<float>(cfg, 0);
    EXPECT_EQ(m.translator->parameter_count(), r.g);
    EXPECT_EQ(m.discriminator->parameter_count(), r.d);
    EXPECT_EQ(m.align_discriminator->parameter_count(), r.d);
    EXPECT_EQ(m.t_net->parameter_count(), r.t);
  }
}

TEST(Networks, TranslatorCountByHand) {
  // stem 3x3 (3->w), down 4x4 (w->2w->4w), blocks of two 3x3 (4w->4w),
  // up 4x4 transposed (4w->2w->w), head 3x3 (w->3). Biases included.
  const int64_t w = 8, blocks = 3;
  auto conv = [](int64_t in, int64_t out, int64_t k) { return in * out * k * k + out; };
  const int64_t expect = conv(3, w, 3) + conv(w, 2 * w, 4) + conv(2 * w, 4 * w, 4) + blocks * 2 * conv(4 * w, 4 * w, 3) +
                         conv(4 * w, 2 * w, 4) + conv(2 * w, w, 4) + conv(w, 3, 3);
  NetworkConfig cfg;
  cfg.base_width = static_cast<int>(w);
  cfg.num_blocks = static_cast<int>(blocks);
  EXPECT_EQ(static_cast<int64_t>(build_models<float>(cfg, 0).translator->parameter_count()), expect);
}

TEST(Networks, SameSeedSameInit) {
  NetworkConfig cfg;
  cfg.base_width = 8;
  auto a = build_models<float>(cfg, 42), b = build_models<float>(cfg, 42), c = build_models<float>(cfg, 43);
  EXPECT_EQ(parameter_checksum(*a.translator), parameter_checksum(*b.translator));
  EXPECT_EQ(parameter_checksum(*a.t_net), parameter_checksum(*b.t_net));
  EXPECT_NE(parameter_checksum(*a.translator), parameter_checksum(*c.translator));
  EXPECT_NE(parameter_checksum(*a.discriminator), parameter_checksum(*a.align_discriminator));
}

TEST(Networks, InitStatistics) {
  NetworkConfig cfg;
  auto m = build_models<double>(cfg, 7);
  double s = 0, s2 = 0;
  size_t n = 0;
  for (auto& [name, p] : m.named_parameters()) {
    if (name.find(".weight") == std::string::npos || name.rfind("T.head", 0) == 0) continue;
    for (double v : p->value.data()) {
      s += v;
      s2 += v * v;
      ++n;
    }
  }
  EXPECT_NEAR(s / n, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(s2 / n), 0.02, 1e-3);
}

TEST(Networks, NamedParametersArePrefixedAndUnique) {
  NetworkConfig cfg;
  cfg.base_width = 8;
  auto m = build_models<float>(cfg, 1);
  std::set<std::string> names;
  for (auto& [name, p] : m.named_parameters()) {
    EXPECT_TRUE(name.rfind("G.", 0) == 0 || name.rfind("D.", 0) == 0 || name.rfind("D_T.", 0) == 0 ||
                name.rfind("T.", 0) == 0)
        << name;
    EXPECT_TRUE(names.insert(name).second) << name;
  }
}

TEST(Networks, ConfigValidation) {
  NetworkConfig cfg;
  cfg.image_size = 24;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.grid_K = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.base_width = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Checkpoint, SaveLoadSaveIsBitIdentical) {
  const auto dir = scratch("roundtrip");
  NetworkConfig cfg;
  cfg.base_width = 8;
  auto m = build_models<float>(cfg, 9);
  // Move off the initial values so every block carries non-trivial data.
  for (auto& [name, p] : m.named_parameters()) {
    std::mt19937_64 rng(std::hash<std::string>{}(name));
    p->value += random_tensor_t<float>(p->value.shape(), rng, -0.01, 0.01);
  }
  save_checkpoint((dir / "a.mspc").string(), m, 0xabcdefULL);
  const auto ck = read_checkpoint((dir / "a.mspc").string());
  EXPECT_EQ(ck.config_digest, 0xabcdefULL);
  auto m2 = build_models<float>(cfg, 1);
  apply_checkpoint(ck, m2);
  save_checkpoint((dir / "b.mspc").string(), m2, 0xabcdefULL);
  EXPECT_EQ(slurp(dir / "a.mspc"), slurp(dir / "b.mspc"));

  std::mt19937_64 rng(4);
  const auto x = random_tensor_t<float>({4, 3, 32, 32}, rng);
  EXPECT_EQ(m.translator->evaluate(x).storage(), m2.translator->evaluate(x).storage());
  EXPECT_EQ(m.discriminator->evaluate(x).storage(), m2.discriminator->evaluate(x).storage());
  EXPECT_EQ(commutativity_residual(m, x), commutativity_residual(m2, x));
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto dir = scratch("corrupt");
  NetworkConfig cfg;
  cfg.base_width = 8;
  auto m = build_models<float>(cfg, 9);
  const auto good = dir / "good.mspc";
  save_checkpoint(good.string(), m, 1);
  auto bytes = slurp(good);

  {
    std::ofstream os(dir / "magic.mspc", std::ios::binary);
    os << "NOPE";
    os.write(bytes.data() + 4, static_cast<std::streamsize>(bytes.size() - 4));
  }
  EXPECT_THROW(read_checkpoint((dir / "magic.mspc").string()), IoError);
  {
    std::ofstream os(dir / "trunc.mspc", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  EXPECT_THROW(read_checkpoint((dir / "trunc.mspc").string()), IoError);
  EXPECT_THROW(read_checkpoint((dir / "missing.mspc").string()), IoError);

  // A checkpoint from a different architecture does not apply.
  NetworkConfig wide = cfg;
  wide.base_width = 16;
  auto other = build_models<float>(wide, 1);
  EXPECT_THROW(apply_checkpoint(read_checkpoint(good.string()), other), std::exception);
}
