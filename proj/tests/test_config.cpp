#include <gtest/gtest.h>

#include <filesystem>

#include "mspc/config.hpp"
#include "mspc/error.hpp"

using namespace mspc;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_experiment_config(text, "exp.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kFull = R"(# small run
[task]
name = "shapes"
n = 16
size = 16
seed = 3

[model]
base_width = 8
num_blocks = 1

[train]
epochs = 2
lr = 1e-3
regularizer = "rsp"
lambda_align = 0.5

[constraint]
a = 2.5
translation_penalty = "literal_r4"

[eval]
projections = 32

[output]
dir = "out/run"

[compare]
regularizers = ["mspc", "none"]
seeds = [1, 2]
)";

}  // namespace

TEST(ConfigText, ParsesScalarsAndArrays) {
  const auto doc = parse_config_text("[train]\nlr = -4.5e-3\nepochs = 7\nflag = true\nname = \"x y\"\nl = [1, 2]\n");
  const auto& t = doc.sections.at("train");
  EXPECT_EQ(std::get<double>(std::get<ConfigScalar>(t.at("lr").value)), -4.5e-3);
  EXPECT_EQ(std::get<int64_t>(std::get<ConfigScalar>(t.at("epochs").value)), 7);
  EXPECT_EQ(std::get<bool>(std::get<ConfigScalar>(t.at("flag").value)), true);
  EXPECT_EQ(std::get<std::string>(std::get<ConfigScalar>(t.at("name").value)), "x y");
  EXPECT_EQ(std::get<std::vector<ConfigScalar>>(t.at("l").value).size(), 2u);
  EXPECT_EQ(t.at("epochs").line, 3);
}

TEST(ConfigText, ErrorsCarrySourceAndLine) {
  EXPECT_NE(error_of("[train]\nlr = \n").find("exp.toml:2"), std::string::npos);
  EXPECT_NE(error_of("[train]\nlr = 1\nlr = 2\n").find("exp.toml:3"), std::string::npos);
  EXPECT_NE(error_of("lr = 1\n").find("exp.toml:1"), std::string::npos);
  EXPECT_NE(error_of("[trian]\n").find("exp.toml:1"), std::string::npos);
  EXPECT_NE(error_of("[train\n").find("exp.toml:1"), std::string::npos);
  EXPECT_NE(error_of("[train]\nname = \"open\n").find("exp.toml:2"), std::string::npos);
}

TEST(ExperimentConfigTest, Defaults) {
  const auto c = parse_experiment_config("");
  EXPECT_EQ(c.task.name, "misaligned");
  EXPECT_EQ(c.task.size, 32);
  EXPECT_EQ(c.model.image_size, 32);
  EXPECT_EQ(c.constraint.a, 3.0);
  EXPECT_EQ(c.train.regularizer, Regularizer::Mspc);
  EXPECT_EQ(c.eval.metrics.projections, 128);
}

TEST(ExperimentConfigTest, FullDocument) {
  const auto c = parse_experiment_config(kFull, "exp.toml");
  EXPECT_EQ(c.task.name, "shapes");
  EXPECT_EQ(c.task.n, 16);
  EXPECT_EQ(c.model.image_size, 16);
  EXPECT_EQ(c.model.num_blocks, 1);
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.train.regularizer, Regularizer::Rsp);
  EXPECT_EQ(c.train.lambda_align, 0.5);
  EXPECT_EQ(c.constraint.a, 2.5);
  EXPECT_EQ(c.constraint.translation_penalty, PenaltyForm::LiteralR4);
  EXPECT_EQ(c.output.dir, "out/run");
  EXPECT_EQ(c.compare.regularizers, (std::vector<std::string>{"mspc", "none"}));
  EXPECT_EQ(c.compare.seeds, (std::vector<uint64_t>{1, 2}));
}

TEST(ExperimentConfigTest, UnknownKeyRejectedWithLine) {
  const auto msg = error_of("[train]\nlr = 0.1\nlearning_rate = 0.1\n");
  EXPECT_NE(msg.find("exp.toml:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
}

TEST(ExperimentConfigTest, WrongTypeRejected) {
  EXPECT_NE(error_of("[train]\nepochs = \"two\"\n").find("exp.toml:2"), std::string::npos);
  EXPECT_NE(error_of("[train]\nregularizer = \"cycle\"\n").find("exp.toml:2"), std::string::npos);
}

TEST(ExperimentConfigTest, ValidationPointsAtTheKey) {
  const auto msg = error_of("[task]\nname = \"shapes\"\n[constraint]\nweight = 1\na = 0.5\n");
  EXPECT_NE(msg.find("exp.toml:5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("constraint.a"), std::string::npos) << msg;
  EXPECT_NE(error_of("[task]\nsize = 20\n").find("exp.toml:2"), std::string::npos);
  EXPECT_NE(error_of("[task]\nname = \"folder\"\nsource_dir = \"/no/such/dir\"\n").find("source_dir"), std::string::npos);
  EXPECT_NE(error_of("[train]\nlr = 0\n").find("train.lr"), std::string::npos);
}

TEST(Digest, IgnoresOutputAndEvalOnly) {
  const auto base = parse_experiment_config(kFull);
  auto other = base;
  other.output.dir = "elsewhere";
  other.eval.metrics.projections = 5;
  other.compare.seeds = {9};
  EXPECT_EQ(config_digest(base), config_digest(other));
  other.train.lr = 2e-3;
  EXPECT_NE(config_digest(base), config_digest(other));
  other = base;
  other.constraint.a = 2.0;
  EXPECT_NE(config_digest(base), config_digest(other));
  EXPECT_EQ(digest_hex(0x1f).size(), 16u);
}

TEST(Digest, CanonicalTextStable) {
  const auto a = parse_experiment_config(kFull), b = parse_experiment_config(kFull);
  EXPECT_EQ(canonical_config(a), canonical_config(b));
  EXPECT_NE(canonical_config(a).find("constraint.a="), std::string::npos);
}

TEST(LoadFile, MissingFileIsConfigError) {
  EXPECT_THROW(load_experiment_config("/no/such/config.toml"), ConfigError);
}

TEST(LoadFile, ShippedConfigsAreValid) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::string(MSPC_SOURCE_DIR) + "/configs")) {
    if (e.path().extension() != ".toml") continue;
    EXPECT_NO_THROW(load_experiment_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 2);
}
