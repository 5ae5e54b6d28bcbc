#include <CLI11.hpp>

#include <iostream>

#include "mspc/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mspc: spatially perturbed unpaired image translation"};
  app.require_subcommand(1);

  mspc::CommandOptions opts;
  uint64_t seed = 0;
  std::string config_pos;

  // train, eval, compare and make-dataset share the config flags.
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "experiment config file");
    sub->add_option("config_file", config_pos, "experiment config file (positional form)");
    sub->add_option("--out", opts.out, "output directory, overrides output.dir");
    sub->add_option("--seed", seed, "training seed, overrides train.seed");
  };

  auto* train = app.add_subcommand("train", "train one model set");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", opts.checkpoint, "checkpoint written by train")->required();
  auto* compare = app.add_subcommand("compare", "train every regularizer x seed cell and tabulate");
  add_common(compare);
  auto* make_dataset = app.add_subcommand("make-dataset", "write the configured task as PNG folders");
  add_common(make_dataset);

  std::string image, grid, out_png;
  auto* warp = app.add_subcommand("warp", "warp a PNG through a control grid file");
  warp->add_option("image", image, "input PNG")->required();
  warp->add_option("grid", grid, "grid text file")->required();
  warp->add_option("out", out_png, "output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mspc::kExitConfig;
  }

  if (warp->parsed()) return mspc::cmd_warp(image, grid, out_png, std::cerr);

  if (opts.config.empty()) opts.config = config_pos;
  for (auto* sub : {train, eval, compare, make_dataset})
    if (sub->parsed() && sub->count("--seed")) opts.seed = seed;

  if (train->parsed()) return mspc::cmd_train(opts, std::cout, std::cerr);
  if (eval->parsed()) return mspc::cmd_eval(opts, std::cout, std::cerr);
  if (compare->parsed()) return mspc::cmd_compare(opts, std::cout, std::cerr);
  return mspc::cmd_make_dataset(opts, std::cout, std::cerr);
}
