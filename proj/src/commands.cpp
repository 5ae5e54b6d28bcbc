#include "mspc/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "mspc/error.hpp"
#include "mspc/image_io.hpp"
#include "mspc/spatial_transformer.hpp"

namespace mspc {
namespace {

namespace fs = std::filesystem;

template <class Fn>
int guarded(std::ostream& err, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\nsnapshot: " << e.snapshot_path() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string output_dir(const ExperimentConfig& cfg, const CommandOptions& opts) {
  return opts.out.empty() ? cfg.output.dir : opts.out;
}

TrainOutputs train_outputs(const ExperimentConfig& cfg, const std::string& dir) {
  TrainOutputs o;
  o.out_dir = dir;
  o.config_digest = config_digest(cfg);
  o.checkpoint_every = cfg.output.checkpoint_every;
  o.sample_every = cfg.output.sample_every;
  o.eval_every = cfg.eval.eval_every;
  o.swd_projections = cfg.eval.metrics.projections;
  return o;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

int thread_budget() {
  const char* env = std::getenv("MSPC_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("MSPC_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {NAN, NAN};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_experiment_config(opts.config);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.out.empty()) cfg.output.dir = opts.out;
  return cfg;
}

TaskDataset make_task(const TaskConfig& task) {
  if (task.name == "shapes") return make_shapes_task(task.seed, task.n, task.size);
  if (task.name == "misaligned") return make_misaligned_task(task.seed, task.n, task.size, task.scale_gap, task.shift_gap);
  if (task.name == "folder") return load_folder_pair(task.source_dir, task.target_dir, task.size);
  throw ConfigError("task.name must be shapes, misaligned or folder, got '" + task.name + "'");
}

RunSummary summarize_run(const ModelSet<float>& models, const TaskDataset& data, const EvalConfig& eval) {
  RunSummary s;
  if (data.has_ground_truth()) s.gt = ground_truth_error(*models.translator, data, eval.tau);
  s.table = alignment_table(models, data.source, data.target, eval);
  return s;
}

std::vector<CompareCell> run_comparison(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
  std::vector<CompareCell> cells;
  for (const auto& r : cfg.compare.regularizers)
    for (uint64_t s : cfg.compare.seeds) cells.push_back({r, s, false, {}, {}});
  const TaskDataset data = make_task(cfg.task);

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) {
      CompareCell& cell = cells[i];
      try {
        ExperimentConfig c = cfg;
        c.train.regularizer = parse_regularizer(cell.regularizer);
        c.train.seed = cell.seed;
        const std::string dir =
            out_dir.empty() ? std::string() : (fs::path(out_dir) / (cell.regularizer + "_seed" + std::to_string(cell.seed))).string();
        TrainResult r = train(c.model, c.train, c.constraint, data, train_outputs(c, dir));
        cell.summary = summarize_run(r.models, data, c.eval.metrics);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return cells;
}

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opts);
    const std::string dir = output_dir(cfg, opts);
    const TaskDataset data = make_task(cfg.task);
    fs::create_directories(dir);
    write_text(fs::path(dir) / "config_digest.txt", digest_hex(config_digest(cfg)) + "\n");
    const TrainResult r = train(cfg.model, cfg.train, cfg.constraint, data, train_outputs(cfg, dir));
    out << "trained " << r.rows.size() << " steps; outputs in " << dir << "\n";
    if (!r.rows.empty()) {
      const LossBundle& l = r.rows.back().losses;
      out << "final r1=" << fmt(l.r1) << " r2=" << fmt(l.r2) << " r3=" << fmt(l.r3) << " r4=" << fmt(l.r4)
          << " g_loss=" << fmt(l.g_loss) << "\n";
    }
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opts);
    if (opts.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    const Checkpoint ckpt = read_checkpoint(opts.checkpoint);
    const uint64_t digest = config_digest(cfg);
    if (ckpt.config_digest != digest)
      throw ConfigError("checkpoint " + opts.checkpoint + " was written for config digest " +
                        digest_hex(ckpt.config_digest) + " but " + opts.config + " has digest " + digest_hex(digest));
    ModelSet<float> models = build_models<float>(cfg.model, cfg.train.seed, cfg.train.adam());
    apply_checkpoint(ckpt, models);
    const TaskDataset data = make_task(cfg.task);
    const RunSummary s = summarize_run(models, data, cfg.eval.metrics);

    const fs::path dir = fs::path(output_dir(cfg, opts)) / "eval";
    fs::create_directories(dir);
    std::string csv = "metric,value\nconfig_digest," + digest_hex(digest) + "\n";
    csv += "div_x_y," + fmt(s.table.x_y) + "\n";
    csv += "div_tx_ty," + fmt(s.table.tx_ty) + "\n";
    csv += "div_gx_y," + fmt(s.table.gx_y) + "\n";
    csv += "div_gtx_ty," + fmt(s.table.gtx_ty) + "\n";
    if (s.gt) csv += "gt_l1," + fmt(s.gt->l1) + "\ngt_accuracy," + fmt(s.gt->accuracy) + "\n";
    write_text(dir / "eval.csv", csv);

    char table[1024];
    std::snprintf(table, sizeof table,
                  "sliced-Wasserstein divergence (%d projections)\n"
                  "  X, Y          %10.6f\n  T(X), T(Y)    %10.6f\n  G(X), Y       %10.6f\n  G(T(X)), T(Y) %10.6f\n",
                  cfg.eval.metrics.projections, s.table.x_y, s.table.tx_ty, s.table.gx_y, s.table.gtx_ty);
    std::string report = table;
    if (s.gt) {
      std::snprintf(table, sizeof table, "ground truth\n  mean L1       %10.6f\n  accuracy@%.2g  %10.6f\n", s.gt->l1,
                    cfg.eval.metrics.tau, s.gt->accuracy);
      report += table;
    }
    write_text(dir / "eval.txt", report);

    std::vector<std::vector<Tensor<float>>> rows(3);
    const Tensor<float> gx = translate_all(*models.translator, data.source);
    for (int64_t i = 0; i < std::min<int64_t>(8, data.source_count()); ++i) {
      rows[0].push_back(data.source_image(i));
      rows[1].push_back(select_leading(gx, i));
      rows[2].push_back(data.has_ground_truth() ? data.ground_truth(data.source_image(i)) : Tensor<float>(gx.shape().size() == 4 ? Shape{gx.dim(1), gx.dim(2), gx.dim(3)} : Shape{1}));
    }
    write_png((dir / "eval_samples.png").string(), tile_images(rows));
    out << report;
    return kExitOk;
  });
}

int cmd_warp(const std::string& image_path, const std::string& grid_path, const std::string& out_path,
             std::ostream& err) {
  return guarded(err, [&] {
    const DeformationGrid<double> grid = load_grid_file(grid_path);
    const Tensor<float> image = read_png(image_path);
    const Tensor<double> img = image.cast<double>();
    const SamplingField<double> field = densify(grid, static_cast<int>(img.dim(1)), static_cast<int>(img.dim(2)));
    write_png(out_path, warp(img, field).cast<float>());
    return kExitOk;
  });
}

int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opts);
    if (cfg.compare.regularizers.size() < 2) throw ConfigError("compare.regularizers must list at least 2 entries");
    if (cfg.compare.seeds.size() < 2) throw ConfigError("compare.seeds must list at least 2 entries");
    const int threads = thread_budget();
    const std::string dir = output_dir(cfg, opts);
    fs::create_directories(dir);
    const std::vector<CompareCell> cells = run_comparison(cfg, dir, threads);

    std::string csv = "regularizer,seed,status,gt_l1,gt_accuracy,div_gx_y,div_gtx_ty,error\n";
    std::map<std::string, std::vector<const CompareCell*>> by_reg;
    size_t failed = 0;
    for (const auto& c : cells) {
      csv += c.regularizer + "," + std::to_string(c.seed) + "," + (c.ok ? "ok" : "failed") + ",";
      if (c.ok) {
        csv += (c.summary.gt ? fmt(c.summary.gt->l1) + "," + fmt(c.summary.gt->accuracy) : std::string(",")) + ",";
        csv += fmt(c.summary.table.gx_y) + "," + fmt(c.summary.table.gtx_ty) + ",";
        by_reg[c.regularizer].push_back(&c);
      } else {
        ++failed;
        std::string e = c.error;
        for (char& ch : e)
          if (ch == ',' || ch == '\n') ch = ';';
        csv += ",,,," + e;
      }
      csv += "\n";
    }
    write_text(fs::path(dir) / "compare.csv", csv);

    std::string table = "regularizer  runs  gt_l1 (mean +- std)      div G(X),Y (mean +- std)\n";
    for (const auto& reg : cfg.compare.regularizers) {
      std::vector<double> l1, div;
      for (const CompareCell* c : by_reg[reg]) {
        if (c->summary.gt) l1.push_back(c->summary.gt->l1);
        div.push_back(c->summary.table.gx_y);
      }
      const auto [ml, sl] = mean_std(l1);
      const auto [md, sd] = mean_std(div);
      char line[256];
      std::snprintf(line, sizeof line, "%-12s %4zu  %.6f +- %.6f      %.6f +- %.6f\n", reg.c_str(), by_reg[reg].size(), ml,
                    sl, md, sd);
      table += line;
    }
    if (failed) table += std::to_string(failed) + " run(s) failed; see compare.csv\n";
    write_text(fs::path(dir) / "compare.txt", table);
    out << table;
    return failed ? kExitFailure : kExitOk;
  });
}

int cmd_make_dataset(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opts);
    const std::string dir = output_dir(cfg, opts);
    const TaskDataset data = make_task(cfg.task);
    write_dataset_folder(data, dir);
    out << "wrote " << data.source_count() << " source and " << data.target_count() << " target images to " << dir
        << "\n";
    return kExitOk;
  });
}

}  // namespace mspc
