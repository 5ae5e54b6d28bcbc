#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mspc/constraints.hpp"
#include "mspc/networks.hpp"

namespace mspc {

struct TaskDataset;

enum class Regularizer { Mspc, GcFixed, Rsp, Vat, Mt, None };
enum class GeneratorLossForm { NonSaturating, Saturating };

Regularizer parse_regularizer(const std::string& name);
std::string to_string(Regularizer r);
GeneratorLossForm parse_generator_loss_form(const std::string& name);
std::string to_string(GeneratorLossForm f);

struct TrainConfig {
  int batch_size = 4;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int epochs = 1;
  double lambda_consistency = 1.0;
  double lambda_align = 1.0;
  GeneratorLossForm generator_loss_form = GeneratorLossForm::NonSaturating;
  Regularizer regularizer = Regularizer::Mspc;
  uint64_t seed = 0;

  double vat_epsilon = 0.1;
  double vat_xi = 1e-3;
  double mt_decay = 0.999;

  /// Throws ConfigError: lr > 0, batch_size >= 1, epochs >= 0, weights >= 0,
  /// vat_epsilon >= 0, vat_xi > 0, mt_decay in [0, 1].
  void validate() const;
  AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
};

/// One mini-batch worth of objective terms, reported in minimization form:
/// r1 and r2 are the discriminator losses -(E log s(real) + E log(1 - s(fake))),
/// so both equal 2 log 2 when every logit is zero. r3 is the commutativity L1,
/// r4 the constraint penalty of the grids predicted from x.
struct LossBundle {
  double r1 = 0, r2 = 0, r3 = 0, r4 = 0;
  double d_loss = 0;   ///< loss D descended in the critic step
  double dt_loss = 0;  ///< loss D_T descended in the critic step
  double g_loss = 0;   ///< total loss G descended in the generator step
  double violation_rate = 0;  ///< fraction of predicted grids outside the feasible set
  int64_t step = 0;

  bool finite() const;
};

// ---- baseline building blocks ------------------------------------------------

/// Adversarial additive perturbation for images [B,C,H,W]: random unit noise
/// d per image, gradient of |G(x) - G(x + xi d)|_1 w.r.t. d, rescaled to L2
/// norm epsilon per image. A zero gradient yields a zero perturbation.
template <class T>
Tensor<T> vat_perturbation(const Module<T>& g, const Tensor<T>& x, double epsilon, double xi, std::mt19937_64& rng);

/// |G(x) - G_ema(x)|_1 with the teacher detached. `mode` applies to the student.
template <class T>
Var<T> mt_consistency(const Module<T>& g, const Module<T>& g_ema, Var<T> x, ParamMode mode);

/// theta_ema <- decay * theta_ema + (1 - decay) * theta.
template <class T>
void ema_update(Module<T>& g_ema, const Module<T>& g, double decay);

enum class TransformFamily { Rotation, Crop, ZoomIn, ZoomOut, Stretch, Squeeze };
inline constexpr int kTransformFamilies = 6;
std::string to_string(TransformFamily f);

struct RandomTransform {
  TransformFamily family;
  double magnitude;  ///< angle in radians for rotation, scale factor otherwise
  DeformationGrid<double> grid;
};

/// Uniformly picks one family and a magnitude inside the feasible set of
/// `constraint`; the result is an affine map of the reference lattice.
RandomTransform rsp_transform(std::mt19937_64& rng, int K, const ConstraintConfig& constraint);
RandomTransform rsp_transform(uint64_t seed, int K = 2, const ConstraintConfig& constraint = {});

/// Fixed 90 degree rotation of the lattice.
DeformationGrid<double> gc_fixed_transform(int K = 2);

// ---- the two-step optimization -------------------------------------------------

/// Owns the optimization state around a ModelSet: configs, the EMA teacher
/// for the mean-teacher baseline, and the auxiliary RNG used by the random
/// baselines. Each step records one tape.
template <class T>
class Trainer {
 public:
  Trainer(ModelSet<T> models, TrainConfig cfg, ConstraintConfig constraint);

  /// All four terms on frozen models; nothing is updated.
  LossBundle compute_losses(const Tensor<T>& x, const Tensor<T>& y);

  /// D ascends r1, D_T ascends r2, T descends
  /// lambda_align * align - lambda_consistency * r3 + r4. G is untouched.
  LossBundle critic_step(const Tensor<T>& x, const Tensor<T>& y);

  /// G descends its adversarial term, lambda_align times its aligned term and
  /// lambda_consistency * r3. D, D_T and T are untouched.
  LossBundle generator_step(const Tensor<T>& x, const Tensor<T>& y);

  ModelSet<T>& models() { return models_; }
  const ModelSet<T>& models() const { return models_; }
  const TrainConfig& config() const { return cfg_; }
  const ConstraintConfig& constraint() const { return constraint_; }
  const Module<T>* teacher() const { return teacher_.get(); }
  int64_t step() const { return step_; }

 private:
  /// Grids [B,K,K,2] for the fixed-transform baselines, drawn per image for RSP.
  Tensor<T> baseline_grids(int64_t batch);

  ModelSet<T> models_;
  TrainConfig cfg_;
  ConstraintConfig constraint_;
  std::unique_ptr<Module<T>> teacher_;
  std::mt19937_64 aux_rng_;
  int64_t step_ = 0;
};

// ---- the outer loop --------------------------------------------------------------

struct TrainOutputs {
  std::string out_dir;          ///< empty: keep everything in memory
  uint64_t config_digest = 0;
  int checkpoint_every = 0;     ///< epochs between checkpoints; 0 means initial and final only
  int sample_every = 0;         ///< epochs between sample grids; 0 means final only
  int eval_every = 1;           ///< epochs between eval_l1 / eval_swd; 0 disables
  int swd_projections = 128;
  bool write_samples = true;
};

struct MetricsRow {
  LossBundle losses;
  int epoch = 0;
  std::optional<double> eval_l1;
  std::optional<double> eval_swd;
};

struct TrainResult {
  ModelSet<float> models;
  std::vector<MetricsRow> rows;
  std::vector<std::string> checkpoints;
};

/// Per batch one critic step then one generator step. Source and target
/// orders are reshuffled independently each epoch from cfg.seed. Writes
/// metrics.csv, ckpt_epochNNNN.mspc and samples_epochNNNN.png under
/// out.out_dir. Throws NumericalError (after writing nan_snapshot.mspc) if a
/// loss or parameter becomes non-finite.
TrainResult train(const NetworkConfig& net, const TrainConfig& cfg, const ConstraintConfig& constraint,
                  const TaskDataset& data, const TrainOutputs& out);

/// CSV header and row formatting shared by train and compare.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

}  // namespace mspc
