#include "mspc/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "mspc/datasets.hpp"
#include "mspc/error.hpp"
#include "mspc/image_io.hpp"
#include "mspc/metrics.hpp"
#include "mspc/ops.hpp"

namespace mspc {

Regularizer parse_regularizer(const std::string& name) {
  if (name == "mspc") return Regularizer::Mspc;
  if (name == "gcfixed") return Regularizer::GcFixed;
  if (name == "rsp") return Regularizer::Rsp;
  if (name == "vat") return Regularizer::Vat;
  if (name == "mt") return Regularizer::Mt;
  if (name == "none") return Regularizer::None;
  throw ConfigError("unknown regularizer '" + name + "' (expected mspc, gcfixed, rsp, vat, mt or none)");
}

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::Mspc: return "mspc";
    case Regularizer::GcFixed: return "gcfixed";
    case Regularizer::Rsp: return "rsp";
    case Regularizer::Vat: return "vat";
    case Regularizer::Mt: return "mt";
    case Regularizer::None: return "none";
  }
  return "?";
}

GeneratorLossForm parse_generator_loss_form(const std::string& name) {
  if (name == "nonsaturating") return GeneratorLossForm::NonSaturating;
  if (name == "saturating") return GeneratorLossForm::Saturating;
  throw ConfigError("unknown generator_loss_form '" + name + "' (expected nonsaturating or saturating)");
}

std::string to_string(GeneratorLossForm f) {
  return f == GeneratorLossForm::NonSaturating ? "nonsaturating" : "saturating";
}

std::string to_string(TransformFamily f) {
  static const char* names[] = {"rotation", "crop", "zoom_in", "zoom_out", "stretch", "squeeze"};
  return names[static_cast<int>(f)];
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  if (epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (!(lambda_consistency >= 0.0) || !(lambda_align >= 0.0))
    throw ConfigError("train.lambda_consistency and train.lambda_align must be non-negative");
  if (!(vat_epsilon >= 0.0)) throw ConfigError("train.vat_epsilon must be non-negative");
  if (!(vat_xi > 0.0)) throw ConfigError("train.vat_xi must be positive");
  if (!(mt_decay >= 0.0 && mt_decay <= 1.0)) throw ConfigError("train.mt_decay must lie in [0, 1]");
}

bool LossBundle::finite() const {
  for (double v : {r1, r2, r3, r4, d_loss, dt_loss, g_loss})
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

template <class T>
Var<T> warp_by(Var<T> images, Var<T> grids) {
  return warp(images, densify(grids, static_cast<int>(images.dim(2)), static_cast<int>(images.dim(3))));
}

/// Generator-side adversarial loss on fake logits.
template <class T>
Var<T> generator_adv(Var<T> fake_logits, GeneratorLossForm form) {
  if (form == GeneratorLossForm::NonSaturating) return ops::mean(ops::softplus(ops::neg(fake_logits)));
  // E log(1 - s(l)) = -E softplus(l)
  return ops::neg(ops::mean(ops::softplus(fake_logits)));
}

/// T's alignment objective: make T(y) look fake and G(T(x)) look real to a
/// frozen D_T. The saturating form is the negated discriminator loss.
template <class T>
Var<T> transformer_align(Var<T> real_logits, Var<T> fake_logits, GeneratorLossForm form) {
  if (form == GeneratorLossForm::NonSaturating)
    return ops::add(ops::mean(ops::softplus(real_logits)), ops::mean(ops::softplus(ops::neg(fake_logits))));
  return ops::neg(ops::gan_logistic_terms(real_logits, fake_logits).d_loss);
}

template <class T>
double violation_rate(const Tensor<T>& grids, const ConstraintConfig& cfg) {
  const auto per_image = unstack_grids(grids);
  if (per_image.empty()) return 0.0;
  size_t bad = 0;
  for (const auto& g : per_image) bad += feasibility_report(g, cfg).feasible() ? 0 : 1;
  return static_cast<double>(bad) / static_cast<double>(per_image.size());
}

template <class T>
Tensor<T> grid_tensor(const DeformationGrid<double>& g, int64_t batch) {
  const Tensor<T> one = g.points.template cast<T>();
  Tensor<T> out(Shape{batch, g.K, g.K, 2});
  for (int64_t b = 0; b < batch; ++b) std::copy(one.ptr(), one.ptr() + one.size(), out.ptr() + b * one.size());
  return out;
}

template <class T>
double item(Var<T> v) {
  return static_cast<double>(v.value().item());
}

}  // namespace

// ---- baseline building blocks ------------------------------------------------

template <class T>
Tensor<T> vat_perturbation(const Module<T>& g, const Tensor<T>& x, double epsilon, double xi, std::mt19937_64& rng) {
  MSPC_REQUIRE(x.rank() == 4, "vat_perturbation: expected images [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t batch = x.dim(0);
  const size_t per = x.size() / static_cast<size_t>(batch);
  Tensor<T> noise(x.shape());
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int64_t b = 0; b < batch; ++b) {
    T* d = noise.ptr() + b * static_cast<int64_t>(per);
    double n2 = 0;
    for (size_t i = 0; i < per; ++i) {
      d[i] = static_cast<T>(dist(rng));
      n2 += static_cast<double>(d[i]) * static_cast<double>(d[i]);
    }
    const T inv = static_cast<T>(n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0);
    for (size_t i = 0; i < per; ++i) d[i] *= inv;
  }
  Tensor<T> out(x.shape());
  if (epsilon == 0.0) return out;

  Tape<T> tape;
  Var<T> xc = tape.constant(x);
  Var<T> d = tape.variable(noise);
  Var<T> clean = g.forward(xc, ParamMode::Frozen);
  Var<T> noisy = g.forward(ops::add(xc, ops::scale(d, static_cast<T>(xi))), ParamMode::Frozen);
  tape.backward(ops::l1_distance(clean, noisy));
  const Tensor<T> grad = tape.grad(d);
  for (int64_t b = 0; b < batch; ++b) {
    const T* gb = grad.ptr() + b * static_cast<int64_t>(per);
    double n2 = 0;
    for (size_t i = 0; i < per; ++i) n2 += static_cast<double>(gb[i]) * static_cast<double>(gb[i]);
    if (!(n2 > 0)) continue;
    const T s = static_cast<T>(epsilon / std::sqrt(n2));
    T* ob = out.ptr() + b * static_cast<int64_t>(per);
    for (size_t i = 0; i < per; ++i) ob[i] = gb[i] * s;
  }
  return out;
}

template <class T>
Var<T> mt_consistency(const Module<T>& g, const Module<T>& g_ema, Var<T> x, ParamMode mode) {
  Var<T> teacher = x.tape().constant(g_ema.evaluate(x.value()));
  return ops::l1_distance(g.forward(x, mode), teacher);
}

template <class T>
void ema_update(Module<T>& g_ema, const Module<T>& g, double decay) {
  MSPC_REQUIRE(decay >= 0.0 && decay <= 1.0, "ema_update: decay must lie in [0, 1]");
  auto dst = g_ema.parameters();
  const auto src = g.parameters();
  MSPC_REQUIRE(dst.size() == src.size(), "ema_update: teacher and student differ in parameter count");
  const T a = static_cast<T>(decay), b = static_cast<T>(1.0 - decay);
  for (size_t i = 0; i < dst.size(); ++i) {
    MSPC_REQUIRE(dst[i]->value.shape() == src[i]->value.shape(),
                 "ema_update: shape mismatch at " + dst[i]->name);
    auto out = dst[i]->value.data();
    const auto in = src[i]->value.data();
    for (size_t k = 0; k < out.size(); ++k) out[k] = a * out[k] + b * in[k];
  }
}

namespace {

DeformationGrid<double> affine_grid(int K, double a00, double a01, double a10, double a11, double tx, double ty) {
  DeformationGrid<double> g = DeformationGrid<double>::identity(K);
  for (size_t k = 0; k < g.points.size(); k += 2) {
    const double x = g.points[k], y = g.points[k + 1];
    g.points[k] = a00 * x + a01 * y + tx;
    g.points[k + 1] = a10 * x + a11 * y + ty;
  }
  return g;
}

}  // namespace

RandomTransform rsp_transform(std::mt19937_64& rng, int K, const ConstraintConfig& constraint) {
  constraint.validate();
  // Magnitudes stay inside the feasible set; scaling is further capped at 2.
  const double smax = std::min(constraint.a, 2.0);
  std::uniform_int_distribution<int> pick(0, kTransformFamilies - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto family = static_cast<TransformFamily>(pick(rng));
  const double s = 1.0 + (smax - 1.0) * unit(rng);
  RandomTransform out{family, s, {}};
  switch (family) {
    case TransformFamily::Rotation: {
      const double theta = (unit(rng) * 2.0 - 1.0) * std::numbers::pi / 6.0;
      out.magnitude = theta;
      out.grid = affine_grid(K, std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta), 0, 0);
      break;
    }
    case TransformFamily::Crop: {
      const double reach = std::min(constraint.b_trans, 1.0 - 1.0 / s);
      const double tx = (unit(rng) * 2.0 - 1.0) * reach, ty = (unit(rng) * 2.0 - 1.0) * reach;
      out.grid = affine_grid(K, 1 / s, 0, 0, 1 / s, tx, ty);
      break;
    }
    case TransformFamily::ZoomIn: out.grid = affine_grid(K, 1 / s, 0, 0, 1 / s, 0, 0); break;
    case TransformFamily::ZoomOut: out.grid = affine_grid(K, s, 0, 0, s, 0, 0); break;
    case TransformFamily::Stretch:
    case TransformFamily::Squeeze: {
      const double f = family == TransformFamily::Stretch ? 1 / s : s;
      out.grid = unit(rng) < 0.5 ? affine_grid(K, f, 0, 0, 1, 0, 0) : affine_grid(K, 1, 0, 0, f, 0, 0);
      break;
    }
  }
  return out;
}

RandomTransform rsp_transform(uint64_t seed, int K, const ConstraintConfig& constraint) {
  std::mt19937_64 rng(seed);
  return rsp_transform(rng, K, constraint);
}

DeformationGrid<double> gc_fixed_transform(int K) {
  MSPC_REQUIRE(K >= 2, "gc_fixed_transform: K must be at least 2");
  return affine_grid(K, 0, -1, 1, 0, 0, 0);
}

// ---- Trainer ---------------------------------------------------------------------

template <class T>
Trainer<T>::Trainer(ModelSet<T> models, TrainConfig cfg, ConstraintConfig constraint)
    : models_(std::move(models)), cfg_(cfg), constraint_(constraint) {
  cfg_.validate();
  constraint_.validate();
  MSPC_REQUIRE(models_.translator && models_.discriminator, "Trainer: G and D are required");
  const bool needs_t = cfg_.regularizer == Regularizer::Mspc;
  const bool needs_dt = needs_t || cfg_.regularizer == Regularizer::Vat;
  MSPC_REQUIRE(!needs_t || models_.t_net, "Trainer: the mspc regularizer needs a T-net");
  MSPC_REQUIRE(!needs_dt || models_.align_discriminator, "Trainer: regularizer needs a second discriminator");
  if (cfg_.regularizer == Regularizer::Mt) teacher_ = models_.translator->clone();
  std::seed_seq seq{static_cast<uint32_t>(cfg_.seed), static_cast<uint32_t>(cfg_.seed >> 32), 0x5eedu};
  aux_rng_.seed(seq);
  for (auto* s : {&models_.opt_translator, &models_.opt_discriminator, &models_.opt_align_discriminator,
                  &models_.opt_t_net})
    s->config = cfg_.adam();
}

template <class T>
Tensor<T> Trainer<T>::baseline_grids(int64_t batch) {
  const int K = models_.config.grid_K;
  if (cfg_.regularizer == Regularizer::GcFixed) return grid_tensor<T>(gc_fixed_transform(K), batch);
  std::vector<DeformationGrid<T>> grids;
  for (int64_t b = 0; b < batch; ++b) {
    const auto rt = rsp_transform(aux_rng_, K, constraint_);
    grids.push_back(DeformationGrid<T>{K, rt.grid.points.template cast<T>()});
  }
  return stack_grids(grids);
}

namespace {

template <class T>
void update(Module<T>& m, const GradientMap<T>& grads, AdamState<T>& state) {
  auto ps = m.parameters();
  adam_step<T>(ps, grads, state);
}

}  // namespace

template <class T>
LossBundle Trainer<T>::compute_losses(const Tensor<T>& x, const Tensor<T>& y) {
  // The critic graph with every network frozen carries all four terms.
  LossBundle out;
  {
    Tape<T> tape;
    const Module<T>& G = *models_.translator;
    const Module<T>& D = *models_.discriminator;
    Var<T> X = tape.constant(x), Y = tape.constant(y);
    Var<T> gx = G.forward(X, ParamMode::Frozen);
    out.r1 = item(ops::gan_logistic_terms(D.forward(Y, ParamMode::Frozen), D.forward(gx, ParamMode::Frozen)).d_loss);
    out.d_loss = out.r1;
    switch (cfg_.regularizer) {
      case Regularizer::Mspc: {
        const Module<T>& Tn = *models_.t_net;
        const Module<T>& DT = *models_.align_discriminator;
        Var<T> grid_x = Tn.forward(X, ParamMode::Frozen);
        Var<T> grid_y = Tn.forward(Y, ParamMode::Frozen);
        Var<T> tx = warp_by(X, grid_x), ty = warp_by(Y, grid_y);
        Var<T> gtx = G.forward(tx, ParamMode::Frozen);
        out.r2 = item(ops::gan_logistic_terms(DT.forward(ty, ParamMode::Frozen), DT.forward(gtx, ParamMode::Frozen)).d_loss);
        out.dt_loss = out.r2;
        out.r3 = item(ops::l1_distance(warp_by(gx, grid_x), gtx));
        out.r4 = item(constraint_penalty(grid_x, constraint_));
        out.violation_rate = violation_rate(grid_x.value(), constraint_);
        break;
      }
      case Regularizer::GcFixed:
      case Regularizer::Rsp: {
        Var<T> grids = tape.constant(baseline_grids(x.dim(0)));
        out.r3 = item(ops::l1_distance(warp_by(gx, grids), G.forward(warp_by(X, grids), ParamMode::Frozen)));
        out.r4 = item(constraint_penalty(grids, constraint_));
        break;
      }
      case Regularizer::Vat: {
        const Tensor<T> gamma = vat_perturbation(G, x, cfg_.vat_epsilon, cfg_.vat_xi, aux_rng_);
        Var<T> gxp = G.forward(ops::add(X, tape.constant(gamma)), ParamMode::Frozen);
        const Module<T>& DV = *models_.align_discriminator;
        out.r2 = item(ops::gan_logistic_terms(DV.forward(Y, ParamMode::Frozen), DV.forward(gxp, ParamMode::Frozen)).d_loss);
        out.dt_loss = out.r2;
        out.r3 = item(ops::l1_distance(gx, gxp));
        break;
      }
      case Regularizer::Mt:
        out.r3 = item(mt_consistency(G, *teacher_, X, ParamMode::Frozen));
        break;
      case Regularizer::None: break;
    }
  }
  out.step = step_;
  return out;
}

template <class T>
LossBundle Trainer<T>::critic_step(const Tensor<T>& x, const Tensor<T>& y) {
  LossBundle out;
  Tape<T> tape;
  const Module<T>& G = *models_.translator;
  Module<T>& D = *models_.discriminator;
  const auto train = ParamMode::Trainable, frozen = ParamMode::Frozen;

  Var<T> X = tape.constant(x), Y = tape.constant(y);
  Var<T> gx = G.forward(X, frozen);
  Var<T> total = ops::gan_logistic_terms(D.forward(Y, train), D.forward(tape.detach(gx), train)).d_loss;
  out.r1 = out.d_loss = item(total);

  switch (cfg_.regularizer) {
    case Regularizer::Mspc: {
      Module<T>& Tn = *models_.t_net;
      Module<T>& DT = *models_.align_discriminator;
      // T(y) uses the grid predicted from y; r3 and r4 use the grid from x.
      Var<T> grid_x = Tn.forward(X, train);
      Var<T> grid_y = Tn.forward(Y, train);
      Var<T> tx = warp_by(X, grid_x), ty = warp_by(Y, grid_y);
      Var<T> gtx = G.forward(tx, frozen);

      Var<T> dt = ops::gan_logistic_terms(DT.forward(tape.detach(ty), train), DT.forward(tape.detach(gtx), train)).d_loss;
      out.r2 = out.dt_loss = item(dt);
      total = ops::add(total, dt);

      if (cfg_.lambda_align > 0) {
        Var<T> align = transformer_align(DT.forward(ty, frozen), DT.forward(gtx, frozen), cfg_.generator_loss_form);
        total = ops::add(total, ops::scale(align, static_cast<T>(cfg_.lambda_align)));
      }
      Var<T> r3 = ops::l1_distance(warp_by(gx, grid_x), gtx);
      Var<T> r4 = constraint_penalty(grid_x, constraint_);
      out.r3 = item(r3);
      out.r4 = item(r4);
      out.violation_rate = violation_rate(grid_x.value(), constraint_);
      total = ops::add(total, ops::scale(r3, static_cast<T>(-cfg_.lambda_consistency)));
      total = ops::add(total, r4);

      const GradientMap<T> grads = tape.backward(total);
      update(D, grads, models_.opt_discriminator);
      update(DT, grads, models_.opt_align_discriminator);
      update(Tn, grads, models_.opt_t_net);
      break;
    }
    case Regularizer::Vat: {
      Module<T>& DV = *models_.align_discriminator;
      const Tensor<T> gamma = vat_perturbation(G, x, cfg_.vat_epsilon, cfg_.vat_xi, aux_rng_);
      Var<T> gxp = G.forward(ops::add(X, tape.constant(gamma)), frozen);
      Var<T> dv = ops::gan_logistic_terms(DV.forward(Y, train), DV.forward(gxp, train)).d_loss;
      out.r2 = out.dt_loss = item(dv);
      out.r3 = item(ops::l1_distance(gx, gxp));
      total = ops::add(total, dv);
      const GradientMap<T> grads = tape.backward(total);
      update(D, grads, models_.opt_discriminator);
      update(DV, grads, models_.opt_align_discriminator);
      break;
    }
    default: {
      const GradientMap<T> grads = tape.backward(total);
      update(D, grads, models_.opt_discriminator);
      break;
    }
  }
  out.step = step_;
  return out;
}

template <class T>
LossBundle Trainer<T>::generator_step(const Tensor<T>& x, const Tensor<T>& y) {
  (void)y;
  LossBundle out;
  Tape<T> tape;
  Module<T>& G = *models_.translator;
  const Module<T>& D = *models_.discriminator;
  const auto train = ParamMode::Trainable, frozen = ParamMode::Frozen;

  Var<T> X = tape.constant(x);
  Var<T> gx = G.forward(X, train);
  Var<T> total = generator_adv(D.forward(gx, frozen), cfg_.generator_loss_form);
  const T lc = static_cast<T>(cfg_.lambda_consistency), la = static_cast<T>(cfg_.lambda_align);

  switch (cfg_.regularizer) {
    case Regularizer::Mspc: {
      Var<T> grids = tape.detach(models_.t_net->forward(X, frozen));
      Var<T> gtx = G.forward(warp_by(X, grids), train);
      if (cfg_.lambda_align > 0) {
        Var<T> align = generator_adv(models_.align_discriminator->forward(gtx, frozen), cfg_.generator_loss_form);
        total = ops::add(total, ops::scale(align, la));
      }
      Var<T> r3 = ops::l1_distance(warp_by(gx, grids), gtx);
      out.r3 = item(r3);
      out.r4 = item(constraint_penalty(grids, constraint_));
      total = ops::add(total, ops::scale(r3, lc));
      break;
    }
    case Regularizer::GcFixed:
    case Regularizer::Rsp: {
      Var<T> grids = tape.constant(baseline_grids(x.dim(0)));
      Var<T> gtx = G.forward(warp_by(X, grids), train);
      Var<T> r3 = ops::l1_distance(warp_by(gx, grids), gtx);
      out.r3 = item(r3);
      total = ops::add(total, ops::scale(r3, lc));
      break;
    }
    case Regularizer::Vat: {
      const Tensor<T> gamma = vat_perturbation(static_cast<const Module<T>&>(G), x, cfg_.vat_epsilon, cfg_.vat_xi, aux_rng_);
      Var<T> gxp = G.forward(ops::add(X, tape.constant(gamma)), train);
      if (cfg_.lambda_align > 0) {
        Var<T> align = generator_adv(models_.align_discriminator->forward(gxp, frozen), cfg_.generator_loss_form);
        total = ops::add(total, ops::scale(align, la));
      }
      Var<T> r3 = ops::l1_distance(gx, gxp);
      out.r3 = item(r3);
      total = ops::add(total, ops::scale(r3, lc));
      break;
    }
    case Regularizer::Mt: {
      Var<T> r3 = mt_consistency(static_cast<const Module<T>&>(G), *teacher_, X, train);
      out.r3 = item(r3);
      total = ops::add(total, ops::scale(r3, lc));
      break;
    }
    case Regularizer::None: break;
  }
  out.g_loss = item(total);
  const GradientMap<T> grads = tape.backward(total);
  update(G, grads, models_.opt_translator);
  if (cfg_.regularizer == Regularizer::Mt) ema_update(*teacher_, G, cfg_.mt_decay);
  out.step = step_++;
  return out;
}

// ---- outer loop --------------------------------------------------------------------

std::string metrics_csv_header() {
  return "step,epoch,r1,r2,r3,r4,d_loss,dt_loss,g_loss,violation_rate,eval_l1,eval_swd";
}

std::string metrics_csv_row(const MetricsRow& row) {
  char buf[512];
  const LossBundle& l = row.losses;
  std::snprintf(buf, sizeof buf, "%lld,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,", static_cast<long long>(l.step),
                row.epoch, l.r1, l.r2, l.r3, l.r4, l.d_loss, l.dt_loss, l.g_loss, l.violation_rate);
  std::string s = buf;
  if (row.eval_l1) {
    std::snprintf(buf, sizeof buf, "%.9g", *row.eval_l1);
    s += buf;
  }
  s += ",";
  if (row.eval_swd) {
    std::snprintf(buf, sizeof buf, "%.9g", *row.eval_swd);
    s += buf;
  }
  return s;
}

namespace {

namespace fs = std::filesystem;

Tensor<float> gather(const Tensor<float>& images, const std::vector<int64_t>& order, int64_t start, int batch) {
  const int64_t n = images.dim(0);
  const size_t per = images.size() / static_cast<size_t>(n);
  Shape shape = images.shape();
  shape[0] = batch;
  Tensor<float> out(shape);
  for (int b = 0; b < batch; ++b) {
    const int64_t idx = order[static_cast<size_t>((start + b) % n)];
    std::copy_n(images.ptr() + idx * static_cast<int64_t>(per), per, out.ptr() + b * static_cast<int64_t>(per));
  }
  return out;
}

std::string epoch_name(const std::string& stem, int epoch, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_epoch%04d.%s", stem.c_str(), epoch, ext);
  return buf;
}

bool parameters_finite(ModelSet<float>& m) {
  for (auto& [name, p] : m.named_parameters())
    if (!all_finite(p->value)) return false;
  return true;
}

void write_samples(const std::string& path, const ModelSet<float>& m, const Tensor<float>& source) {
  const int64_t n = std::min<int64_t>(4, source.dim(0));
  Shape shape = source.shape();
  shape[0] = n;
  Tensor<float> x(shape);
  std::copy_n(source.ptr(), x.size(), x.ptr());
  Tape<float> tape;
  Var<float> X = tape.constant(x);
  Var<float> grids = m.t_net->forward(X, ParamMode::Frozen);
  Var<float> tx = warp_by(X, grids);
  Var<float> gx = m.translator->forward(X, ParamMode::Frozen);
  Var<float> gtx = m.translator->forward(tx, ParamMode::Frozen);
  Var<float> tgx = warp_by(gx, grids);
  std::vector<std::vector<Tensor<float>>> rows;
  for (Var<float> v : {X, tx, gx, gtx, tgx}) {
    std::vector<Tensor<float>> row;
    for (int64_t i = 0; i < n; ++i) row.push_back(select_leading(v.value(), i));
    rows.push_back(std::move(row));
  }
  write_png(path, tile_images(rows));
}

}  // namespace

TrainResult train(const NetworkConfig& net, const TrainConfig& cfg, const ConstraintConfig& constraint,
                  const TaskDataset& data, const TrainOutputs& out) {
  net.validate();
  cfg.validate();
  constraint.validate();
  if (data.source.size() == 0 || data.target.size() == 0) throw ConfigError("dataset has an empty domain");
  if (data.channels != net.image_channels || data.size != net.image_size)
    throw ConfigError("dataset is " + std::to_string(data.channels) + "x" + std::to_string(data.size) +
                      " but the model expects " + std::to_string(net.image_channels) + "x" +
                      std::to_string(net.image_size));

  Trainer<float> trainer(build_models<float>(net, cfg.seed, cfg.adam()), cfg, constraint);
  TrainResult result;

  const bool to_disk = !out.out_dir.empty();
  std::ofstream csv;
  if (to_disk) {
    fs::create_directories(out.out_dir);
    csv.open(fs::path(out.out_dir) / "metrics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (fs::path(out.out_dir) / "metrics.csv").string());
    csv << metrics_csv_header() << "\n";
  }
  auto checkpoint = [&](int epoch) {
    if (!to_disk) return;
    const std::string path = (fs::path(out.out_dir) / epoch_name("ckpt", epoch, "mspc")).string();
    save_checkpoint(path, trainer.models(), out.config_digest);
    result.checkpoints.push_back(path);
  };
  checkpoint(0);

  std::seed_seq seq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32), 0xda7au};
  std::mt19937_64 data_rng(seq);
  const int64_t ns = data.source_count(), nt = data.target_count();
  const int64_t steps_per_epoch = std::max<int64_t>(1, std::max(ns, nt) / cfg.batch_size);
  std::vector<int64_t> order_s(static_cast<size_t>(ns)), order_t(static_cast<size_t>(nt));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order_s.begin(), order_s.end(), 0);
    std::iota(order_t.begin(), order_t.end(), 0);
    std::shuffle(order_s.begin(), order_s.end(), data_rng);
    std::shuffle(order_t.begin(), order_t.end(), data_rng);
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      const Tensor<float> x = gather(data.source, order_s, s * cfg.batch_size, cfg.batch_size);
      const Tensor<float> y = gather(data.target, order_t, s * cfg.batch_size, cfg.batch_size);
      LossBundle bundle = trainer.critic_step(x, y);
      const LossBundle g = trainer.generator_step(x, y);
      bundle.g_loss = g.g_loss;

      if (!bundle.finite() || !parameters_finite(trainer.models())) {
        const fs::path dir = to_disk ? fs::path(out.out_dir) : fs::temp_directory_path();
        const std::string snap = (dir / "nan_snapshot.mspc").string();
        save_checkpoint(snap, trainer.models(), out.config_digest);
        throw NumericalError("non-finite loss or parameter at step " + std::to_string(bundle.step), snap);
      }

      MetricsRow row{bundle, epoch, std::nullopt, std::nullopt};
      const bool last = s + 1 == steps_per_epoch;
      if (last && out.eval_every > 0 && (epoch % out.eval_every == 0 || epoch == cfg.epochs)) {
        const Tensor<float> gx = translate_all(*trainer.models().translator, data.source);
        if (data.has_ground_truth())
          row.eval_l1 = ground_truth_error(*trainer.models().translator, data).l1;
        row.eval_swd = sliced_wasserstein(gx, data.target, out.swd_projections, 0);
      }
      if (to_disk) csv << metrics_csv_row(row) << "\n" << std::flush;
      result.rows.push_back(row);
    }
    const bool final_epoch = epoch == cfg.epochs;
    if ((out.checkpoint_every > 0 && epoch % out.checkpoint_every == 0) || final_epoch) checkpoint(epoch);
    if (to_disk && out.write_samples && ((out.sample_every > 0 && epoch % out.sample_every == 0) || final_epoch))
      write_samples((fs::path(out.out_dir) / epoch_name("samples", epoch, "png")).string(), trainer.models(),
                    data.source);
  }
  result.models = std::move(trainer.models());
  return result;
}

#define MSPC_INSTANTIATE_TRAINING(T)                                                                  \
  template Tensor<T> vat_perturbation(const Module<T>&, const Tensor<T>&, double, double, std::mt19937_64&); \
  template Var<T> mt_consistency(const Module<T>&, const Module<T>&, Var<T>, ParamMode);              \
  template void ema_update(Module<T>&, const Module<T>&, double);                                     \
  template class Trainer<T>;

MSPC_INSTANTIATE_TRAINING(float)
MSPC_INSTANTIATE_TRAINING(double)

}  // namespace mspc
