#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "hcma/error.hpp"
#include "hcma/trainer.hpp"

namespace hcma::trainer {

void adamw_step(ad::ParameterSet& params, AdamWState& state, double lr,
                const TrainConfig& cfg) {
  std::vector<double> values = params.flat_values();
  const std::vector<double> grads = params.flat_grads();
  if (state.m.empty()) {
    state.m.assign(values.size(), 0.0);
    state.v.assign(values.size(), 0.0);
  }
  if (state.m.size() != values.size()) {
    throw CompatibilityError("optimizer state does not match the parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double update = (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.adam_eps);
    values[i] = values[i] * decay - lr * update;
  }
  params.set_flat_values(values);
}

double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total == 0) return base;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

losses::LossReport train_step(Model& model, AdamWState& state,
                              std::span<const SceneCache* const> batch,
                              const TrainConfig& cfg, double lr) {
  model.trainable.zero_grad();
  Forward f = forward(model, batch, cfg);
  const std::string bad = f.report.first_non_finite();
  if (!bad.empty()) {
    throw NumericError("non-finite loss term " + bad + " (total " +
                       std::to_string(f.report.total) + ")");
  }
  ad::backward(f.total);
  adamw_step(model.trainable, state, lr, cfg);
  return f.report;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(ad::ParameterSet& params,
                               const std::function<ad::Var()>& loss,
                               const GradCheckOptions& opts) {
  params.zero_grad();
  ad::backward(loss());
  std::vector<double> analytic = params.flat_grads();
  if (opts.corrupt) {
    for (double& g : analytic) g = -g;
  }

  struct Coord {
    std::size_t var, offset, flat;
  };
  std::vector<Coord> coords;
  for (std::size_t v = 0, flat = 0; v < params.size(); ++v) {
    for (std::size_t k = 0; k < params.vars()[v].value().size(); ++k) {
      coords.push_back({v, k, flat++});
    }
  }
  std::mt19937_64 rng(opts.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (coords.size() > opts.samples) coords.resize(opts.samples);

  GradCheckReport report;
  for (const Coord& c : coords) {
    double& x = params.vars()[c.var].mutable_value().data[c.offset];
    const double saved = x;
    x = saved + opts.h;
    const double up = loss().item();
    x = saved - opts.h;
    const double down = loss().item();
    x = saved;
    const double numeric = (up - down) / (2.0 * opts.h);
    const double a = analytic[c.flat];
    const double rel = relative_error(a, numeric);
    ++report.checked;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (rel > opts.tolerance) {
      report.failures.push_back(params.names()[c.var] + "[" + std::to_string(c.offset) +
                                "]: " + std::to_string(a) + " vs " +
                                std::to_string(numeric));
    }
  }
  return report;
}

}  // namespace hcma::trainer
