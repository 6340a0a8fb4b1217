#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cmot/marmot/marmot.hpp"
#include "cmot/rng.hpp"

namespace cmot::marmot {

enum class CheckedOp { Branch, Ensemble, Marmot };

struct GradCheckOptions {
  double step = 1e-5;
  bool include_params = true;
  bool include_inputs = true;
  nn::Mode mode = nn::Mode::Eval;
  /// Zero every convolution weight and normalisation scale before checking.
  bool zero_branch_weights = false;
  /// Lower bound of the relative-error denominator; 1 makes tiny gradients compare absolutely.
  double denominator_floor = 1.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // parameter or input with the largest error
  std::size_t checked = 0;
};

namespace detail {

struct Probe {
  std::function<Tensor<double>()> forward;
  std::function<void(const Tensor<double>&)> backward;
  std::vector<std::pair<std::string, Tensor<double>*>> values;
  std::vector<Tensor<double>*> grads;
};

inline double total(const Tensor<double>& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

template <typename RngT>
void randomize(Tensor<double>& t, RngT& rng, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  for (auto& v : t.values()) v = d(rng);
}

template <typename RngT>
void randomize_branch(Branch<double>& b, RngT& rng, bool zero) {
  for (auto* u : {&b.entry(), &b.reduce_a(), &b.reduce_b(), &b.spatial_a(), &b.spatial_b()}) {
    if (zero) {
      u->conv().weight().value.zero();
      u->bn().scale().value.zero();
      u->bn().shift().value.zero();
      continue;
    }
    u->init(rng);
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    for (auto& v : u->bn().scale().value.values()) v = pos(rng);
    randomize(u->bn().shift().value, rng, 0.0, 0.2);
    randomize(u->bn().running_mean().value, rng, 0.0, 0.2);
    for (auto& v : u->bn().running_var().value.values()) v = pos(rng);
  }
}

template <typename RngT>
void randomize_ensemble(Ensemble<double>& e, RngT& rng) {
  e.init(rng);
  randomize(e.reduce_fc().bias().value, rng, 0.1, 0.2);
  randomize(e.head_rgb().bias().value, rng, 0.0, 0.2);
  randomize(e.head_nir().bias().value, rng, 0.0, 0.2);
}

}  // namespace detail

/// Compares reverse-mode gradients of sum(output) against central finite
/// differences for every parameter and input entry, in double precision.
/// Relative error is |a - n| / max(|a|, |n|, denominator_floor).
inline GradCheckReport gradient_check(CheckedOp op, Shape4 shape, std::uint64_t seed,
                                      const GradCheckOptions& opt = {}) {
  Rng rng(derive_seed(seed, "gradcheck"));
  MarmotConfig cfg{shape.c, 16, 32};
  Marmot<double> block(cfg);
  detail::randomize_branch(block.branch_rgb(), rng, opt.zero_branch_weights);
  detail::randomize_branch(block.branch_nir(), rng, opt.zero_branch_weights);
  detail::randomize_ensemble(block.ensemble(), rng);

  Tensor<double> x(shape), x2(shape);
  detail::randomize(x, rng, 0.0, 1.0);
  detail::randomize(x2, rng, 0.0, 1.0);
  Tensor<double> gx, gx2;

  detail::Probe probe;
  auto add_params = [&](auto& module) {
    module.visit([&](nn::Param<double>& p) {
      probe.values.emplace_back(p.name, &p.value);
      probe.grads.push_back(&p.grad);
    });
  };

  switch (op) {
    case CheckedOp::Branch:
      probe.forward = [&] { return block.branch_rgb().forward(x, opt.mode); };
      probe.backward = [&](const Tensor<double>& g) { gx = block.branch_rgb().backward(g); };
      if (opt.include_params) add_params(block.branch_rgb());
      break;
    case CheckedOp::Ensemble:
      probe.forward = [&] { return block.ensemble().forward(x, x2); };
      probe.backward = [&](const Tensor<double>& g) {
        auto r = block.ensemble().backward(g);
        gx = std::move(r.f_rgb);
        gx2 = std::move(r.f_nir);
      };
      if (opt.include_params) add_params(block.ensemble());
      break;
    case CheckedOp::Marmot:
      probe.forward = [&] { return block.forward(x, opt.mode); };
      probe.backward = [&](const Tensor<double>& g) { gx = block.backward(g); };
      if (opt.include_params) add_params(block);
      break;
  }
  if (opt.include_inputs) {
    probe.values.emplace_back("input", &x);
    probe.grads.push_back(&gx);
    if (op == CheckedOp::Ensemble) {
      probe.values.emplace_back("input_nir", &x2);
      probe.grads.push_back(&gx2);
    }
  }

  block.visit([](nn::Param<double>& p) { p.zero_grad(); });
  Tensor<double> y = probe.forward();
  probe.backward(Tensor<double>(y.shape(), 1.0));

  // Snapshot analytic gradients before any further forward overwrites caches.
  std::vector<Tensor<double>> analytic;
  for (auto* g : probe.grads) analytic.push_back(*g);

  GradCheckReport report;
  for (std::size_t k = 0; k < probe.values.size(); ++k) {
    auto& [name, value] = probe.values[k];
    const Tensor<double>& a = analytic[k];
    if (a.size() != value->size())
      throw ShapeError("gradient_check: missing gradient for " + name);
    for (std::size_t i = 0; i < value->size(); ++i) {
      const double orig = (*value)[i];
      (*value)[i] = orig + opt.step;
      const double up = detail::total(probe.forward());
      (*value)[i] = orig - opt.step;
      const double down = detail::total(probe.forward());
      (*value)[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double an = a[i];
      if (!std::isfinite(an) || !std::isfinite(numeric))
        throw NumericError("gradient_check: non-finite gradient for " + name + "[" +
                           std::to_string(i) + "]");
      const double rel =
          std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), opt.denominator_floor});
      ++report.checked;
      if (report.worst.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace cmot::marmot
