#include <cmath>
#include <stdexcept>

#include "avtenet/errors.hpp"
#include "avtenet/tensor.hpp"

namespace avtenet {

Tensor bce_loss(const Tensor& pred_real, const std::vector<double>& real_labels) {
  if (real_labels.empty()) throw empty_data_error("bce_loss: empty batch");
  if (pred_real.rank() != 1 || pred_real.shape()[0] != real_labels.size())
    throw std::invalid_argument("bce_loss: predictions and labels must have equal length");
  for (double y : real_labels)
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument("bce_loss: labels must be 0 or 1");
  const std::size_t n = real_labels.size();
  Tensor y(Shape{n}, real_labels);
  Tensor one_minus_y(Shape{n});
  for (std::size_t i = 0; i < n; ++i) one_minus_y.values()[i] = 1.0 - real_labels[i];
  Tensor p = clamp(pred_real, 1e-12, 1.0 - 1e-12);
  Tensor q = add_scalar(scale(p, -1.0), 1.0);
  Tensor terms = add(mul(y, log_e(p)), mul(one_minus_y, log_e(q)));
  return scale(mean_all(terms), -1.0);
}

void adam_step(ParameterSet& params, AdamState& state) {
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (auto& [name, p] : params) {
    const std::vector<double> g = p.grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    if (m.size() != g.size() || v.size() != g.size())
      throw std::invalid_argument("adam_step: moment size for '" + name +
                                  "' does not match parameter");
    auto& data = p.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double grad_check(const std::function<Tensor()>& forward, ParameterSet& params, double eps,
                  std::uint64_t seed, std::size_t samples_per_tensor, double sabotage) {
  for (auto& [name, p] : params) p.set_requires_grad(true);
  zero_grads(params);
  Tensor loss = forward();
  if (!std::isfinite(loss.item())) throw numeric_error("grad_check: non-finite loss");
  backward(loss);

  double worst = 0.0;
  Rng rng(seed);
  for (auto& [name, p] : params) {
    const std::vector<double> analytic = p.grad();
    auto& data = p.values();
    const std::size_t n = data.size();
    const std::size_t count = std::min(samples_per_tensor, n);
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = rng.index(n);
      const double a = analytic[i] + sabotage;
      const auto rel_at = [&](double step) {
        const double keep = data[i];
        data[i] = keep + step;
        const double f_plus = forward().item();
        data[i] = keep - step;
        const double f_minus = forward().item();
        data[i] = keep;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
          throw numeric_error("grad_check: non-finite loss at perturbed '" + name + "'");
        const double numeric = (f_plus - f_minus) / (2.0 * step);
        // Central differences carry ~|f|*ulp/step of roundoff noise; when
        // both sides sit under that floor they are equal zeros (e.g.
        // parameters the function provably cancels), not a mismatch.
        const double mag = std::max(std::fabs(a), std::fabs(numeric));
        return mag < 1e-7 ? 0.0 : std::fabs(a - numeric) / mag;
      };
      // A step straddling an activation kink inflates the difference
      // quotient; shrinking the step collapses that, while a wrong analytic
      // gradient stays wrong at every step size.
      double rel = rel_at(eps);
      if (rel > 1e-6) rel = std::min(rel, rel_at(eps * 0.1));
      if (rel > 1e-6) rel = std::min(rel, rel_at(eps * 0.01));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace avtenet
