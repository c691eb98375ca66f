#include "nplme/mmd_objective.hpp"

#include <cmath>

#include "nplme/error.hpp"
#include "pair_sums.hpp"

namespace nplme {

MmdObjective::MmdObjective(const WeightedSample& joint, const WeightedSample& marginal,
                           FamilyPtr model, std::vector<double> noise,
                           const ProductKernelSpec& spec)
    : model_(std::move(model)) {
  if (!model_) throw InvalidInput("mmd objective: missing model");
  spec.validate();
  joint.validate();
  marginal.validate();
  if (joint.atoms.dim() != 2 || spec.x_dim != 1)
    throw InvalidInput("mmd objective: joint atoms must be (x, y) pairs");
  if (marginal.atoms.dim() != 1) throw InvalidInput("mmd objective: marginal atoms must be scalars");
  if (noise.size() != marginal.atoms.size())
    throw InvalidInput("mmd objective: need one noise draw per marginal atom");

  const double x_scale = 1.0 / (std::sqrt(2.0) * spec.kx.bandwidth);
  y_scale_ = 1.0 / (std::sqrt(2.0) * spec.ky.bandwidth);

  for (std::size_t a = 0; a < joint.weights.size(); ++a) {
    if (joint.weights[a] == 0.0) continue;
    const double x = joint.atoms.at(a, 0);
    const double y = joint.atoms.at(a, 1);
    if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidInput("mmd objective: non-finite joint atom");
    jx_.push_back(x * x_scale);
    jy_.push_back(y * y_scale_);
    ju_.push_back(joint.weights[a]);
  }
  for (std::size_t b = 0; b < marginal.weights.size(); ++b) {
    if (marginal.weights[b] == 0.0) continue;
    const double x = marginal.atoms.at(b, 0);
    if (!std::isfinite(x) || !std::isfinite(noise[b]))
      throw InvalidInput("mmd objective: non-finite marginal atom or noise");
    mx_raw_.push_back(x);
    mx_.push_back(x * x_scale);
    noise_.push_back(noise[b]);
    mv_.push_back(marginal.weights[b]);
  }
  joint_self_ = detail::self_pair_sum(jx_.size(), jx_.data(), jy_.data(), ju_.data(), nullptr);
}

ObjectiveValue MmdObjective::compute(std::span<const double> theta, bool with_grad) const {
  const std::size_t p = model_->dim_theta();
  if (theta.size() != p) throw InvalidInput("mmd objective: theta has the wrong length");
  const std::size_t nb = mx_.size();

  std::vector<double> yhat(nb);
  std::vector<double> jac(with_grad ? nb * p : 0);
  for (std::size_t b = 0; b < nb; ++b) {
    double g;
    if (with_grad) {
      g = model_->g_and_dtheta(mx_raw_[b], theta, std::span<double>(jac.data() + b * p, p));
    } else {
      g = model_->g(mx_raw_[b], theta);
    }
    yhat[b] = (g + noise_[b]) * y_scale_;
  }

  std::vector<double> r(with_grad ? nb : 0, 0.0);
  std::vector<double> s(with_grad ? nb : 0, 0.0);
  const double model_self = detail::self_pair_sum(nb, mx_.data(), yhat.data(), mv_.data(),
                                                  with_grad ? r.data() : nullptr);
  const double cross = detail::cross_pair_sum(jx_.size(), jx_.data(), jy_.data(), ju_.data(), nb,
                                              mx_.data(), yhat.data(), mv_.data(),
                                              with_grad ? s.data() : nullptr);

  ObjectiveValue out;
  out.value = joint_self_ + model_self - 2.0 * cross;
  if (with_grad) {
    // d value / d yhat_b (unscaled) = -4 y_scale (r_b + s_b)
    out.grad.assign(p, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      const double dv = -4.0 * y_scale_ * (r[b] + s[b]);
      for (std::size_t k = 0; k < p; ++k) out.grad[k] += dv * jac[b * p + k];
    }
  }
  return out;
}

ObjectiveValue MmdObjective::evaluate(std::span<const double> theta) const {
  return compute(theta, true);
}

double MmdObjective::value(std::span<const double> theta) const {
  return compute(theta, false).value;
}

ObjectiveValue mmd2_objective_grad(std::span<const double> theta, const WeightedSample& dp_joint,
                                   const WeightedSample& dp_marginal, FamilyPtr model,
                                   std::span<const double> noise_draws,
                                   const ProductKernelSpec& spec) {
  MmdObjective obj(dp_joint, dp_marginal, std::move(model),
                   std::vector<double>(noise_draws.begin(), noise_draws.end()), spec);
  return obj.evaluate(theta);
}

}  // namespace nplme
