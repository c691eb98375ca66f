#pragma once

#include <span>
#include <vector>

#include "nplme/kernels.hpp"
#include "nplme/models.hpp"

namespace nplme {

struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> grad;
};

/// Squared weighted MMD between a joint measure on (x, y) and the model-implied
/// measure sum_j v_j delta(x_j, g(x_j, theta) + noise_j), as a function of theta.
///
/// The joint self-term does not depend on theta and is computed once at
/// construction; each evaluation costs O(N^2) kernel calls. Zero-weight atoms
/// are dropped up front.
class MmdObjective {
 public:
  MmdObjective(const WeightedSample& joint, const WeightedSample& marginal, FamilyPtr model,
               std::vector<double> noise, const ProductKernelSpec& spec);

  ObjectiveValue evaluate(std::span<const double> theta) const;
  double value(std::span<const double> theta) const;

  double constant_term() const noexcept { return joint_self_; }
  std::size_t dim_theta() const noexcept { return model_->dim_theta(); }
  std::size_t joint_atoms() const noexcept { return jx_.size(); }
  std::size_t marginal_atoms() const noexcept { return mx_.size(); }

 private:
  ObjectiveValue compute(std::span<const double> theta, bool with_grad) const;

  FamilyPtr model_;
  double y_scale_ = 1.0;  // 1 / (sqrt(2) l_y)
  // joint atoms, coordinates pre-scaled by 1 / (sqrt(2) l)
  std::vector<double> jx_, jy_, ju_;
  // marginal atoms: raw x for g, scaled x for the kernel, noise, weights
  std::vector<double> mx_raw_, mx_, noise_, mv_;
  double joint_self_ = 0.0;
};

/// One-shot evaluation; builds an MmdObjective and evaluates it at theta.
ObjectiveValue mmd2_objective_grad(std::span<const double> theta, const WeightedSample& dp_joint,
                                   const WeightedSample& dp_marginal, FamilyPtr model,
                                   std::span<const double> noise_draws,
                                   const ProductKernelSpec& spec);

}  // namespace nplme
