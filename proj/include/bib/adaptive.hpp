#pragma once

#include <span>
#include <vector>

#include "bib/embedder.hpp"
#include "bib/matrix.hpp"
#include "bib/ridge.hpp"
#include "bib/sequence.hpp"

// Auxiliary scoring model and the two hypergradient adaptation schemes. The
// auxiliary is a ridge-fitted linear head on the frozen features; its weak
// signal steers the mapping trade-off gamma and the learning rate eta through
// one-step unrolled hypergradients.

namespace bib {

struct AuxiliaryModel {
  std::vector<double> weights;
  double bias = 0.0;
  double beta_aux = 0.0;
  bool degenerate = false;  // all-identical features; intercept-only fit

  double predict(std::span<const double> phi) const;
};

// Ridge regression of scores on embedded features, intercept unpenalized.
AuxiliaryModel fit_auxiliary(const OfflineSplit& split, const Embedder& embedder,
                             double beta_aux);

struct AuxEval {
  double value = 0.0;
  Matrix grad;
};

// Score through the one-hot forward convention, gradient via the
// straight-through pullback.
AuxEval aux_score_and_grad(const AuxiliaryModel& aux, const Embedder& embedder,
                           const DesignMatrix& design);

// d f_aux(X - eta * grad_bi(gamma)) / d gamma, gradients flattened.
double gamma_hypergradient(double eta, const Matrix& aux_grad, const Matrix& grad_l2h,
                           const Matrix& grad_h2l);
// d f_aux(X + eta * step_direction) / d eta at the reset point.
double eta_hypergradient(const Matrix& aux_grad, const Matrix& step_direction);

struct AdaptiveState {
  double gamma = 0.5;
  double eta = 0.1;
  double eta0 = 0.1;
  double outer_rate_gamma = 0.05;
  double outer_rate_eta = 0.01;
  bool verbatim_eta_sign = false;  // printed minus sign instead of ascent
  double eta_min = 1e-6;

  // running absolute means that normalize the hypergradient scale
  double gamma_hg_mean = 0.0;
  long gamma_hg_count = 0;
  double eta_hg_mean = 0.0;
  long eta_hg_count = 0;
};

// gamma <- clamp(gamma + rate * normalized hypergradient, 0, 1)
double adapt_gamma(AdaptiveState& state, const Matrix& aux_grad, const Matrix& grad_l2h,
                   const Matrix& grad_h2l);
// eta <- max(eta0 +/- rate * normalized hypergradient, eta_min)
double adapt_eta(AdaptiveState& state, const Matrix& aux_grad, const Matrix& step_direction);

enum class JointBase {
  bidirectional,       // minimize L_bi(gamma) - f_aux
  forward_prediction,  // maximize pred_fwd + f_aux
};

// Single-objective ablation that folds the auxiliary into the design update.
LossGrad joint_objective(const RidgeModel& model, const Embedder& embedder,
                         const AuxiliaryModel& aux, const DesignMatrix& design, double y_h,
                         double gamma_fixed, JointBase base);

}  // namespace bib
