#include "bib/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bib/kernels.hpp"
#include "bib/linalg.hpp"

namespace bib {

double AuxiliaryModel::predict(std::span<const double> phi) const {
  if (phi.size() != weights.size()) throw std::invalid_argument("feature dimension mismatch");
  return kern::dot(weights.data(), phi.data(), phi.size()) + bias;
}

AuxiliaryModel fit_auxiliary(const OfflineSplit& split, const Embedder& embedder,
                             double beta_aux) {
  split.validate();
  if (!(beta_aux > 0.0)) throw std::invalid_argument("beta_aux must be > 0");

  const Matrix feats = embed_batch(embedder, split.sequences);
  const std::size_t n = feats.rows();
  const std::size_t d = feats.cols();

  // center features and targets; the intercept stays unpenalized
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::axpy(1.0, feats.row(i), mean.data(), d);
  for (double& m : mean) m /= static_cast<double>(n);
  double y_mean = 0.0;
  for (double y : split.scores) y_mean += y;
  y_mean /= static_cast<double>(n);

  Matrix xc(n, d);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      xc(i, j) = feats(i, j) - mean[j];
      max_abs = std::max(max_abs, std::abs(xc(i, j)));
    }
  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) yc[i] = split.scores[i] - y_mean;

  AuxiliaryModel aux;
  aux.beta_aux = beta_aux;
  aux.weights.assign(d, 0.0);
  if (max_abs < 1e-14) {
    aux.degenerate = true;
    aux.bias = y_mean;
    return aux;
  }

  if (d <= n) {
    // primal: (Xc^T Xc + beta I) w = Xc^T yc
    Matrix a(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = xc.row(i);
      for (std::size_t p = 0; p < d; ++p)
        if (row[p] != 0.0) kern::axpy(row[p], row, a.row(p), d);
    }
    for (std::size_t p = 0; p < d; ++p) a(p, p) += beta_aux;
    std::vector<double> rhs(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) kern::axpy(yc[i], xc.row(i), rhs.data(), d);
    aux.weights = CholeskyFactor::factor(a).solve(rhs);
  } else {
    // dual: w = Xc^T (Xc Xc^T + beta I)^-1 yc
    Matrix g = gram_features(xc, xc);
    for (std::size_t i = 0; i < n; ++i) g(i, i) += beta_aux;
    const std::vector<double> s = CholeskyFactor::factor(g).solve(yc);
    for (std::size_t i = 0; i < n; ++i) kern::axpy(s[i], xc.row(i), aux.weights.data(), d);
  }
  aux.bias = y_mean - kern::dot(aux.weights.data(), mean.data(), d);
  return aux;
}

AuxEval aux_score_and_grad(const AuxiliaryModel& aux, const Embedder& embedder,
                           const DesignMatrix& design) {
  const ProbabilityMatrix probs = softmax_rows(design);
  const auto fwd = embedder.forward(discretize(probs));
  AuxEval e;
  e.value = aux.predict(fwd.features);
  const Matrix g_onehot = embedder.vjp(fwd, aux.weights);
  e.grad = straight_through_vjp(g_onehot, probs);
  return e;
}

double gamma_hypergradient(double eta, const Matrix& aux_grad, const Matrix& grad_l2h,
                           const Matrix& grad_h2l) {
  check_same_shape(aux_grad, grad_l2h, "gamma_hypergradient");
  check_same_shape(aux_grad, grad_h2l, "gamma_hypergradient");
  double s = 0.0;
  for (std::size_t i = 0; i < aux_grad.size(); ++i)
    s += aux_grad.data()[i] * (grad_h2l.data()[i] - grad_l2h.data()[i]);
  return eta * s;
}

double eta_hypergradient(const Matrix& aux_grad, const Matrix& step_direction) {
  check_same_shape(aux_grad, step_direction, "eta_hypergradient");
  return kern::dot(aux_grad.data(), step_direction.data(), aux_grad.size());
}

namespace {

// normalized |hg| tracker; first sample seeds the mean
double normalize_hg(double hg, double& mean, long& count) {
  const double a = std::abs(hg);
  mean = (count == 0) ? a : 0.9 * mean + 0.1 * a;
  ++count;
  return hg / std::max(mean, 1e-300);
}

}  // namespace

double adapt_gamma(AdaptiveState& state, const Matrix& aux_grad, const Matrix& grad_l2h,
                   const Matrix& grad_h2l) {
  const double hg = gamma_hypergradient(state.eta, aux_grad, grad_l2h, grad_h2l);
  const double step = state.outer_rate_gamma *
                      normalize_hg(hg, state.gamma_hg_mean, state.gamma_hg_count);
  state.gamma = std::clamp(state.gamma + step, 0.0, 1.0);
  return state.gamma;
}

double adapt_eta(AdaptiveState& state, const Matrix& aux_grad, const Matrix& step_direction) {
  const double hg = eta_hypergradient(aux_grad, step_direction);
  double step = state.outer_rate_eta * normalize_hg(hg, state.eta_hg_mean, state.eta_hg_count);
  if (state.verbatim_eta_sign) step = -step;
  state.eta = std::max(state.eta0 + step, state.eta_min);
  return state.eta;
}

LossGrad joint_objective(const RidgeModel& model, const Embedder& embedder,
                         const AuxiliaryModel& aux, const DesignMatrix& design, double y_h,
                         double gamma_fixed, JointBase base) {
  if (!(gamma_fixed >= 0.0 && gamma_fixed <= 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1]");
  const ProbabilityMatrix probs = softmax_rows(design);
  const auto fwd = embedder.forward(discretize(probs));

  std::vector<double> upstream(embedder.feature_dim());
  double value = 0.0;
  if (base == JointBase::bidirectional) {
    const auto fe = model.forward_loss_phi(fwd.features, y_h);
    const auto be = model.backward_loss_phi(fwd.features, y_h);
    value = gamma_fixed * fe.loss + (1.0 - gamma_fixed) * be.loss - aux.predict(fwd.features);
    for (std::size_t j = 0; j < upstream.size(); ++j)
      upstream[j] = gamma_fixed * fe.upstream[j] + (1.0 - gamma_fixed) * be.upstream[j] -
                    aux.weights[j];
  } else {
    // maximize pred + f_aux, expressed as a minimization objective
    value = -(model.predict_forward(fwd.features) + aux.predict(fwd.features));
    const std::vector<double>& w = model.forward_weight();
    for (std::size_t j = 0; j < upstream.size(); ++j) upstream[j] = -(w[j] + aux.weights[j]);
  }

  const Matrix g_onehot = embedder.vjp(fwd, upstream);
  return LossGrad{value, straight_through_vjp(g_onehot, probs)};
}

}  // namespace bib
