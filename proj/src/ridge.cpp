#include "bib/ridge.hpp"

#include <cmath>
#include <stdexcept>

#include "bib/kernels.hpp"
#include "bib/rng.hpp"

namespace bib {

RidgeModel fit_ridge(const OfflineSplit& split, const Embedder& embedder,
                     const RidgeOptions& options) {
  split.validate();
  if (!(options.beta > 0.0)) throw std::invalid_argument("ridge beta must be > 0");

  RidgeModel m;
  m.beta_ = options.beta;
  m.verbatim_ = options.paper_verbatim_loss;
  m.features_ = embed_batch(embedder, split.sequences);
  m.y_l_ = split.scores;

  const std::size_t n = m.features_.rows();
  const std::size_t d = m.features_.cols();

  m.theta_init_.assign(d, 0.0);
  if (options.baseline_head_std > 0.0) {
    Rng rng(options.baseline_head_seed);
    for (double& w : m.theta_init_) w = options.baseline_head_std * rng.normal();
  }

  m.f0_l_.resize(n);
  kern::matvec(m.features_.data(), n, d, m.theta_init_.data(), m.f0_l_.data());
  m.r_l_.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.r_l_[i] = m.y_l_[i] - m.f0_l_[i];

  Matrix g = gram_features(m.features_, m.features_);
  for (std::size_t i = 0; i < n; ++i) g(i, i) += options.beta;
  m.chol_ = CholeskyFactor::factor(g);
  if (m.chol_.reconstruction_error(g) > 1e-10)
    throw std::runtime_error("ridge factorization failed to reproduce K + beta I");

  m.alpha_ = m.chol_.solve(m.r_l_);
  m.w_corr_.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::axpy(m.alpha_[i], m.features_.row(i), m.w_corr_.data(), d);
  m.w_fwd_ = m.w_corr_;
  for (std::size_t j = 0; j < d; ++j) m.w_fwd_[j] += m.theta_init_[j];
  return m;
}

double RidgeModel::baseline(std::span<const double> phi) const {
  return kern::dot(theta_init_.data(), phi.data(), phi.size());
}

double RidgeModel::predict_forward(std::span<const double> phi) const {
  if (phi.size() != feature_dim()) throw std::invalid_argument("feature dimension mismatch");
  return kern::dot(forward_weight().data(), phi.data(), phi.size());
}

RidgeModel::ForwardEval RidgeModel::forward_loss_phi(std::span<const double> phi,
                                                     double y_h) const {
  ForwardEval e;
  e.pred = predict_forward(phi);
  const double res = y_h - e.pred;
  e.loss = res * res;
  const std::vector<double>& w = forward_weight();
  e.upstream.resize(w.size());
  const double scale = -2.0 * res;
  for (std::size_t j = 0; j < w.size(); ++j) e.upstream[j] = scale * w[j];
  return e;
}

std::vector<double> RidgeModel::backward_predictions(std::span<const double> phi,
                                                     double y_h) const {
  const std::size_t n = dataset_size();
  const std::size_t d = feature_dim();
  if (phi.size() != d) throw std::invalid_argument("feature dimension mismatch");
  const double v = kern::dot(phi.data(), phi.data(), d) + beta_;
  const double c = (y_h - baseline(phi)) / v;
  std::vector<double> pred(n);
  kern::matvec(features_.data(), n, d, phi.data(), pred.data());  // k_h
  for (std::size_t i = 0; i < n; ++i) pred[i] = (verbatim_ ? 0.0 : f0_l_[i]) + c * pred[i];
  return pred;
}

RidgeModel::BackwardEval RidgeModel::backward_loss_phi(std::span<const double> phi,
                                                       double y_h) const {
  const std::size_t n = dataset_size();
  const std::size_t d = feature_dim();
  if (phi.size() != d) throw std::invalid_argument("feature dimension mismatch");

  // scalar inner solve: a single design makes K_hh one-by-one
  const double v = kern::dot(phi.data(), phi.data(), d) + beta_;
  const double f0_h = baseline(phi);
  const double c = (y_h - f0_h) / v;

  std::vector<double> k_h(n);
  kern::matvec(features_.data(), n, d, phi.data(), k_h.data());

  BackwardEval e;
  std::vector<double> rho(n);
  double rho_dot_k = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = (verbatim_ ? y_l_[i] : r_l_[i]) - c * k_h[i];
    e.loss += rho[i] * rho[i];
    rho_dot_k += rho[i] * k_h[i];
  }

  // dloss/dphi = -2 (rho.k_h) dc/dphi - 2 c features^T rho,
  // dc/dphi = -theta_init/v - (2c/v) phi
  e.upstream.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::axpy(rho[i], features_.row(i), e.upstream.data(), d);
  const double phi_coef = 4.0 * c * rho_dot_k / v;
  const double theta_coef = 2.0 * rho_dot_k / v;
  for (std::size_t j = 0; j < d; ++j)
    e.upstream[j] = -2.0 * c * e.upstream[j] + phi_coef * phi[j] + theta_coef * theta_init_[j];
  return e;
}

namespace {

LossGrad pull_back(const Embedder& embedder, const Embedder::Forward& fwd,
                   const ProbabilityMatrix& probs, double value,
                   std::span<const double> upstream) {
  Matrix g_onehot = embedder.vjp(fwd, upstream);
  return LossGrad{value, straight_through_vjp(g_onehot, probs)};
}

}  // namespace

LossGrad forward_loss(const RidgeModel& model, const Embedder& embedder,
                      const DesignMatrix& design, double y_h) {
  const ProbabilityMatrix probs = softmax_rows(design);
  const auto fwd = embedder.forward(discretize(probs));
  const auto e = model.forward_loss_phi(fwd.features, y_h);
  return pull_back(embedder, fwd, probs, e.loss, e.upstream);
}

LossGrad backward_loss(const RidgeModel& model, const Embedder& embedder,
                       const DesignMatrix& design, double y_h) {
  const ProbabilityMatrix probs = softmax_rows(design);
  const auto fwd = embedder.forward(discretize(probs));
  const auto e = model.backward_loss_phi(fwd.features, y_h);
  return pull_back(embedder, fwd, probs, e.loss, e.upstream);
}

BidiEval bidirectional_loss(const RidgeModel& model, const Embedder& embedder,
                            const DesignMatrix& design, double y_h, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  const ProbabilityMatrix probs = softmax_rows(design);
  const auto fwd = embedder.forward(discretize(probs));
  const auto fe = model.forward_loss_phi(fwd.features, y_h);
  const auto be = model.backward_loss_phi(fwd.features, y_h);

  std::vector<double> upstream(fe.upstream.size());
  for (std::size_t j = 0; j < upstream.size(); ++j)
    upstream[j] = gamma * fe.upstream[j] + (1.0 - gamma) * be.upstream[j];

  BidiEval out;
  out.loss.l2h = fe.loss;
  out.loss.h2l = be.loss;
  out.loss.gamma = gamma;
  out.loss.combined = gamma * fe.loss + (1.0 - gamma) * be.loss;
  out.grad = pull_back(embedder, fwd, probs, out.loss.combined, upstream).grad;
  return out;
}

}  // namespace bib
