#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bib/embedder.hpp"
#include "bib/linalg.hpp"
#include "bib/matrix.hpp"
#include "bib/sequence.hpp"

// Closed-form ridge solutions for the forward mapping (offline data -> target
// score) and the backward mapping (single design -> offline scores), and the
// gamma-weighted combination of the two losses with its design gradient.
//
// Predictions take the form f0(q) + K_corr(q) where f0 is a frozen linear
// baseline head (zero by default). The `paper_verbatim_loss` option drops the
// f0 offsets on the prediction side of both residuals; with the default zero
// head the two conventions coincide.

namespace bib {

struct RidgeOptions {
  double beta = 1e-3;
  bool paper_verbatim_loss = false;
  double baseline_head_std = 0.0;  // 0 => zero baseline head
  std::uint64_t baseline_head_seed = 0;
};

class RidgeModel {
 public:
  double beta() const { return beta_; }
  bool verbatim() const { return verbatim_; }
  std::size_t dataset_size() const { return features_.rows(); }
  std::size_t feature_dim() const { return features_.cols(); }
  const Matrix& features() const { return features_; }
  const std::vector<double>& residuals() const { return r_l_; }
  const std::vector<double>& baseline_head() const { return theta_init_; }
  const CholeskyFactor& factorization() const { return chol_; }

  // gradient of the forward prediction with respect to the features
  const std::vector<double>& forward_weight() const { return verbatim_ ? w_corr_ : w_fwd_; }

  double baseline(std::span<const double> phi) const;
  double predict_forward(std::span<const double> phi) const;
  std::vector<double> backward_predictions(std::span<const double> phi, double y_h) const;

  // Loss pieces in feature space; `upstream` is dLoss/dphi.
  struct ForwardEval {
    double loss = 0.0;
    double pred = 0.0;
    std::vector<double> upstream;
  };
  ForwardEval forward_loss_phi(std::span<const double> phi, double y_h) const;

  struct BackwardEval {
    double loss = 0.0;
    std::vector<double> upstream;
  };
  BackwardEval backward_loss_phi(std::span<const double> phi, double y_h) const;

  friend RidgeModel fit_ridge(const OfflineSplit& split, const Embedder& embedder,
                              const RidgeOptions& options);

 private:
  Matrix features_;                // N x d
  CholeskyFactor chol_;            // of K + beta I
  std::vector<double> y_l_;        // raw scores
  std::vector<double> r_l_;        // y_l - f0(X_l)
  std::vector<double> f0_l_;       // f0(X_l)
  std::vector<double> alpha_;      // (K + beta I)^-1 r_l
  std::vector<double> w_corr_;     // features^T alpha
  std::vector<double> w_fwd_;      // w_corr + theta_init
  std::vector<double> theta_init_;
  double beta_ = 0.0;
  bool verbatim_ = false;
};

RidgeModel fit_ridge(const OfflineSplit& split, const Embedder& embedder,
                     const RidgeOptions& options);

struct LossGrad {
  double value = 0.0;
  Matrix grad;  // with respect to the design logits
};

LossGrad forward_loss(const RidgeModel& model, const Embedder& embedder,
                      const DesignMatrix& design, double y_h);
LossGrad backward_loss(const RidgeModel& model, const Embedder& embedder,
                       const DesignMatrix& design, double y_h);

struct BidiLossValue {
  double l2h = 0.0;
  double h2l = 0.0;
  double combined = 0.0;
  double gamma = 0.0;
};

struct BidiEval {
  BidiLossValue loss;
  Matrix grad;
};

BidiEval bidirectional_loss(const RidgeModel& model, const Embedder& embedder,
                            const DesignMatrix& design, double y_h, double gamma);

}  // namespace bib
