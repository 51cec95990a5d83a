#include "bib/embedder.hpp"

#include <cmath>
#include <stdexcept>

#include "bib/kernels.hpp"
#include "bib/rng.hpp"

namespace bib {

namespace {

// Window products on a raw matrix; same layout as kmer_probabilities but
// without the row-stochastic validation, so it accepts perturbed inputs.
Matrix window_products(const Matrix& p, int k) {
  const std::size_t length = p.rows();
  const std::size_t a = p.cols();
  std::size_t vocab = 1;
  for (int j = 0; j < k; ++j) vocab *= a;
  const std::size_t windows = length - static_cast<std::size_t>(k) + 1;
  Matrix out(windows, vocab);
  for (std::size_t w = 0; w < windows; ++w) {
    out(w, 0) = 1.0;
    std::size_t filled = 1;
    for (int j = 0; j < k; ++j) {
      for (std::size_t idx = filled; idx-- > 0;) {
        const double base = out(w, idx);
        for (std::size_t t = a; t-- > 0;) out(w, idx * a + t) = base * p(w + j, t);
      }
      filled *= a;
    }
  }
  return out;
}

}  // namespace

EmbedderKind embedder_kind_from_string(const std::string& s) {
  if (s == "flatten") return EmbedderKind::flatten;
  if (s == "random-feature-net") return EmbedderKind::random_feature_net;
  if (s == "kmer-pool") return EmbedderKind::kmer_pool;
  throw std::invalid_argument("unknown embedder kind: " + s);
}

std::string embedder_kind_to_string(EmbedderKind k) {
  switch (k) {
    case EmbedderKind::flatten:
      return "flatten";
    case EmbedderKind::random_feature_net:
      return "random-feature-net";
    case EmbedderKind::kmer_pool:
      return "kmer-pool";
  }
  return "unknown";
}

Embedder Embedder::build(const EmbedderSpec& spec, std::size_t length, std::size_t alphabet) {
  if (length < 1 || alphabet < 2) throw std::invalid_argument("embedder needs L >= 1, A >= 2");
  Embedder e;
  e.spec_ = spec;
  e.length_ = length;
  e.alphabet_ = alphabet;
  const std::size_t in_dim = length * alphabet;

  switch (spec.kind) {
    case EmbedderKind::flatten:
      e.feature_dim_ = in_dim;
      break;
    case EmbedderKind::random_feature_net: {
      if (spec.feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
      e.feature_dim_ = static_cast<std::size_t>(spec.feature_dim);
      e.hidden_ = spec.hidden_width > 0 ? static_cast<std::size_t>(spec.hidden_width) : 4 * in_dim;
      Rng rng(spec.seed);
      const double in_std = 1.0 / std::sqrt(static_cast<double>(in_dim));
      e.w_in_ = Matrix(in_dim, e.hidden_);
      for (std::size_t i = 0; i < e.w_in_.size(); ++i) e.w_in_.data()[i] = in_std * rng.normal();
      const double out_std = 1.0 / std::sqrt(static_cast<double>(e.hidden_));
      e.w_out_ = Matrix(e.feature_dim_, e.hidden_);
      for (std::size_t i = 0; i < e.w_out_.size(); ++i) e.w_out_.data()[i] = out_std * rng.normal();
      break;
    }
    case EmbedderKind::kmer_pool: {
      if (spec.k < 1 || static_cast<std::size_t>(spec.k) > length)
        throw std::invalid_argument("kmer-pool needs 1 <= k <= L");
      std::size_t vocab = 1;
      for (int j = 0; j < spec.k; ++j) {
        vocab *= alphabet;
        if (vocab > (1u << 20)) throw std::invalid_argument("kmer-pool vocabulary too large");
      }
      e.feature_dim_ = vocab;
      break;
    }
  }
  return e;
}

Embedder::Forward Embedder::forward(const OneHotSequence& z) const {
  if (z.length() != length_ || static_cast<std::size_t>(z.alphabet) != alphabet_)
    throw std::invalid_argument("embedder input shape mismatch");
  if (spec_.kind == EmbedderKind::random_feature_net) {
    Forward f;
    std::vector<double> pre(hidden_, 0.0);
    for (std::size_t l = 0; l < length_; ++l) {
      const std::size_t r = l * alphabet_ + static_cast<std::size_t>(z.tokens[l]);
      kern::axpy(1.0, w_in_.row(r), pre.data(), hidden_);
    }
    f.hidden.resize(hidden_);
    for (std::size_t j = 0; j < hidden_; ++j) f.hidden[j] = std::tanh(pre[j]);
    f.features.resize(feature_dim_);
    kern::matvec(w_out_.data(), feature_dim_, hidden_, f.hidden.data(), f.features.data());
    return f;
  }
  return forward(z.to_matrix());
}

Embedder::Forward Embedder::forward(const Matrix& dense) const {
  if (dense.rows() != length_ || dense.cols() != alphabet_)
    throw std::invalid_argument("embedder input shape mismatch");
  Forward f;
  switch (spec_.kind) {
    case EmbedderKind::flatten:
      f.features.assign(dense.data(), dense.data() + dense.size());
      break;
    case EmbedderKind::random_feature_net: {
      std::vector<double> pre(hidden_, 0.0);
      for (std::size_t r = 0; r < dense.size(); ++r)
        kern::axpy(dense.data()[r], w_in_.row(r), pre.data(), hidden_);
      f.hidden.resize(hidden_);
      for (std::size_t j = 0; j < hidden_; ++j) f.hidden[j] = std::tanh(pre[j]);
      f.features.resize(feature_dim_);
      kern::matvec(w_out_.data(), feature_dim_, hidden_, f.hidden.data(), f.features.data());
      break;
    }
    case EmbedderKind::kmer_pool: {
      const Matrix prods = window_products(dense, spec_.k);
      f.features.assign(feature_dim_, 0.0);
      for (std::size_t w = 0; w < prods.rows(); ++w)
        kern::axpy(1.0, prods.row(w), f.features.data(), feature_dim_);
      const double inv = 1.0 / static_cast<double>(prods.rows());
      for (double& v : f.features) v *= inv;
      f.input = dense;
      break;
    }
  }
  return f;
}

Matrix Embedder::vjp(const Forward& fwd, std::span<const double> upstream) const {
  Matrix g0, g1, g2;
  vjp3(fwd, upstream, upstream, upstream, g0, g1, g2);
  return g0;
}

void Embedder::vjp3(const Forward& fwd, std::span<const double> u0, std::span<const double> u1,
                    std::span<const double> u2, Matrix& g0, Matrix& g1, Matrix& g2) const {
  if (u0.size() != feature_dim_ || u1.size() != feature_dim_ || u2.size() != feature_dim_)
    throw std::invalid_argument("embedder upstream dimension mismatch");
  g0 = Matrix(length_, alphabet_);
  g1 = Matrix(length_, alphabet_);
  g2 = Matrix(length_, alphabet_);
  switch (spec_.kind) {
    case EmbedderKind::flatten: {
      std::copy(u0.begin(), u0.end(), g0.data());
      std::copy(u1.begin(), u1.end(), g1.data());
      std::copy(u2.begin(), u2.end(), g2.data());
      break;
    }
    case EmbedderKind::random_feature_net: {
      // w_k = W_out^T u_k, one pass over W_out for the three upstreams
      std::vector<double> w0(hidden_, 0.0), w1(hidden_, 0.0), w2(hidden_, 0.0);
      for (std::size_t r = 0; r < feature_dim_; ++r) {
        const double* row = w_out_.row(r);
        kern::axpy(u0[r], row, w0.data(), hidden_);
        kern::axpy(u1[r], row, w1.data(), hidden_);
        kern::axpy(u2[r], row, w2.data(), hidden_);
      }
      // tanh' through the cached activations
      for (std::size_t j = 0; j < hidden_; ++j) {
        const double t = 1.0 - fwd.hidden[j] * fwd.hidden[j];
        w0[j] *= t;
        w1[j] *= t;
        w2[j] *= t;
      }
      kern::matvec3(w_in_.data(), length_ * alphabet_, hidden_, w0.data(), w1.data(), w2.data(),
                    g0.data(), g1.data(), g2.data());
      break;
    }
    case EmbedderKind::kmer_pool: {
      kmer_vjp(fwd, u0, g0);
      kmer_vjp(fwd, u1, g1);
      kmer_vjp(fwd, u2, g2);
      break;
    }
  }
}

void Embedder::kmer_vjp(const Forward& fwd, std::span<const double> upstream, Matrix& g) const {
  const Matrix& p = fwd.input;
  if (p.rows() != length_) throw std::invalid_argument("kmer vjp needs the cached forward input");
  const int k = spec_.k;
  const std::size_t a = alphabet_;
  const std::size_t windows = length_ - static_cast<std::size_t>(k) + 1;
  const double inv = 1.0 / static_cast<double>(windows);

  std::vector<std::size_t> digit(static_cast<std::size_t>(k), 0);
  std::vector<double> prefix(static_cast<std::size_t>(k) + 1, 1.0);
  std::vector<double> suffix(static_cast<std::size_t>(k) + 1, 1.0);
  for (std::size_t w = 0; w < windows; ++w) {
    std::fill(digit.begin(), digit.end(), 0);
    for (std::size_t t = 0; t < feature_dim_; ++t) {
      // leave-one-out products via prefix/suffix over the window
      prefix[0] = 1.0;
      for (int j = 0; j < k; ++j) prefix[j + 1] = prefix[j] * p(w + j, digit[j]);
      suffix[k] = 1.0;
      for (int j = k; j-- > 0;) suffix[j] = suffix[j + 1] * p(w + j, digit[j]);
      const double u = upstream[t] * inv;
      if (u != 0.0)
        for (int j = 0; j < k; ++j) g(w + j, digit[j]) += u * prefix[j] * suffix[j + 1];
      // odometer increment, last digit least significant
      for (int j = k; j-- > 0;) {
        if (++digit[j] < a) break;
        digit[j] = 0;
      }
    }
  }
}

Matrix embed_batch(const Embedder& embedder, std::span<const OneHotSequence> batch) {
  Matrix feats(batch.size(), embedder.feature_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto f = embedder.embed(batch[i]);
    std::copy(f.begin(), f.end(), feats.row(i));
  }
  return feats;
}

Matrix gram_features(const Matrix& feats_a, const Matrix& feats_b) {
  if (feats_a.cols() != feats_b.cols())
    throw std::invalid_argument("gram feature dimension mismatch");
  Matrix g(feats_a.rows(), feats_b.rows());
  for (std::size_t i = 0; i < feats_a.rows(); ++i)
    for (std::size_t j = 0; j < feats_b.rows(); ++j)
      g(i, j) = kern::dot(feats_a.row(i), feats_b.row(j), feats_a.cols());
  return g;
}

Matrix gram(const Embedder& embedder, std::span<const OneHotSequence> batch_a,
            std::span<const OneHotSequence> batch_b) {
  return gram_features(embed_batch(embedder, batch_a), embed_batch(embedder, batch_b));
}

}  // namespace bib
