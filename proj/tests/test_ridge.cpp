#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "bib/linalg.hpp"
#include "bib/ridge.hpp"
#include "bib/rng.hpp"
#include "fd_oracles.hpp"
#include "oracles.hpp"

using namespace bib;

namespace {

OneHotSequence random_seq(Rng& rng, std::size_t length, std::int32_t a) {
  std::vector<std::int32_t> tokens(length);
  for (auto& t : tokens) t = static_cast<std::int32_t>(rng.below(a));
  return OneHotSequence{tokens, a};
}

OfflineSplit random_split(Rng& rng, std::size_t n, std::size_t length, std::int32_t a) {
  OfflineSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    split.sequences.push_back(random_seq(rng, length, a));
    split.scores.push_back(2.0 * rng.normal());
  }
  return split;
}

DesignMatrix random_design(Rng& rng, std::size_t length, std::size_t a) {
  Matrix x(length, a);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return DesignMatrix{x};
}

EmbedderSpec rfn_spec(std::uint64_t seed, int d = 16) {
  EmbedderSpec s;
  s.kind = EmbedderKind::random_feature_net;
  s.feature_dim = d;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("cholesky reproduces the factored matrix and solves") {
  Rng rng(3);
  const std::size_t n = 12;
  Matrix b(n, n + 3);
  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  Matrix spd(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.cols(); ++k) s += b(i, k) * b(j, k);
      spd(i, j) = s + (i == j ? 0.5 : 0.0);
    }
  const auto chol = CholeskyFactor::factor(spd);
  CHECK(chol.reconstruction_error(spd) < 1e-12);

  std::vector<double> rhs(n);
  for (double& v : rhs) v = rng.normal();
  const auto x = chol.solve(rhs);
  const auto want = oracle::gauss_solve(spd, rhs);
  for (std::size_t i = 0; i < n; ++i) CHECK(oracle::rel_err(x[i], want[i]) < 1e-9);

  Matrix indef(2, 2, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(CholeskyFactor::factor(indef), std::runtime_error);
}

TEST_CASE("huge beta kills the ridge correction") {
  Rng rng(5);
  const auto split = random_split(rng, 8, 6, 4);
  const auto e = Embedder::build(rfn_spec(7), 6, 4);
  RidgeOptions opts;
  opts.beta = 1e12;
  const auto model = fit_ridge(split, e, opts);
  const auto q = e.embed(random_seq(rng, 6, 4));
  // zero baseline head: prediction collapses to O(1/beta)
  CHECK(std::abs(model.predict_forward(q)) < 1e-6);
}

TEST_CASE("two-point fit matches the explicit 2x2 kernel solve") {
  Rng rng(7);
  const auto e = Embedder::build(rfn_spec(11), 5, 4);
  OfflineSplit split;
  split.sequences = {random_seq(rng, 5, 4), random_seq(rng, 5, 4)};
  split.scores = {1.3, -0.4};
  RidgeOptions opts;
  opts.beta = 1e-2;
  const auto model = fit_ridge(split, e, opts);

  const auto f0 = e.embed(split.sequences[0]);
  const auto f1 = e.embed(split.sequences[1]);
  const auto q = e.embed(random_seq(rng, 5, 4));
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double g00 = dot(f0, f0) + opts.beta, g01 = dot(f0, f1);
  const double g11 = dot(f1, f1) + opts.beta;
  const double det = g00 * g11 - g01 * g01;
  const double a0 = (g11 * split.scores[0] - g01 * split.scores[1]) / det;
  const double a1 = (g00 * split.scores[1] - g01 * split.scores[0]) / det;
  const double want = dot(q, f0) * a0 + dot(q, f1) * a1;
  CHECK(oracle::rel_err(model.predict_forward(q), want) < 1e-10);
}

TEST_CASE("near-interpolation at a training point for tiny beta") {
  Rng rng(9);
  EmbedderSpec spec;
  spec.kind = EmbedderKind::flatten;
  const auto e = Embedder::build(spec, 8, 4);
  OfflineSplit split;
  std::set<std::vector<std::int32_t>> seen;
  while (split.size() < 6) {
    auto s = random_seq(rng, 8, 4);
    if (seen.insert(s.tokens).second) {
      split.sequences.push_back(s);
      split.scores.push_back(rng.normal() + 3.0);
    }
  }
  RidgeOptions opts;
  opts.beta = 1e-10;
  const auto model = fit_ridge(split, e, opts);
  const auto q = e.embed(split.sequences[2]);
  CHECK(oracle::rel_err(model.predict_forward(q), split.scores[2]) < 1e-4);
}

TEST_CASE("forward and backward closed forms match primal normal equations") {
  Rng rng(13);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 2 + rng.below(12);
    const auto split = random_split(rng, n, 6, 4);
    const auto e = Embedder::build(rfn_spec(100 + rep, 16), 6, 4);
    RidgeOptions opts;
    opts.beta = (rep % 2 == 0) ? 1e-3 : 1e-1;
    if (rep % 3 == 0) {
      opts.baseline_head_std = 0.5;
      opts.baseline_head_seed = 17 + static_cast<std::uint64_t>(rep);
    }
    const auto model = fit_ridge(split, e, opts);
    const auto q = e.embed(random_seq(rng, 6, 4));
    const double y_h = 10.0;

    // forward mapping vs a normal-equations solve on the feature side
    const double want_fwd = oracle::ridge_primal_predict(
        model.features(), split.scores, model.baseline_head(), opts.beta, q);
    CHECK(oracle::rel_err(model.predict_forward(q), want_fwd) < 1e-8);

    // backward mapping: one-point ridge via dense normal equations
    const std::size_t d = q.size();
    Matrix a(d, d);
    std::vector<double> rhs(d);
    double f0_q = 0.0;
    for (std::size_t i = 0; i < d; ++i) f0_q += q[i] * model.baseline_head()[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) a(i, j) = q[i] * q[j];
      a(i, i) += opts.beta;
      rhs[i] = q[i] * (y_h - f0_q);
    }
    const auto delta = oracle::gauss_solve(std::move(a), std::move(rhs));
    const auto got = model.backward_predictions(q, y_h);
    for (std::size_t i = 0; i < n; ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j < d; ++j) want += model.features()(i, j) * delta[j];
      for (std::size_t j = 0; j < d; ++j)
        want += model.features()(i, j) * model.baseline_head()[j];
      CHECK(oracle::rel_err(got[i], want) < 1e-8);
    }
  }
}

TEST_CASE("forward loss is zero with zero gradient at the target") {
  Rng rng(17);
  const auto split = random_split(rng, 8, 6, 4);
  const auto e = Embedder::build(rfn_spec(19), 6, 4);
  const auto model = fit_ridge(split, e, RidgeOptions{});
  const auto design = random_design(rng, 6, 4);
  const auto z = discretize(softmax_rows(design));
  const double y_h = model.predict_forward(e.embed(z));
  const auto lg = forward_loss(model, e, design, y_h);
  CHECK(lg.value == 0.0);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) CHECK(lg.grad.data()[i] == 0.0);
}

TEST_CASE("orthogonal query with zero head gives loss y_h^2") {
  // flatten features live on disjoint coordinates when sequences differ in
  // every position, so the kernel row vanishes
  EmbedderSpec spec;
  spec.kind = EmbedderKind::flatten;
  const auto e = Embedder::build(spec, 2, 4);
  OfflineSplit split;
  split.sequences = {OneHotSequence{{0, 0}, 4}, OneHotSequence{{1, 1}, 4}};
  split.scores = {1.0, -1.0};
  const auto model = fit_ridge(split, e, RidgeOptions{});
  Matrix x(2, 4);
  x(0, 2) = 8.0;
  x(1, 3) = 8.0;  // argmax tokens {2, 3}: no overlap with the split
  const double y_h = 3.5;
  const auto lg = forward_loss(model, e, DesignMatrix{x}, y_h);
  CHECK(lg.value == doctest::Approx(y_h * y_h).epsilon(1e-12));
}

TEST_CASE("backward loss with zero inner residual reduces to the baseline misfit") {
  Rng rng(23);
  const auto split = random_split(rng, 8, 6, 4);
  const auto e = Embedder::build(rfn_spec(29), 6, 4);
  RidgeOptions opts;
  opts.baseline_head_std = 0.3;
  opts.baseline_head_seed = 5;
  const auto model = fit_ridge(split, e, opts);
  const auto design = random_design(rng, 6, 4);
  const auto z = discretize(softmax_rows(design));
  const double y_h = model.baseline(e.embed(z));  // zero inner residual
  const auto lg = backward_loss(model, e, design, y_h);
  double want = 0.0;
  for (double r : model.residuals()) want += r * r;
  CHECK(oracle::rel_err(lg.value, want) < 1e-12);
}

TEST_CASE("loss gradients match straight-through finite differences") {
  Rng rng(31);
  for (int rep = 0; rep < 12; ++rep) {
    const auto split = random_split(rng, 8, 6, 4);
    const auto e = Embedder::build(rfn_spec(200 + rep, 12), 6, 4);
    RidgeOptions opts;
    if (rep % 2 == 1) {
      opts.baseline_head_std = 0.4;
      opts.baseline_head_seed = 3;
    }
    const auto model = fit_ridge(split, e, opts);
    const auto design = random_design(rng, 6, 4);
    const double y_h = 10.0;

    const auto fwd_oracle = oracle::forward_loss_fn(model, e, split.scores, y_h);
    const auto bwd_oracle = oracle::backward_loss_fn(model, e, split.scores, y_h);

    const auto got_fwd = forward_loss(model, e, design, y_h);
    CHECK(oracle::rel_err_mat(got_fwd.grad, oracle::st_fd_grad(fwd_oracle, design, 1e-5)) < 1e-4);

    const auto got_bwd = backward_loss(model, e, design, y_h);
    CHECK(oracle::rel_err_mat(got_bwd.grad, oracle::st_fd_grad(bwd_oracle, design, 1e-5)) < 1e-4);
  }
}

TEST_CASE("bidirectional loss endpoints and convex combination") {
  Rng rng(37);
  const auto split = random_split(rng, 10, 6, 4);
  const auto e = Embedder::build(rfn_spec(41), 6, 4);
  const auto model = fit_ridge(split, e, RidgeOptions{});
  const auto design = random_design(rng, 6, 4);
  const double y_h = 10.0;

  const auto fwd = forward_loss(model, e, design, y_h);
  const auto bwd = backward_loss(model, e, design, y_h);

  const auto at1 = bidirectional_loss(model, e, design, y_h, 1.0);
  CHECK(at1.loss.combined == fwd.value);
  CHECK(oracle::rel_err_mat(at1.grad, fwd.grad) < 1e-13);

  const auto at0 = bidirectional_loss(model, e, design, y_h, 0.0);
  CHECK(at0.loss.combined == bwd.value);
  CHECK(oracle::rel_err_mat(at0.grad, bwd.grad) < 1e-13);

  const auto mid = bidirectional_loss(model, e, design, y_h, 0.5);
  CHECK(mid.loss.combined == doctest::Approx((fwd.value + bwd.value) / 2.0).epsilon(1e-15));
  CHECK(mid.loss.combined == 0.5 * mid.loss.l2h + 0.5 * mid.loss.h2l);

  // d combined / d gamma = l2h - h2l, checked against a gamma difference
  const double h = 1e-6;
  const auto up = bidirectional_loss(model, e, design, y_h, 0.5 + h);
  const auto dn = bidirectional_loss(model, e, design, y_h, 0.5 - h);
  const double fd = (up.loss.combined - dn.loss.combined) / (2.0 * h);
  CHECK(oracle::rel_err(fd, mid.loss.l2h - mid.loss.h2l) < 1e-6);

  CHECK_THROWS_AS(bidirectional_loss(model, e, design, y_h, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(bidirectional_loss(model, e, design, y_h, -0.1), std::invalid_argument);
}

TEST_CASE("losses are non-negative") {
  Rng rng(43);
  for (int rep = 0; rep < 30; ++rep) {
    const auto split = random_split(rng, 6, 5, 4);
    const auto e = Embedder::build(rfn_spec(300 + rep, 8), 5, 4);
    const auto model = fit_ridge(split, e, RidgeOptions{});
    const auto design = random_design(rng, 5, 4);
    const double y_h = 4.0 * rng.normal();
    CHECK(forward_loss(model, e, design, y_h).value >= 0.0);
    CHECK(backward_loss(model, e, design, y_h).value >= 0.0);
  }
}

TEST_CASE("verbatim flag coincides with the default under a zero head") {
  Rng rng(47);
  const auto split = random_split(rng, 8, 6, 4);
  const auto e = Embedder::build(rfn_spec(53), 6, 4);
  RidgeOptions plain;
  RidgeOptions verbatim;
  verbatim.paper_verbatim_loss = true;
  const auto m1 = fit_ridge(split, e, plain);
  const auto m2 = fit_ridge(split, e, verbatim);
  const auto design = random_design(rng, 6, 4);
  const auto a = bidirectional_loss(m1, e, design, 10.0, 0.5);
  const auto b = bidirectional_loss(m2, e, design, 10.0, 0.5);
  CHECK(a.loss.l2h == b.loss.l2h);
  CHECK(a.loss.h2l == b.loss.h2l);
  CHECK(a.grad == b.grad);
}

TEST_CASE("verbatim flag drops the baseline offsets on the prediction side") {
  Rng rng(53);
  const auto split = random_split(rng, 8, 6, 4);
  const auto e = Embedder::build(rfn_spec(59), 6, 4);
  RidgeOptions opts;
  opts.baseline_head_std = 0.5;
  opts.baseline_head_seed = 11;
  opts.paper_verbatim_loss = true;
  const auto model = fit_ridge(split, e, opts);
  const auto q = e.embed(random_seq(rng, 6, 4));

  // printed forward form: k (K + beta I)^-1 (y - f0), no + f0(q) term
  RidgeOptions plain = opts;
  plain.paper_verbatim_loss = false;
  const auto full = fit_ridge(split, e, plain);
  CHECK(oracle::rel_err(model.predict_forward(q) + full.baseline(q), full.predict_forward(q)) <
        1e-10);
}
