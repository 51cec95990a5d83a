#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bib/adaptive.hpp"
#include "bib/optimizer.hpp"
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

EmbedderSpec rfn_spec(std::uint64_t seed, int d = 12) {
  EmbedderSpec s;
  s.kind = EmbedderKind::random_feature_net;
  s.feature_dim = d;
  s.seed = seed;
  return s;
}

Matrix random_mat(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) v = std::max(v, std::abs(m.data()[i]));
  return v;
}

}  // namespace

TEST_CASE("auxiliary fit on constant scores is intercept-only in effect") {
  Rng rng(3);
  auto split = random_split(rng, 10, 6, 4);
  for (double& y : split.scores) y = 1.75;
  const auto e = Embedder::build(rfn_spec(5), 6, 4);
  const auto aux = fit_auxiliary(split, e, 1e-3);
  CHECK(aux.bias == doctest::Approx(1.75).epsilon(1e-6));
  for (const auto& seq : split.sequences)
    CHECK(aux.predict(e.embed(seq)) == doctest::Approx(1.75).epsilon(1e-6));
}

TEST_CASE("auxiliary fit matches the dense normal equations with intercept") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 3 + rng.below(10);
    const auto split = random_split(rng, n, 5, 4);
    const auto e = Embedder::build(rfn_spec(100 + rep, rep % 2 ? 4 : 20), 5, 4);
    const double beta = 1e-3;
    const auto aux = fit_auxiliary(split, e, beta);

    const Matrix feats = embed_batch(e, split.sequences);
    const auto [w, b] = oracle::ridge_with_intercept(feats, split.scores, beta);
    CHECK(oracle::rel_err(aux.bias, b) < 1e-8);
    for (std::size_t j = 0; j < w.size(); ++j) CHECK(oracle::rel_err(aux.weights[j], w[j]) < 1e-8);
  }
}

TEST_CASE("auxiliary fit interpolates a noiseless linear landscape at tiny beta") {
  Rng rng(11);
  EmbedderSpec spec;
  spec.kind = EmbedderKind::flatten;
  const auto e = Embedder::build(spec, 6, 4);
  std::vector<double> w_true(24);
  for (double& v : w_true) v = rng.normal();
  OfflineSplit split;
  std::set<std::vector<std::int32_t>> seen;
  while (split.size() < 30) {
    auto s = random_seq(rng, 6, 4);
    if (!seen.insert(s.tokens).second) continue;
    const auto f = e.embed(s);
    double y = 0.5;
    for (std::size_t j = 0; j < f.size(); ++j) y += w_true[j] * f[j];
    split.sequences.push_back(s);
    split.scores.push_back(y);
  }
  const auto aux = fit_auxiliary(split, e, 1e-10);
  CHECK(oracle::rel_err(aux.predict(e.embed(split.sequences[4])), split.scores[4]) < 1e-4);
}

TEST_CASE("auxiliary training error never exceeds the score variance") {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const auto split = random_split(rng, 8, 5, 4);
    const auto e = Embedder::build(rfn_spec(200 + rep), 5, 4);
    const auto aux = fit_auxiliary(split, e, 1e-3);
    double mean = 0.0;
    for (double y : split.scores) mean += y;
    mean /= static_cast<double>(split.size());
    double var = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
      var += (split.scores[i] - mean) * (split.scores[i] - mean);
      const double p = aux.predict(e.embed(split.sequences[i]));
      mse += (split.scores[i] - p) * (split.scores[i] - p);
    }
    CHECK(mse <= var * (1.0 + 1e-12));
  }
}

TEST_CASE("degenerate split yields the intercept-only fallback") {
  Rng rng(17);
  OfflineSplit split;
  const auto seq = random_seq(rng, 5, 4);
  split.sequences = {seq, seq, seq};
  split.scores = {1.0, 2.0, 3.0};
  const auto e = Embedder::build(rfn_spec(19), 5, 4);
  const auto aux = fit_auxiliary(split, e, 1e-3);
  CHECK(aux.degenerate);
  CHECK(aux.bias == doctest::Approx(2.0).epsilon(1e-12));
  for (double w : aux.weights) CHECK(w == 0.0);
}

TEST_CASE("zero-weight auxiliary scores the bias with zero gradient") {
  Rng rng(23);
  const auto e = Embedder::build(rfn_spec(29), 5, 4);
  AuxiliaryModel aux;
  aux.weights.assign(e.feature_dim(), 0.0);
  aux.bias = -0.75;
  const auto ev = aux_score_and_grad(aux, e, random_design(rng, 5, 4));
  CHECK(ev.value == -0.75);
  for (std::size_t i = 0; i < ev.grad.size(); ++i) CHECK(ev.grad.data()[i] == 0.0);
}

TEST_CASE("flatten auxiliary gradient is the straight-through pullback of w") {
  Rng rng(31);
  EmbedderSpec spec;
  spec.kind = EmbedderKind::flatten;
  const auto e = Embedder::build(spec, 4, 4);
  AuxiliaryModel aux;
  aux.weights.resize(16);
  for (double& w : aux.weights) w = rng.normal();
  aux.bias = 0.2;
  const auto design = random_design(rng, 4, 4);
  const auto probs = softmax_rows(design);
  const auto ev = aux_score_and_grad(aux, e, design);
  Matrix w_mat(4, 4, aux.weights);
  const Matrix want = straight_through_vjp(w_mat, probs);
  CHECK(oracle::rel_err_mat(ev.grad, want) < 1e-14);
}

TEST_CASE("auxiliary gradient matches straight-through finite differences") {
  Rng rng(37);
  for (int rep = 0; rep < 10; ++rep) {
    const auto split = random_split(rng, 8, 5, 4);
    const auto e = Embedder::build(rfn_spec(300 + rep), 5, 4);
    const auto aux = fit_auxiliary(split, e, 1e-3);
    const auto design = random_design(rng, 5, 4);
    const auto ev = aux_score_and_grad(aux, e, design);
    const Matrix want = oracle::st_fd_grad(oracle::aux_score_fn(aux, e), design, 1e-5);
    CHECK(oracle::rel_err_mat(ev.grad, want) < 1e-4);
  }
}

TEST_CASE("adapt_gamma leaves gamma alone on orthogonal hypergradients") {
  Rng rng(41);
  AdaptiveState st;
  st.gamma = 0.4;
  st.eta = 0.1;
  Matrix aux_grad(2, 3), g_l(2, 3), g_h(2, 3);
  aux_grad(0, 0) = 1.0;
  g_l(1, 1) = 2.0;
  g_h(1, 1) = 5.0;  // difference lives on a coordinate aux_grad misses
  CHECK(adapt_gamma(st, aux_grad, g_l, g_h) == 0.4);
}

TEST_CASE("adapt_gamma increases gamma when the auxiliary agrees") {
  AdaptiveState st;
  st.gamma = 0.5;
  st.eta = 0.1;
  Matrix g_l(1, 2), g_h(1, 2);
  g_h(0, 0) = 1.0;
  g_h(0, 1) = -2.0;
  Matrix aux_grad(1, 2);
  aux_grad(0, 0) = g_h(0, 0) - g_l(0, 0);
  aux_grad(0, 1) = g_h(0, 1) - g_l(0, 1);
  const double updated = adapt_gamma(st, aux_grad, g_l, g_h);
  CHECK(updated > 0.5);
}

TEST_CASE("gamma stays clamped to [0, 1] under violent updates") {
  Rng rng(43);
  AdaptiveState st;
  st.gamma = 0.9;
  st.eta = 0.5;
  st.outer_rate_gamma = 10.0;
  for (int i = 0; i < 50; ++i) {
    const auto a = random_mat(rng, 2, 3);
    const auto b = random_mat(rng, 2, 3);
    const auto c = random_mat(rng, 2, 3);
    const double g = adapt_gamma(st, a, b, c);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("adapt_eta resets to eta0 on orthogonal directions and floors") {
  AdaptiveState st;
  st.eta0 = 0.1;
  Matrix aux_grad(1, 2), dir(1, 2);
  aux_grad(0, 0) = 1.0;
  dir(0, 1) = 3.0;
  CHECK(adapt_eta(st, aux_grad, dir) == 0.1);

  // strongly misaligned: floored at eta_min
  AdaptiveState st2;
  st2.eta0 = 1e-6;
  st2.outer_rate_eta = 1.0;
  Matrix anti(1, 2);
  anti(0, 0) = -1.0;
  Matrix up(1, 2);
  up(0, 0) = 1.0;
  CHECK(adapt_eta(st2, up, anti) == st2.eta_min);
}

TEST_CASE("adapt_eta lengthens aligned steps and verbatim sign flips it") {
  Matrix aux_grad(1, 2), dir(1, 2);
  aux_grad(0, 0) = 1.0;
  dir(0, 0) = 2.0;
  AdaptiveState st;
  st.eta0 = 0.1;
  CHECK(adapt_eta(st, aux_grad, dir) > 0.1);
  AdaptiveState flipped;
  flipped.eta0 = 0.1;
  flipped.verbatim_eta_sign = true;
  CHECK(adapt_eta(flipped, aux_grad, dir) < 0.1);
}

TEST_CASE("hypergradients match one-step unrolled finite differences") {
  Rng rng(47);
  int done = 0;
  while (done < 12) {
    const auto split = random_split(rng, 8, 5, 4);
    const auto e = Embedder::build(rfn_spec(400 + done), 5, 4);
    const auto model = fit_ridge(split, e, RidgeOptions{});
    const auto aux = fit_auxiliary(split, e, 1e-3);
    const auto design = random_design(rng, 5, 4);
    const double y_h = 3.0;

    const auto fe = forward_loss(model, e, design, y_h);
    const auto be = backward_loss(model, e, design, y_h);
    const auto ae = aux_score_and_grad(aux, e, design);

    // small inner step keeps the frozen-upstream approximation inside the
    // finite-difference tolerance
    const double eta = 1e-6 / (1.0 + std::max(max_abs(fe.grad), max_abs(be.grad)));

    const double got_gamma = gamma_hypergradient(eta, ae.grad, fe.grad, be.grad);

    // independent gradients for the unrolled objective
    const Matrix g_l =
        oracle::st_fd_grad(oracle::forward_loss_fn(model, e, split.scores, y_h), design, 1e-5);
    const Matrix g_h =
        oracle::st_fd_grad(oracle::backward_loss_fn(model, e, split.scores, y_h), design, 1e-5);
    const Matrix u_aux = oracle::central_diff_grad(
        oracle::aux_score_fn(aux, e), discretize(softmax_rows(design)).to_matrix(), 1e-5);

    const auto unrolled_aux = [&](double gamma) {
      Matrix x = design.logits;
      for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] -= eta * (gamma * g_l.data()[i] + (1.0 - gamma) * g_h.data()[i]);
      const auto pp = softmax_rows(DesignMatrix{x});
      double s = 0.0;
      for (std::size_t i = 0; i < pp.probs.size(); ++i)
        s += u_aux.data()[i] * pp.probs.data()[i];
      return s;
    };
    // h = 1e-3 on the gamma axis: the unrolled objective is near-linear in
    // gamma at this inner step, so the wider difference trades no truncation
    // for far less cancellation
    const double want_gamma = oracle::central_diff(unrolled_aux, 0.5, 1e-3);
    if (std::abs(want_gamma) < 1e-14) continue;  // degenerate draw, resample
    CHECK(oracle::rel_err(got_gamma, want_gamma) < 1e-4);

    // eta hypergradient along a fixed step direction
    const auto dir = random_mat(rng, 5, 4);
    const double got_eta = eta_hypergradient(ae.grad, dir);
    const auto along = [&](double step) {
      Matrix x = design.logits;
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += step * dir.data()[i];
      const auto pp = softmax_rows(DesignMatrix{x});
      double s = 0.0;
      for (std::size_t i = 0; i < pp.probs.size(); ++i)
        s += u_aux.data()[i] * pp.probs.data()[i];
      return s;
    };
    const double eta0 = 1e-6;
    const double want_eta = oracle::central_diff(along, eta0, 1e-6);
    if (std::abs(want_eta) < 1e-14) continue;
    CHECK(oracle::rel_err(got_eta, want_eta) < 1e-4);
    ++done;
  }
}

TEST_CASE("joint objective with a zero-weight auxiliary reduces to the bidi loss") {
  Rng rng(53);
  const auto split = random_split(rng, 8, 5, 4);
  const auto e = Embedder::build(rfn_spec(59), 5, 4);
  const auto model = fit_ridge(split, e, RidgeOptions{});
  AuxiliaryModel aux;
  aux.weights.assign(e.feature_dim(), 0.0);
  aux.bias = 0.0;
  const auto design = random_design(rng, 5, 4);
  const auto joint = joint_objective(model, e, aux, design, 10.0, 0.5, JointBase::bidirectional);
  const auto bidi = bidirectional_loss(model, e, design, 10.0, 0.5);
  CHECK(joint.value == doctest::Approx(bidi.loss.combined).epsilon(1e-14));
  CHECK(oracle::rel_err_mat(joint.grad, bidi.grad) < 1e-13);
}

TEST_CASE("joint gradient equals bidi gradient minus the auxiliary gradient") {
  Rng rng(61);
  const auto split = random_split(rng, 8, 5, 4);
  const auto e = Embedder::build(rfn_spec(67), 5, 4);
  const auto model = fit_ridge(split, e, RidgeOptions{});
  const auto aux = fit_auxiliary(split, e, 1e-3);
  const auto design = random_design(rng, 5, 4);
  const auto joint = joint_objective(model, e, aux, design, 10.0, 0.5, JointBase::bidirectional);
  const auto bidi = bidirectional_loss(model, e, design, 10.0, 0.5);
  const auto ae = aux_score_and_grad(aux, e, design);
  for (std::size_t i = 0; i < joint.grad.size(); ++i)
    CHECK(joint.grad.data()[i] ==
          doctest::Approx(bidi.grad.data()[i] - ae.grad.data()[i]).epsilon(1e-10));
}

TEST_CASE("joint objective gradient matches finite differences") {
  Rng rng(71);
  const auto split = random_split(rng, 8, 5, 4);
  const auto e = Embedder::build(rfn_spec(73), 5, 4);
  const auto model = fit_ridge(split, e, RidgeOptions{});
  const auto aux = fit_auxiliary(split, e, 1e-3);
  const auto design = random_design(rng, 5, 4);
  const double y_h = 3.0;
  const auto joint = joint_objective(model, e, aux, design, y_h, 0.5, JointBase::bidirectional);

  const auto fwd_fn = oracle::forward_loss_fn(model, e, split.scores, y_h);
  const auto bwd_fn = oracle::backward_loss_fn(model, e, split.scores, y_h);
  const auto aux_fn = oracle::aux_score_fn(aux, e);
  const Matrix want = oracle::st_fd_grad(
      [&](const Matrix& z) { return 0.5 * fwd_fn(z) + 0.5 * bwd_fn(z) - aux_fn(z); }, design,
      1e-5);
  CHECK(oracle::rel_err_mat(joint.grad, want) < 1e-4);
}
