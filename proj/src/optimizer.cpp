#include "bib/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "bib/kernels.hpp"

namespace bib {

Matrix adam_direction(AdamState& state, const Matrix& grad) {
  check_same_shape(state.m, grad, "adam_direction");
  if (!grad.all_finite()) throw std::runtime_error("adam: non-finite gradient");
  ++state.steps;
  const AdamConfig& c = state.cfg;
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.steps));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.steps));
  Matrix dir(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad.data()[i];
    double& m = state.m.data()[i];
    double& v = state.v.data()[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    dir.data()[i] = (m / m_corr) / (std::sqrt(v / v_corr) + c.eps);
  }
  return dir;
}

Matrix adam_step(AdamState& state, const Matrix& grad, double eta) {
  Matrix dir = adam_direction(state, grad);
  for (std::size_t i = 0; i < dir.size(); ++i) dir.data()[i] *= eta;
  return dir;
}

Method method_from_string(const std::string& s) {
  if (s == "grad") return Method::grad;
  if (s == "fixed-gamma") return Method::fixed_gamma;
  if (s == "bib") return Method::bib;
  if (s == "joint-gamma") return Method::joint_gamma;
  if (s == "joint-general") return Method::joint_general;
  throw std::invalid_argument("unknown method: " + s);
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::grad:
      return "grad";
    case Method::fixed_gamma:
      return "fixed-gamma";
    case Method::bib:
      return "bib";
    case Method::joint_gamma:
      return "joint-gamma";
    case Method::joint_general:
      return "joint-general";
  }
  return "unknown";
}

void RunConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!std::isfinite(y_h)) throw std::invalid_argument("y_h must be finite");
  if (!(gamma0 >= 0.0 && gamma0 <= 1.0)) throw std::invalid_argument("gamma0 must be in [0, 1]");
  if (!(eta0 >= 1e-6)) throw std::invalid_argument("eta0 must be >= 1e-6");
  if (!(beta > 0.0) || !(beta_aux > 0.0)) throw std::invalid_argument("beta values must be > 0");
  if (outer_rate_gamma < 0.0 || outer_rate_eta < 0.0)
    throw std::invalid_argument("outer rates must be >= 0");
}

namespace {

bool uses_adaptive_gamma(Method m) { return m == Method::bib || m == Method::joint_general; }

}  // namespace

Trajectory run_trajectory(const TaskModel& task, const RunConfig& config,
                          std::size_t candidate_rank, std::uint64_t init_seed) {
  config.validate();
  if (!task.split || !task.embedder || !task.ridge || !task.aux)
    throw std::invalid_argument("task model is incomplete");

  const Embedder& embedder = *task.embedder;
  const RidgeModel& ridge = *task.ridge;
  const AuxiliaryModel& aux = *task.aux;

  DesignMatrix design = init_design(*task.split, candidate_rank, init_seed);
  const std::size_t length = design.length();
  const std::size_t a = design.alphabet();
  const std::size_t d = embedder.feature_dim();

  AdamState adam(length, a, config.adam);
  AdaptiveState st;
  st.gamma = config.gamma0;
  st.eta = config.eta0;
  st.eta0 = config.eta0;
  st.outer_rate_gamma = config.outer_rate_gamma;
  st.outer_rate_eta = config.outer_rate_eta;
  st.verbatim_eta_sign = config.paper_verbatim_sign;

  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(config.iterations));

  std::vector<double> upstream0(d);  // objective-specific slot
  Matrix g0, g_h2l, g_aux;

  for (int tau = 0; tau < config.iterations; ++tau) {
    const ProbabilityMatrix probs = softmax_rows(design);
    const OneHotSequence z = discretize(probs);
    const auto fwd = embedder.forward(z);

    const auto fe = ridge.forward_loss_phi(fwd.features, config.y_h);
    const auto be = ridge.backward_loss_phi(fwd.features, config.y_h);
    const double aux_value = aux.predict(fwd.features);

    // slot 0 carries the forward-loss upstream, or the raw prediction
    // weight for the Grad baseline (ascent on pred needs no residual factor)
    if (config.method == Method::grad) {
      upstream0.assign(ridge.forward_weight().begin(), ridge.forward_weight().end());
    } else {
      upstream0.assign(fe.upstream.begin(), fe.upstream.end());
    }

    embedder.vjp3(fwd, upstream0, be.upstream, aux.weights, g0, g_h2l, g_aux);
    g0 = straight_through_vjp(g0, probs);
    g_h2l = straight_through_vjp(g_h2l, probs);
    g_aux = straight_through_vjp(g_aux, probs);

    if (uses_adaptive_gamma(config.method)) adapt_gamma(st, g_aux, g0, g_h2l);

    // objective gradient, expressed as a minimization
    Matrix g_obj(length, a);
    switch (config.method) {
      case Method::grad:
        for (std::size_t i = 0; i < g_obj.size(); ++i) g_obj.data()[i] = -g0.data()[i];
        break;
      case Method::fixed_gamma:
      case Method::bib:
        for (std::size_t i = 0; i < g_obj.size(); ++i)
          g_obj.data()[i] = st.gamma * g0.data()[i] + (1.0 - st.gamma) * g_h2l.data()[i];
        break;
      case Method::joint_gamma:
      case Method::joint_general:
        for (std::size_t i = 0; i < g_obj.size(); ++i)
          g_obj.data()[i] = st.gamma * g0.data()[i] + (1.0 - st.gamma) * g_h2l.data()[i] -
                            g_aux.data()[i];
        break;
    }

    Matrix dir;
    try {
      dir = adam_direction(adam, g_obj);
    } catch (const std::runtime_error& e) {
      traj.aborted = true;
      traj.abort_reason = e.what();
      break;
    }

    if (config.adaptive_eta) {
      Matrix ascent(length, a);
      for (std::size_t i = 0; i < ascent.size(); ++i) ascent.data()[i] = -dir.data()[i];
      adapt_eta(st, g_aux, ascent);
    }

    for (std::size_t i = 0; i < design.logits.size(); ++i)
      design.logits.data()[i] -= st.eta * dir.data()[i];

    StepRecord rec;
    rec.step = tau + 1;
    rec.l2h = fe.loss;
    rec.h2l = be.loss;
    rec.gamma = st.gamma;
    rec.eta = st.eta;
    rec.aux_score = aux_value;
    rec.tokens = discretize(softmax_rows(design)).tokens;
    traj.steps.push_back(std::move(rec));
  }

  traj.final_design = design;
  traj.final_tokens = discretize(softmax_rows(design)).tokens;
  return traj;
}

Trajectory run_bib(const TaskModel& task, const RunConfig& config, std::size_t candidate_rank,
                   std::uint64_t init_seed) {
  RunConfig c = config;
  c.method = Method::bib;
  return run_trajectory(task, c, candidate_rank, init_seed);
}

Trajectory run_grad(const TaskModel& task, const RunConfig& config, std::size_t candidate_rank,
                    std::uint64_t init_seed) {
  RunConfig c = config;
  c.method = Method::grad;
  return run_trajectory(task, c, candidate_rank, init_seed);
}

}  // namespace bib
