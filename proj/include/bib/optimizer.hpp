#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bib/adaptive.hpp"
#include "bib/embedder.hpp"
#include "bib/matrix.hpp"
#include "bib/ridge.hpp"
#include "bib/sequence.hpp"

// Adam on the relaxed design plus the optimization loop shared by all
// methods: per iteration the trade-off gamma adapts first (where enabled),
// then the learning rate, then the design takes one optimizer step against
// the method's objective.

namespace bib {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long steps = 0;
  AdamConfig cfg;

  AdamState(std::size_t rows, std::size_t cols, AdamConfig c = {})
      : m(rows, cols), v(rows, cols), cfg(c) {}
};

// Updates the moments and returns the bias-corrected direction
// m_hat / (sqrt(v_hat) + eps).
Matrix adam_direction(AdamState& state, const Matrix& grad);
// The direction scaled by eta.
Matrix adam_step(AdamState& state, const Matrix& grad, double eta);

enum class Method {
  grad,           // ascend the forward ridge prediction
  fixed_gamma,    // bidirectional loss at a constant gamma
  bib,            // bidirectional loss with Adaptive-gamma
  joint_gamma,    // fixed gamma, auxiliary folded into the objective
  joint_general,  // Adaptive-gamma, auxiliary folded into the objective
};

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);

struct RunConfig {
  Method method = Method::bib;
  int iterations = 25;  // T
  double y_h = 10.0;
  double gamma0 = 0.5;
  double eta0 = 0.1;
  double outer_rate_gamma = 0.05;
  double outer_rate_eta = 0.01;
  bool adaptive_eta = false;
  double beta = 1e-3;
  double beta_aux = 1e-3;
  bool paper_verbatim_loss = false;
  bool paper_verbatim_sign = false;
  double baseline_head_std = 0.0;  // seeded head for the verbatim-loss comparison
  std::uint64_t baseline_head_seed = 0;
  AdamConfig adam;

  void validate() const;
};

struct StepRecord {
  int step = 0;  // 1-based
  double l2h = 0.0;
  double h2l = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  double aux_score = 0.0;
  std::vector<std::int32_t> tokens;  // discretized design after the step
};

struct Trajectory {
  std::vector<StepRecord> steps;
  DesignMatrix final_design;
  std::vector<std::int32_t> final_tokens;
  bool aborted = false;
  std::string abort_reason;
};

// Shared immutable inputs for one task.
struct TaskModel {
  const OfflineSplit* split = nullptr;
  const Embedder* embedder = nullptr;
  const RidgeModel* ridge = nullptr;
  const AuxiliaryModel* aux = nullptr;
};

Trajectory run_trajectory(const TaskModel& task, const RunConfig& config,
                          std::size_t candidate_rank, std::uint64_t init_seed);

// Algorithm entry points; thin wrappers over run_trajectory.
Trajectory run_bib(const TaskModel& task, const RunConfig& config, std::size_t candidate_rank,
                   std::uint64_t init_seed);
Trajectory run_grad(const TaskModel& task, const RunConfig& config, std::size_t candidate_rank,
                    std::uint64_t init_seed);

}  // namespace bib
