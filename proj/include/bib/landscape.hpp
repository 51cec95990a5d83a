#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bib/sequence.hpp"

// Seeded synthetic fitness landscapes. Small spaces are enumerated exactly
// (bounds, quantiles); large spaces fall back to a seeded sample pool with
// the bound provenance recorded.

namespace bib {

enum class LandscapeOrder { linear, pairwise, nk };

LandscapeOrder order_from_string(const std::string& s);
std::string order_to_string(LandscapeOrder o);

struct LandscapeSpec {
  std::uint64_t seed = 1;
  int length = 8;
  int alphabet = 4;
  LandscapeOrder order = LandscapeOrder::pairwise;
  int nk_neighbors = 4;  // NK neighborhood size

  bool operator==(const LandscapeSpec&) const = default;
};

// Spaces up to this size are enumerated exactly.
constexpr std::uint64_t kEnumerationLimit = 1u << 20;
// Refuse designs wider than this without an explicit override.
constexpr std::uint64_t kSizeGuard = 16384;

class Landscape {
 public:
  static Landscape generate(const LandscapeSpec& spec, bool allow_large = false);
  // Rebuild from a spec with known bounds, skipping the sampling pass.
  static Landscape from_stored_bounds(const LandscapeSpec& spec, double min_entire,
                                      double max_entire, const std::string& bound_method);

  const LandscapeSpec& spec() const { return spec_; }
  const TokenAlphabet& alphabet() const { return alphabet_; }
  bool enumerable() const { return enumerable_; }
  std::uint64_t space_size() const { return space_size_; }

  double score(std::span<const std::int32_t> tokens) const;
  double score(const OneHotSequence& seq) const;

  double min_entire() const { return min_entire_; }
  double max_entire() const { return max_entire_; }
  const std::string& bound_method() const { return bound_method_; }

  // widen bounds with known points (offline split, extra pools)
  void absorb_scores(std::span<const double> scores);

  // (y - min) / (max - min); throws on a degenerate landscape
  double normalize(double y_raw) const;

  // q-quantile of the score distribution: exact under enumeration, else from
  // the sample pool
  double quantile(double q) const;

  // full score table in token-odometer order; enumerable landscapes only
  const std::vector<double>& enumerated_scores() const;

 private:
  double score_tokens(const std::int32_t* tokens) const;

  LandscapeSpec spec_;
  TokenAlphabet alphabet_;
  bool enumerable_ = false;
  std::uint64_t space_size_ = 0;
  double min_entire_ = 0.0;
  double max_entire_ = 0.0;
  std::string bound_method_;

  Matrix linear_;                          // L x A
  std::vector<Matrix> pair_tables_;        // one A x A table per position pair
  std::vector<std::vector<int>> nk_sets_;  // per-position neighborhoods
  std::uint64_t nk_base_ = 0;              // precomputed hash base for nk terms
  std::vector<double> enum_scores_;        // enumerable only
  std::vector<double> pool_sorted_;        // sampled pool, sorted
};

// Uniform seeded sample of `size` distinct sequences scoring at or below the
// percentile_cap quantile.
OfflineSplit build_offline_split(const Landscape& landscape, std::size_t size,
                                 double percentile_cap, std::uint64_t seed);

double normalize_score(const Landscape& landscape, double y_raw);

struct CandidateResult {
  std::vector<std::int32_t> tokens;
  double aux_score = 0.0;
};

struct TrialEvaluation {
  double max_normalized = 0.0;
  std::size_t kept = 0;
};

// Deduplicates candidates, keeps at most n_eval ranked by auxiliary score,
// and reports the best normalized oracle value among them.
TrialEvaluation evaluate_topN(std::span<const CandidateResult> candidates,
                              const Landscape& landscape, std::size_t n_eval);

struct EvaluationReport {
  std::string method;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_trial;
  std::size_t n_eval = 0;
};

EvaluationReport summarize_trials(const std::string& method, std::span<const double> per_trial,
                                  std::size_t n_eval);

}  // namespace bib
