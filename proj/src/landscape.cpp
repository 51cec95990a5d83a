#include "bib/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "bib/rng.hpp"

namespace bib {

namespace {

constexpr std::size_t kPoolSize = 1000000;

std::uint64_t saturating_pow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > UINT64_MAX / base) return UINT64_MAX;
    r *= base;
  }
  return r;
}

}  // namespace

LandscapeOrder order_from_string(const std::string& s) {
  if (s == "linear") return LandscapeOrder::linear;
  if (s == "pairwise") return LandscapeOrder::pairwise;
  if (s == "nk") return LandscapeOrder::nk;
  throw std::invalid_argument("unknown landscape order: " + s);
}

std::string order_to_string(LandscapeOrder o) {
  switch (o) {
    case LandscapeOrder::linear:
      return "linear";
    case LandscapeOrder::pairwise:
      return "pairwise";
    case LandscapeOrder::nk:
      return "nk";
  }
  return "unknown";
}

Landscape Landscape::generate(const LandscapeSpec& spec, bool allow_large) {
  if (spec.length < 1) throw std::invalid_argument("landscape length must be >= 1");
  if (spec.alphabet < 2 || spec.alphabet > 52)
    throw std::invalid_argument("landscape alphabet must be in [2, 52]");
  const std::uint64_t cells =
      static_cast<std::uint64_t>(spec.length) * static_cast<std::uint64_t>(spec.alphabet);
  if (cells > kSizeGuard && !allow_large)
    throw std::invalid_argument("landscape size guard exceeded; pass the override to proceed");
  if (spec.order == LandscapeOrder::nk &&
      (spec.nk_neighbors < 1 || spec.nk_neighbors >= spec.length))
    throw std::invalid_argument("nk neighborhood must satisfy 1 <= K < L");

  Landscape ls;
  ls.spec_ = spec;
  ls.alphabet_ = TokenAlphabet::generic(spec.alphabet);
  ls.space_size_ = saturating_pow(static_cast<std::uint64_t>(spec.alphabet), spec.length);
  ls.enumerable_ = ls.space_size_ <= kEnumerationLimit;

  const std::size_t length = static_cast<std::size_t>(spec.length);
  const std::size_t a = static_cast<std::size_t>(spec.alphabet);
  Rng rng(mix_seed({spec.seed, hash_bytes("landscape")}));

  ls.linear_ = Matrix(length, a);
  for (std::size_t i = 0; i < ls.linear_.size(); ++i) ls.linear_.data()[i] = rng.normal();

  if (spec.order == LandscapeOrder::pairwise) {
    ls.pair_tables_.reserve(length * (length - 1) / 2);
    for (std::size_t l = 0; l < length; ++l)
      for (std::size_t l2 = l + 1; l2 < length; ++l2) {
        Matrix q(a, a);
        for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
        ls.pair_tables_.push_back(std::move(q));
      }
  } else if (spec.order == LandscapeOrder::nk) {
    ls.nk_base_ = mix_seed({spec.seed, hash_bytes("nk-term")});
    ls.nk_sets_.resize(length);
    for (std::size_t l = 0; l < length; ++l) {
      std::set<int> chosen;
      while (chosen.size() < static_cast<std::size_t>(spec.nk_neighbors)) {
        const int cand = static_cast<int>(rng.below(length));
        if (cand != static_cast<int>(l)) chosen.insert(cand);
      }
      ls.nk_sets_[l].assign(chosen.begin(), chosen.end());
    }
  }

  // bounds: exact by enumeration, else best/worst of a seeded uniform pool
  if (ls.enumerable_) {
    ls.enum_scores_.resize(ls.space_size_);
    std::vector<std::int32_t> tokens(length, 0);
    for (std::uint64_t idx = 0;; ++idx) {
      ls.enum_scores_[idx] = ls.score_tokens(tokens.data());
      std::size_t pos = length;
      while (pos-- > 0) {
        if (++tokens[pos] < static_cast<std::int32_t>(a)) break;
        tokens[pos] = 0;
      }
      if (idx + 1 == ls.space_size_) break;
    }
    const auto [mn, mx] = std::minmax_element(ls.enum_scores_.begin(), ls.enum_scores_.end());
    ls.min_entire_ = *mn;
    ls.max_entire_ = *mx;
    ls.bound_method_ = "enumeration";
  } else {
    Rng pool_rng(mix_seed({spec.seed, hash_bytes("bound-pool")}));
    ls.pool_sorted_.resize(kPoolSize);
    std::vector<std::int32_t> tokens(length);
    for (std::size_t i = 0; i < kPoolSize; ++i) {
      for (std::size_t l = 0; l < length; ++l)
        tokens[l] = static_cast<std::int32_t>(pool_rng.below(a));
      ls.pool_sorted_[i] = ls.score_tokens(tokens.data());
    }
    std::sort(ls.pool_sorted_.begin(), ls.pool_sorted_.end());
    ls.min_entire_ = ls.pool_sorted_.front();
    ls.max_entire_ = ls.pool_sorted_.back();
    ls.bound_method_ = "sampled-1000000";
  }
  return ls;
}

Landscape Landscape::from_stored_bounds(const LandscapeSpec& spec, double min_entire,
                                        double max_entire, const std::string& bound_method) {
  Landscape ls = generate(spec, /*allow_large=*/true);
  ls.min_entire_ = min_entire;
  ls.max_entire_ = max_entire;
  ls.bound_method_ = bound_method;
  return ls;
}

double Landscape::score_tokens(const std::int32_t* tokens) const {
  const std::size_t length = static_cast<std::size_t>(spec_.length);
  double s = 0.0;
  for (std::size_t l = 0; l < length; ++l) s += linear_(l, static_cast<std::size_t>(tokens[l]));

  if (spec_.order == LandscapeOrder::pairwise) {
    std::size_t pair = 0;
    for (std::size_t l = 0; l < length; ++l)
      for (std::size_t l2 = l + 1; l2 < length; ++l2, ++pair)
        s += pair_tables_[pair](static_cast<std::size_t>(tokens[l]),
                                static_cast<std::size_t>(tokens[l2]));
  } else if (spec_.order == LandscapeOrder::nk) {
    // per-position contribution keyed by the joint neighborhood state;
    // values come from a stateless hash so no A^(K+1) tables are stored
    const std::uint64_t a = static_cast<std::uint64_t>(spec_.alphabet);
    for (std::size_t l = 0; l < length; ++l) {
      std::uint64_t joint = static_cast<std::uint64_t>(tokens[l]);
      for (int nb : nk_sets_[l])
        joint = joint * a + static_cast<std::uint64_t>(tokens[static_cast<std::size_t>(nb)]);
      s += hash_normal(mix_seed({nk_base_, static_cast<std::uint64_t>(l), joint}));
    }
  }
  return s;
}

double Landscape::score(std::span<const std::int32_t> tokens) const {
  if (tokens.size() != static_cast<std::size_t>(spec_.length))
    throw std::invalid_argument("sequence length mismatch");
  for (std::int32_t t : tokens)
    if (t < 0 || t >= spec_.alphabet) throw std::invalid_argument("token out of range");
  return score_tokens(tokens.data());
}

double Landscape::score(const OneHotSequence& seq) const { return score(seq.tokens); }

void Landscape::absorb_scores(std::span<const double> scores) {
  for (double y : scores) {
    min_entire_ = std::min(min_entire_, y);
    max_entire_ = std::max(max_entire_, y);
  }
}

double Landscape::normalize(double y_raw) const {
  const double range = max_entire_ - min_entire_;
  if (!(range > 0.0)) throw std::runtime_error("degenerate landscape: max equals min");
  return (y_raw - min_entire_) / range;
}

double Landscape::quantile(double q) const {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("quantile must be in (0, 1]");
  const std::vector<double>* scores = nullptr;
  std::vector<double> sorted;
  if (enumerable_) {
    sorted = enum_scores_;
    std::sort(sorted.begin(), sorted.end());
    scores = &sorted;
  } else {
    scores = &pool_sorted_;
  }
  if (scores->empty()) throw std::runtime_error("landscape has no score pool for quantiles");
  const std::size_t n = scores->size();
  const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return (*scores)[std::min(rank == 0 ? 0 : rank - 1, n - 1)];
}

const std::vector<double>& Landscape::enumerated_scores() const {
  if (!enumerable_) throw std::runtime_error("landscape is not enumerable");
  return enum_scores_;
}

OfflineSplit build_offline_split(const Landscape& landscape, std::size_t size,
                                 double percentile_cap, std::uint64_t seed) {
  if (size < 2) throw std::invalid_argument("split size must be >= 2");
  if (!(percentile_cap > 0.0 && percentile_cap <= 1.0))
    throw std::invalid_argument("percentile_cap must be in (0, 1]");

  const double threshold = landscape.quantile(percentile_cap);
  const std::size_t length = static_cast<std::size_t>(landscape.spec().length);
  const std::uint64_t a = static_cast<std::uint64_t>(landscape.spec().alphabet);

  if (landscape.enumerable()) {
    const auto& all = landscape.enumerated_scores();
    std::size_t below = 0;
    for (double y : all)
      if (y <= threshold) ++below;
    if (below < size)
      throw std::invalid_argument("split size exceeds the points below the percentile cap");
  }

  OfflineSplit split;
  split.sequences.reserve(size);
  split.scores.reserve(size);
  Rng rng(seed);
  std::set<std::vector<std::int32_t>> taken;
  const std::size_t max_attempts = 10000 * size + 1000000;
  std::size_t attempts = 0;
  std::vector<std::int32_t> tokens(length);
  while (split.size() < size) {
    if (++attempts > max_attempts)
      throw std::runtime_error("offline split sampling failed; cap too tight for the space");
    for (std::size_t l = 0; l < length; ++l) tokens[l] = static_cast<std::int32_t>(rng.below(a));
    const double y = landscape.score(tokens);
    if (y > threshold) continue;
    if (!taken.insert(tokens).second) continue;
    split.sequences.push_back(
        OneHotSequence{tokens, static_cast<std::int32_t>(landscape.spec().alphabet)});
    split.scores.push_back(y);
  }
  return split;
}

double normalize_score(const Landscape& landscape, double y_raw) {
  return landscape.normalize(y_raw);
}

TrialEvaluation evaluate_topN(std::span<const CandidateResult> candidates,
                              const Landscape& landscape, std::size_t n_eval) {
  if (candidates.empty()) throw std::invalid_argument("evaluate_topN needs candidates");
  if (n_eval == 0) throw std::invalid_argument("n_eval must be >= 1");

  // deduplicate; identical sequences share one slot
  std::vector<CandidateResult> unique;
  {
    std::set<std::vector<std::int32_t>> seen;
    for (const auto& c : candidates)
      if (seen.insert(c.tokens).second) unique.push_back(c);
  }

  // "most promising": keep the n_eval best by auxiliary score
  if (unique.size() > n_eval) {
    std::sort(unique.begin(), unique.end(), [](const CandidateResult& x, const CandidateResult& y) {
      if (x.aux_score != y.aux_score) return x.aux_score > y.aux_score;
      return x.tokens < y.tokens;
    });
    unique.resize(n_eval);
  }

  TrialEvaluation ev;
  ev.kept = unique.size();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : unique) best = std::max(best, landscape.normalize(landscape.score(c.tokens)));
  ev.max_normalized = best;
  return ev;
}

EvaluationReport summarize_trials(const std::string& method, std::span<const double> per_trial,
                                  std::size_t n_eval) {
  if (per_trial.empty()) throw std::invalid_argument("no trials to summarize");
  EvaluationReport rep;
  rep.method = method;
  rep.per_trial.assign(per_trial.begin(), per_trial.end());
  rep.n_eval = n_eval;
  double sum = 0.0;
  for (double v : per_trial) sum += v;
  rep.mean = sum / static_cast<double>(per_trial.size());
  double ss = 0.0;
  for (double v : per_trial) ss += (v - rep.mean) * (v - rep.mean);
  rep.stddev = std::sqrt(ss / static_cast<double>(per_trial.size()));
  return rep;
}

}  // namespace bib
