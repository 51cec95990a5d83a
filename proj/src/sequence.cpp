#include "bib/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bib/rng.hpp"

namespace bib {

namespace {

constexpr const char* kDnaLabels = "ACGT";
constexpr const char* kProteinLabels = "ACDEFGHIKLMNPQRSTVWY";
constexpr const char* kGenericLabels = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

}  // namespace

TokenAlphabet TokenAlphabet::dna() { return TokenAlphabet{4, kDnaLabels}; }

TokenAlphabet TokenAlphabet::protein() { return TokenAlphabet{20, kProteinLabels}; }

TokenAlphabet TokenAlphabet::generic(int size) {
  if (size == 4) return dna();
  if (size == 20) return protein();
  if (size < 2 || size > 52) throw std::invalid_argument("alphabet size must be in [2, 52]");
  return TokenAlphabet{size, std::string(kGenericLabels, static_cast<std::size_t>(size))};
}

void TokenAlphabet::validate() const {
  if (size < 2) throw std::invalid_argument("alphabet size must be >= 2");
  if (static_cast<int>(labels.size()) != size)
    throw std::invalid_argument("alphabet labels must match size");
  std::string sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("alphabet labels must be distinct");
}

void DesignMatrix::validate() const {
  if (logits.rows() < 1 || logits.cols() < 2)
    throw std::invalid_argument("design must be at least 1 x 2");
  if (!logits.all_finite()) throw std::invalid_argument("design logits must be finite");
}

void ProbabilityMatrix::validate() const {
  if (probs.rows() < 1 || probs.cols() < 2)
    throw std::invalid_argument("probability matrix must be at least 1 x 2");
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      const double p = probs(r, c);
      if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("probability rows must sum to 1");
  }
}

Matrix OneHotSequence::to_matrix() const {
  Matrix m(tokens.size(), static_cast<std::size_t>(alphabet));
  for (std::size_t l = 0; l < tokens.size(); ++l) m(l, static_cast<std::size_t>(tokens[l])) = 1.0;
  return m;
}

OneHotSequence OneHotSequence::from_matrix(const Matrix& onehot) {
  OneHotSequence seq;
  seq.alphabet = static_cast<std::int32_t>(onehot.cols());
  seq.tokens.resize(onehot.rows());
  for (std::size_t r = 0; r < onehot.rows(); ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < onehot.cols(); ++c) {
      const double v = onehot(r, c);
      if (v == 1.0) {
        ++ones;
        seq.tokens[r] = static_cast<std::int32_t>(c);
      } else if (v != 0.0) {
        throw std::invalid_argument("one-hot entries must be 0 or 1");
      }
    }
    if (ones != 1) throw std::invalid_argument("one-hot rows must have exactly one 1");
  }
  return seq;
}

void OneHotSequence::validate() const {
  if (alphabet < 2) throw std::invalid_argument("one-hot alphabet must be >= 2");
  if (tokens.empty()) throw std::invalid_argument("one-hot sequence must be non-empty");
  for (std::int32_t t : tokens)
    if (t < 0 || t >= alphabet) throw std::invalid_argument("token index out of range");
}

ProbabilityMatrix softmax_rows(const DesignMatrix& design) {
  design.validate();
  const Matrix& x = design.logits;
  Matrix p(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double e = std::exp(x(r, c) - mx);
      p(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) p(r, c) /= sum;
  }
  return ProbabilityMatrix{std::move(p)};
}

OneHotSequence discretize(const ProbabilityMatrix& probs) {
  probs.validate();
  const Matrix& p = probs.probs;
  OneHotSequence seq;
  seq.alphabet = static_cast<std::int32_t>(p.cols());
  seq.tokens.resize(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.cols(); ++c)
      if (p(r, c) > p(r, best)) best = c;
    seq.tokens[r] = static_cast<std::int32_t>(best);
  }
  return seq;
}

Matrix straight_through_vjp(const Matrix& grad_wrt_onehot, const ProbabilityMatrix& probs) {
  check_same_shape(grad_wrt_onehot, probs.probs, "straight_through_vjp");
  const Matrix& p = probs.probs;
  Matrix out(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double gp = 0.0;  // <g_row, p_row>
    for (std::size_t c = 0; c < p.cols(); ++c) gp += grad_wrt_onehot(r, c) * p(r, c);
    for (std::size_t c = 0; c < p.cols(); ++c)
      out(r, c) = p(r, c) * (grad_wrt_onehot(r, c) - gp);
  }
  return out;
}

KmerProbMatrix kmer_probabilities(const ProbabilityMatrix& probs, int k) {
  probs.validate();
  const Matrix& p = probs.probs;
  const std::size_t length = p.rows();
  const std::size_t a = p.cols();
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (static_cast<std::size_t>(k) > length) throw std::invalid_argument("k must be <= L");
  std::size_t vocab = 1;
  for (int j = 0; j < k; ++j) {
    vocab *= a;
    if (vocab > (1u << 20)) throw std::invalid_argument("k-mer vocabulary too large (A^k > 2^20)");
  }
  const std::size_t windows = length - static_cast<std::size_t>(k) + 1;

  Matrix out(windows, vocab);
  for (std::size_t w = 0; w < windows; ++w) {
    // fill window products incrementally over positions
    out(w, 0) = 1.0;
    std::size_t filled = 1;
    for (int j = 0; j < k; ++j) {
      // expand: each prefix of length j becomes A entries of length j+1
      for (std::size_t idx = filled; idx-- > 0;) {
        const double base = out(w, idx);
        for (std::size_t t = a; t-- > 0;) out(w, idx * a + t) = base * p(w + j, t);
      }
      filled *= a;
    }
  }
  return KmerProbMatrix{std::move(out), k};
}

void OfflineSplit::validate() const {
  if (sequences.size() < 2) throw std::invalid_argument("offline split needs at least 2 points");
  if (sequences.size() != scores.size())
    throw std::invalid_argument("offline split sequence/score count mismatch");
  const std::size_t length = sequences.front().length();
  const std::int32_t a = sequences.front().alphabet;
  for (const auto& s : sequences) {
    s.validate();
    if (s.length() != length || s.alphabet != a)
      throw std::invalid_argument("offline split sequences must share shape");
  }
  for (double y : scores)
    if (!std::isfinite(y)) throw std::invalid_argument("offline split scores must be finite");
}

std::vector<std::size_t> OfflineSplit::ranking() const {
  std::vector<std::size_t> idx(sequences.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  return idx;
}

DesignMatrix init_design(const OfflineSplit& split, std::size_t rank, std::uint64_t noise_seed) {
  split.validate();
  if (rank >= split.size()) throw std::invalid_argument("init rank exceeds dataset size");
  const auto order = split.ranking();
  const OneHotSequence& source = split.sequences[order[rank]];

  const std::size_t length = source.length();
  const std::size_t a = static_cast<std::size_t>(source.alphabet);
  Rng rng(noise_seed);
  Matrix x(length, a);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = 0.01 * rng.normal();

  // swap each row's maximum into the source token's column so that
  // discretize(softmax(X)) reproduces the source sequence
  for (std::size_t l = 0; l < length; ++l) {
    std::size_t amax = 0;
    for (std::size_t c = 1; c < a; ++c)
      if (x(l, c) > x(l, amax)) amax = c;
    const std::size_t target = static_cast<std::size_t>(source.tokens[l]);
    std::swap(x(l, amax), x(l, target));
  }
  return DesignMatrix{std::move(x)};
}

std::string tokens_to_string(const std::vector<std::int32_t>& tokens, const TokenAlphabet& ab) {
  std::string s;
  s.reserve(tokens.size());
  for (std::int32_t t : tokens) {
    if (t < 0 || t >= ab.size) throw std::invalid_argument("token index out of alphabet range");
    s.push_back(ab.labels[static_cast<std::size_t>(t)]);
  }
  return s;
}

std::vector<std::int32_t> string_to_tokens(const std::string& s, const TokenAlphabet& ab) {
  std::vector<std::int32_t> tokens;
  tokens.reserve(s.size());
  for (char ch : s) {
    const std::size_t pos = ab.labels.find(ch);
    if (pos == std::string::npos) throw std::invalid_argument("unknown token label");
    tokens.push_back(static_cast<std::int32_t>(pos));
  }
  return tokens;
}

}  // namespace bib
