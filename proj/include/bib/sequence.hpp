#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bib/matrix.hpp"

// Relaxed sequence representation: L x A logit matrices, their row-softmax
// relaxations, argmax discretization with a straight-through backward pass,
// k-mer window probabilities, and seeded design initialization.

namespace bib {

struct TokenAlphabet {
  int size = 0;
  std::string labels;  // one character per token, index order

  static TokenAlphabet dna();
  static TokenAlphabet protein();
  // 4 -> DNA, 20 -> protein, otherwise generic letters (A <= 52)
  static TokenAlphabet generic(int size);

  void validate() const;
};

// Relaxed design under optimization: real-valued logits, one row per position.
struct DesignMatrix {
  Matrix logits;

  std::size_t length() const { return logits.rows(); }
  std::size_t alphabet() const { return logits.cols(); }
  void validate() const;
};

// Row-stochastic relaxation of a design.
struct ProbabilityMatrix {
  Matrix probs;

  void validate() const;
};

struct KmerProbMatrix {
  Matrix probs;  // (L-k+1) x A^k
  int k = 0;
};

struct OneHotSequence {
  std::vector<std::int32_t> tokens;
  std::int32_t alphabet = 0;

  std::size_t length() const { return tokens.size(); }
  Matrix to_matrix() const;
  static OneHotSequence from_matrix(const Matrix& onehot);
  void validate() const;

  bool operator==(const OneHotSequence&) const = default;
  bool operator<(const OneHotSequence& o) const { return tokens < o.tokens; }
};

// Row-wise softmax, stabilized by per-row max subtraction.
ProbabilityMatrix softmax_rows(const DesignMatrix& design);

// Per-row argmax; ties resolved to the lowest token index.
OneHotSequence discretize(const ProbabilityMatrix& probs);

// Pulls an upstream gradient taken at the one-hot forward value back through
// the softmax Jacobian of the relaxed probabilities. The argmax step itself
// contributes no Jacobian.
Matrix straight_through_vjp(const Matrix& grad_wrt_onehot, const ProbabilityMatrix& probs);

// Window probabilities: entry (w, t1..tk) = prod_j probs[w+j, t_j], k-mer
// token index encoded base-A with t1 most significant.
KmerProbMatrix kmer_probabilities(const ProbabilityMatrix& probs, int k);

// Offline dataset of discrete sequences with raw scores.
struct OfflineSplit {
  std::vector<OneHotSequence> sequences;
  std::vector<double> scores;

  std::size_t size() const { return sequences.size(); }
  void validate() const;
  // indices sorted by descending score, stable on ties
  std::vector<std::size_t> ranking() const;
};

// Gaussian logits (std 0.01) arranged so the design discretizes exactly to
// the rank-th best sequence of the split (rank 0 = best-of-dataset).
DesignMatrix init_design(const OfflineSplit& split, std::size_t rank, std::uint64_t noise_seed);

std::string tokens_to_string(const std::vector<std::int32_t>& tokens, const TokenAlphabet& ab);
std::vector<std::int32_t> string_to_tokens(const std::string& s, const TokenAlphabet& ab);

}  // namespace bib
