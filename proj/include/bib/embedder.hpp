#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bib/matrix.hpp"
#include "bib/sequence.hpp"

// Seeded frozen feature maps standing in for a pre-trained sequence model.
// Parameters are fixed at construction; the induced kernel is the plain inner
// product of features.

namespace bib {

enum class EmbedderKind { flatten, random_feature_net, kmer_pool };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::random_feature_net;
  int feature_dim = 64;    // random-feature-net output width
  std::uint64_t seed = 0;  // parameter seed
  int hidden_width = 0;    // random-feature-net hidden width; 0 = 4*L*A
  int k = 3;               // kmer-pool window

  bool operator==(const EmbedderSpec&) const = default;
};

EmbedderKind embedder_kind_from_string(const std::string& s);
std::string embedder_kind_to_string(EmbedderKind k);

class Embedder {
 public:
  // Parameters depend on (spec, length, alphabet) only.
  static Embedder build(const EmbedderSpec& spec, std::size_t length, std::size_t alphabet);

  const EmbedderSpec& spec() const { return spec_; }
  std::size_t length() const { return length_; }
  std::size_t alphabet() const { return alphabet_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Forward pass with the intermediates the backward pass needs.
  struct Forward {
    std::vector<double> features;
    std::vector<double> hidden;  // tanh activations (random-feature-net)
    Matrix input;                // input copy (kmer-pool)
  };

  Forward forward(const OneHotSequence& z) const;
  Forward forward(const Matrix& dense) const;

  std::vector<double> embed(const OneHotSequence& z) const { return forward(z).features; }
  std::vector<double> embed(const Matrix& dense) const { return forward(dense).features; }

  // Exact vector-Jacobian product of the feature map at the forward input.
  Matrix vjp(const Forward& fwd, std::span<const double> upstream) const;
  // Three upstreams pulled back in one pass over the parameters.
  void vjp3(const Forward& fwd, std::span<const double> u0, std::span<const double> u1,
            std::span<const double> u2, Matrix& g0, Matrix& g1, Matrix& g2) const;

 private:
  void kmer_vjp(const Forward& fwd, std::span<const double> upstream, Matrix& g) const;

  EmbedderSpec spec_;
  std::size_t length_ = 0;
  std::size_t alphabet_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t hidden_ = 0;
  // random-feature-net parameters; w_in_ is stored input-major (L*A) x H so
  // both the forward gather and the backward dots walk contiguous rows
  Matrix w_in_;
  Matrix w_out_;  // d x H
};

// Feature rows for a batch of sequences.
Matrix embed_batch(const Embedder& embedder, std::span<const OneHotSequence> batch);

// Kernel matrix: entry (i, j) = <embed(a_i), embed(b_j)>.
Matrix gram(const Embedder& embedder, std::span<const OneHotSequence> batch_a,
            std::span<const OneHotSequence> batch_b);
Matrix gram_features(const Matrix& feats_a, const Matrix& feats_b);

}  // namespace bib
