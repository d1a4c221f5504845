#pragma once

#include <cstdint>

#include "graphage/ops.hpp"
#include "graphage/patch_graph.hpp"

namespace graphage {

// The four embedding matrices entering the losses: anchor H, structural
// positive H+, neighbour positive H~+, and the row-permuted negative H-.
struct EmbeddingBundle {
    Tensor anchor;
    Tensor structural_pos;
    Tensor neighbor_pos;
    Tensor negative;
    std::vector<std::size_t> permutation;  // negative row i = anchor row permutation[i]
};

struct LossConfig {
    double alpha = 0.8;  // triplet margin
    double beta = 0.2;   // upper bound width
    double w1 = 1.0;
    double w2 = 0.5;
    double w3 = 0.5;
    std::size_t neighbor_samples = 3;  // n neighbours averaged for H~+

    void validate() const;
};

struct AnchorMlpParams {
    Tensor w1;  // [d, d_hidden]
    Tensor w2;  // [d_hidden, d_out]
    double slope = 0.01;
    double dropout_rate = 0.5;
};

// Anchor embeddings H: per-node two-layer MLP over the patch features,
// bypassing the GCN.
Tensor anchor_embed(const Tensor& patch_features, const AnchorMlpParams& mlp,
                    bool training, Rng& rng);

// Rows of h under a seeded uniform derangement (no row maps to itself).
std::pair<Tensor, std::vector<std::size_t>> negative_shuffle(const Tensor& h, std::uint64_t seed);

// Row i = mean of n seeded uniformly-sampled (without replacement) neighbour
// rows of h_struct; n == K takes all neighbours.
Tensor neighbor_positive(const Tensor& h_struct, const PatchGraph& g, std::size_t n,
                         std::uint64_t seed);

// mean_i max( d(h,pos)_i^2 - d(h,neg)_i^2 + alpha, 0 )
Tensor loss_triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                    double alpha);

// -mean_i min( d(h,pos)_i^2 - d(h,neg)_i^2 + alpha + beta, 0 )
Tensor loss_upper(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                  double alpha, double beta);

// w1 L_N(H,H+,H-) + w2 L_M(H,H~+,H-) + w3 L_V(H,H+,H-)
Tensor loss_total(const EmbeddingBundle& bundle, const LossConfig& cfg);

}  // namespace graphage
