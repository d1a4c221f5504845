#include "graphage/contrastive.hpp"

#include <algorithm>
#include <numeric>

namespace graphage {

void LossConfig::validate() const {
    if (alpha <= 0.0) throw ConfigError("loss config: alpha must be > 0");
    if (beta <= 0.0) throw ConfigError("loss config: beta must be > 0");
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw ConfigError("loss config: weights must be >= 0");
    if (neighbor_samples == 0) throw ConfigError("loss config: neighbor_samples must be positive");
}

Tensor anchor_embed(const Tensor& patch_features, const AnchorMlpParams& mlp,
                    bool training, Rng& rng) {
    Tensor hidden = dropout(leaky_relu(matmul(patch_features, mlp.w1), mlp.slope),
                            mlp.dropout_rate, rng, training);
    return matmul(hidden, mlp.w2);
}

std::pair<Tensor, std::vector<std::size_t>> negative_shuffle(const Tensor& h, std::uint64_t seed) {
    if (h.rank() != 2) throw ShapeError("negative_shuffle: expected matrix, got " + shape_str(h.shape()));
    const std::size_t n = h.dim(0);
    if (n < 2) throw ConfigError("negative_shuffle: need at least 2 rows for a derangement");
    Rng rng = make_rng(seed, /*tag=*/0x6e656761ULL);  // negative stream
    std::vector<std::size_t> perm(n);
    // rejection-sample uniform permutations until none has a fixed point;
    // acceptance probability tends to 1/e, so this terminates quickly
    bool ok = false;
    while (!ok) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i) {
            std::size_t j = uniform_index(rng, i + 1);
            std::swap(perm[i], perm[j]);
        }
        ok = true;
        for (std::size_t i = 0; i < n; ++i)
            if (perm[i] == i) { ok = false; break; }
    }
    return {gather_rows(h, perm), perm};
}

Tensor neighbor_positive(const Tensor& h_struct, const PatchGraph& g, std::size_t n,
                         std::uint64_t seed) {
    const std::size_t k = g.k();
    if (n == 0 || n > k) {
        throw ConfigError("neighbor_positive: need 0 < n <= K, got n=" + std::to_string(n) +
                          ", K=" + std::to_string(k));
    }
    Rng rng = make_rng(seed, /*tag=*/0x6e626f72ULL);  // neighbour-sample stream
    std::vector<Tensor> rows;
    rows.reserve(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        std::vector<std::size_t> pool = g.neighbors[i];
        for (std::size_t t = 0; t < n; ++t) {
            std::size_t j = t + uniform_index(rng, pool.size() - t);
            std::swap(pool[t], pool[j]);
        }
        pool.resize(n);
        rows.push_back(colwise_mean(gather_rows(h_struct, pool)));
    }
    return vstack(rows);
}

Tensor loss_triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                    double alpha) {
    Tensor dpos = row_distance_sq(anchor, positive);
    Tensor dneg = row_distance_sq(anchor, negative);
    return mean(hinge_pos(add_scalar(sub(dpos, dneg), alpha)));
}

Tensor loss_upper(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                  double alpha, double beta) {
    Tensor dpos = row_distance_sq(anchor, positive);
    Tensor dneg = row_distance_sq(anchor, negative);
    return scale(mean(hinge_neg(add_scalar(sub(dpos, dneg), alpha + beta))), -1.0);
}

Tensor loss_total(const EmbeddingBundle& bundle, const LossConfig& cfg) {
    Tensor total = Tensor::scalar(0.0);
    if (cfg.w1 != 0.0)
        total = add(total, scale(loss_triplet(bundle.anchor, bundle.structural_pos,
                                              bundle.negative, cfg.alpha), cfg.w1));
    if (cfg.w2 != 0.0)
        total = add(total, scale(loss_triplet(bundle.anchor, bundle.neighbor_pos,
                                              bundle.negative, cfg.alpha), cfg.w2));
    if (cfg.w3 != 0.0)
        total = add(total, scale(loss_upper(bundle.anchor, bundle.structural_pos,
                                            bundle.negative, cfg.alpha, cfg.beta), cfg.w3));
    return total;
}

}  // namespace graphage
