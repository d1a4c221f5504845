#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graphage/contrastive.hpp"
#include "graphage/encoder.hpp"
#include "graphage/patch_graph.hpp"

namespace graphage {

// Architecture dimensions. Defaults give N = (64/8)^2 = 64 graph nodes.
struct ModelConfig {
    std::size_t image_h = 64;
    std::size_t image_w = 64;
    std::size_t patch_size = 8;
    std::size_t stem_channels = 8;  // hidden width of the conv stem
    std::size_t feature_dim = 64;   // d, patch feature width
    std::size_t hidden_dim = 64;    // anchor MLP hidden width
    std::size_t embed_dim = 64;     // d', embedding width of H, H+, H~+, H-
    std::size_t knn = 9;            // K
    std::size_t layer_count = 2;
    ConvVariant variant = ConvVariant::max_relative;
    double leaky_slope = 0.01;
    bool self_in_sum = true;

    std::size_t num_nodes() const {
        return (image_h / patch_size) * (image_w / patch_size);
    }
    void validate() const;
};

struct ModelParams {
    StemParams stem;
    AnchorMlpParams anchor;
    EncoderParams encoder;
    Tensor head_w;      // [d',1]
    Tensor head_b;      // [1,1]
    Tensor head_scale;  // [d',1], fixed per-coordinate gain on the pooled embedding

    // Stable name -> tensor view of every trainable parameter.
    std::vector<std::pair<std::string, Tensor>> named() const;
    // Fixed (non-optimized) tensors that still belong in a checkpoint.
    std::vector<std::pair<std::string, Tensor>> fixed() const;
    void set_requires_grad(bool rg);
    void zero_grad();
    ModelParams clone() const;
};

// Glorot-uniform initialization, seeded.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, double dropout_rate);

// Mean-pool node embeddings, then a linear map to a single value. The fixed
// head_scale gain multiplies the weights coordinate-wise, so the map stays
// linear: prediction - bias doubles when the embeddings double.
Tensor age_head(const Tensor& node_embeddings, const Tensor& head_w, const Tensor& head_b,
                const Tensor& head_scale);

}  // namespace graphage
