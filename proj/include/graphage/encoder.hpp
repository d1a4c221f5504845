#pragma once

#include <string>
#include <vector>

#include "graphage/ops.hpp"
#include "graphage/patch_graph.hpp"

namespace graphage {

enum class ConvVariant { max_relative, edge_conv, graph_sage, gin, relational };

ConvVariant parse_variant(const std::string& name);
std::string variant_name(ConvVariant v);

struct EncoderLayerParams {
    Tensor attn_w;   // [2*d_in, 1], scores concatenated (h_i ++ h_j) pairs
    Tensor w_neigh;  // [d_in, d_out]
    Tensor w_self;   // [d_in, d_out]
    Tensor gin_eps;  // [1], learnable epsilon (gin variant only)
};

struct EncoderParams {
    std::vector<EncoderLayerParams> layers;
    ConvVariant variant = ConvVariant::max_relative;
    double slope = 0.01;
    double attn_dropout = 0.0;
    // Whether the self term is repeated inside the neighbour sum of the
    // relational update (net coefficient 1) or normalized with it (1/K).
    bool self_in_sum = true;
};

// Per-layer attention over each node's neighbourhood plus itself.
// entries[i] lists the flat score indices of node i's group, self first,
// then neighbours in list order; weights holds the normalized scores.
struct AttentionField {
    Tensor weights;  // [M,1], M = N*(K+1)
    std::vector<std::vector<std::size_t>> groups;  // per node

    double self_weight(std::size_t node) const { return weights(groups[node][0]); }
    double neighbor_weight(std::size_t node, std::size_t t) const {
        return weights(groups[node][t + 1]);
    }
};

AttentionField attention_scores(const Tensor& h, const PatchGraph& g,
                                const EncoderLayerParams& layer, double slope,
                                double dropout_rate, bool training, Rng& rng);

// Attention-weighted relational update: for each node,
// lrelu( (1/K) * sum_j w_ij (h_j W_neigh) + c_self * w_ii (h_i W_self) ),
// c_self = 1 when self_in_sum, else 1/K.
Tensor gcn_layer(const Tensor& h, const PatchGraph& g, const AttentionField& att,
                 const EncoderLayerParams& layer, double slope, bool self_in_sum);

// One aggregation step for a single node. h_self is [1,d]; neighbor_hs is
// [K,d]. Weight application follows W [a ++ b] = a W_self + b W_neigh.
Tensor variant_aggregate(ConvVariant variant, const Tensor& h_self,
                         const Tensor& neighbor_hs, const EncoderLayerParams& layer);

// Structural embeddings H+: layer_count attention-weighted graph conv layers
// over the (masked) node features.
Tensor encode(const PatchGraph& g, const EncoderParams& params, bool training, Rng& rng);

}  // namespace graphage
