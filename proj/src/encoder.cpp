#include "graphage/encoder.hpp"

namespace graphage {

ConvVariant parse_variant(const std::string& name) {
    if (name == "max_relative") return ConvVariant::max_relative;
    if (name == "edge_conv") return ConvVariant::edge_conv;
    if (name == "graph_sage") return ConvVariant::graph_sage;
    if (name == "gin") return ConvVariant::gin;
    if (name == "relational") return ConvVariant::relational;
    throw ConfigError("unknown graph conv variant: " + name);
}

std::string variant_name(ConvVariant v) {
    switch (v) {
        case ConvVariant::max_relative: return "max_relative";
        case ConvVariant::edge_conv: return "edge_conv";
        case ConvVariant::graph_sage: return "graph_sage";
        case ConvVariant::gin: return "gin";
        case ConvVariant::relational: return "relational";
    }
    throw ConfigError("unknown graph conv variant");
}

AttentionField attention_scores(const Tensor& h, const PatchGraph& g,
                                const EncoderLayerParams& layer, double slope,
                                double dropout_rate, bool training, Rng& rng) {
    const std::size_t n = g.num_nodes();
    AttentionField att;
    att.groups.resize(n);
    std::vector<std::size_t> lefts, rights;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.neighbors[i].empty()) {
            throw ConfigError("attention_scores: node " + std::to_string(i) + " has no neighbours");
        }
        att.groups[i].push_back(lefts.size());
        lefts.push_back(i);
        rights.push_back(i);  // self entry first
        for (std::size_t j : g.neighbors[i]) {
            att.groups[i].push_back(lefts.size());
            lefts.push_back(i);
            rights.push_back(j);
        }
    }
    Tensor pairs = concat_cols(gather_rows(h, lefts), gather_rows(h, rights));
    Tensor raw = dropout(leaky_relu(matmul(pairs, layer.attn_w), slope), dropout_rate, rng, training);
    att.weights = softmax_groups(raw, att.groups);
    return att;
}

Tensor gcn_layer(const Tensor& h, const PatchGraph& g, const AttentionField& att,
                 const EncoderLayerParams& layer, double slope, bool self_in_sum) {
    const std::size_t n = g.num_nodes();
    Tensor hn = matmul(h, layer.w_neigh);
    Tensor hs = matmul(h, layer.w_self);
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nbrs = g.neighbors[i];
        std::vector<std::size_t> entry(att.groups[i].begin() + 1, att.groups[i].end());
        // (1/K) sum_j w_ij (h_j W_neigh) == column mean of the weighted messages
        Tensor neigh = colwise_mean(scale_rows(gather_rows(hn, nbrs), gather_rows(att.weights, entry)));
        Tensor self = scale_rows(gather_rows(hs, {i}),
                                 gather_rows(att.weights, {att.groups[i][0]}));
        if (!self_in_sum) self = scale(self, 1.0 / static_cast<double>(nbrs.size()));
        rows.push_back(add(neigh, self));
    }
    return leaky_relu(vstack(rows), slope);
}

Tensor variant_aggregate(ConvVariant variant, const Tensor& h_self,
                         const Tensor& neighbor_hs, const EncoderLayerParams& layer) {
    if (h_self.rank() != 2 || h_self.dim(0) != 1 || neighbor_hs.rank() != 2 ||
        neighbor_hs.dim(1) != h_self.dim(1)) {
        throw ShapeError("variant_aggregate: expected [1,d] centre and [K,d] neighbours, got " +
                         shape_str(h_self.shape()) + " and " + shape_str(neighbor_hs.shape()));
    }
    const std::size_t k = neighbor_hs.dim(0);
    const std::vector<std::size_t> zeros(k, 0);
    switch (variant) {
        case ConvVariant::max_relative: {
            Tensor diff_max = colwise_max(sub(neighbor_hs, gather_rows(h_self, zeros)));
            return add(matmul(h_self, layer.w_self), matmul(diff_max, layer.w_neigh));
        }
        case ConvVariant::edge_conv: {
            Tensor diffs = sub(neighbor_hs, gather_rows(h_self, zeros));
            Tensor edge = add(gather_rows(matmul(h_self, layer.w_self), zeros),
                              matmul(diffs, layer.w_neigh));
            return colwise_max(edge);
        }
        case ConvVariant::graph_sage:
            return add(matmul(h_self, layer.w_self),
                       matmul(colwise_mean(neighbor_hs), layer.w_neigh));
        case ConvVariant::gin: {
            Tensor summed = scale(colwise_mean(neighbor_hs), static_cast<double>(k));
            Tensor centre = add(h_self, scale_by(h_self, layer.gin_eps));  // (1+eps) h_i
            return matmul(add(centre, summed), layer.w_neigh);
        }
        case ConvVariant::relational:
            throw ConfigError("variant_aggregate: relational update goes through gcn_layer");
    }
    throw ConfigError("variant_aggregate: unknown variant");
}

Tensor encode(const PatchGraph& g, const EncoderParams& params, bool training, Rng& rng) {
    Tensor h = g.node_features;
    for (const auto& layer : params.layers) {
        AttentionField att = attention_scores(h, g, layer, params.slope,
                                              params.attn_dropout, training, rng);
        if (params.variant == ConvVariant::relational) {
            h = gcn_layer(h, g, att, layer, params.slope, params.self_in_sum);
            continue;
        }
        const std::size_t n = g.num_nodes();
        std::vector<Tensor> rows;
        rows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nbrs = g.neighbors[i];
            const double gsize = static_cast<double>(nbrs.size() + 1);
            // Attention rescaled by the group size so that uniform attention
            // reproduces the plain (unweighted) aggregation forms.
            std::vector<std::size_t> entry(att.groups[i].begin() + 1, att.groups[i].end());
            Tensor self = scale_rows(gather_rows(h, {i}),
                                     scale(gather_rows(att.weights, {att.groups[i][0]}), gsize));
            Tensor neigh = scale_rows(gather_rows(h, nbrs),
                                      scale(gather_rows(att.weights, entry), gsize));
            rows.push_back(variant_aggregate(params.variant, self, neigh, layer));
        }
        h = leaky_relu(vstack(rows), params.slope);
    }
    return h;
}

}  // namespace graphage
