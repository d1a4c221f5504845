#include "graphage/model.hpp"

#include <cmath>

namespace graphage {

void ModelConfig::validate() const {
    if (patch_size == 0 || image_h % patch_size != 0 || image_w % patch_size != 0) {
        throw ConfigError("patch size must divide both image dimensions");
    }
    if (patch_size < 5) {
        throw ConfigError("patch size must be >= 5 for the two 3x3 conv layers");
    }
    if (num_nodes() < 2) throw ConfigError("need at least 2 patches");
    if (knn == 0 || knn >= num_nodes()) {
        throw ConfigError("K must satisfy 0 < K < N (N=" + std::to_string(num_nodes()) + ")");
    }
    if (feature_dim == 0 || hidden_dim == 0 || embed_dim == 0 || stem_channels == 0) {
        throw ConfigError("all widths must be positive");
    }
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) {
        throw ConfigError("leaky slope must lie in (0,1)");
    }
}

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t(i) = (2.0 * uniform(rng) - 1.0) * bound;
    return t;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, double dropout_rate) {
    cfg.validate();
    Rng rng = make_rng(seed, /*tag=*/0x696e6974ULL);  // init stream
    ModelParams p;
    const std::size_t k = 3;
    p.stem.conv1 = glorot({k, k, 3, cfg.stem_channels}, k * k * 3, k * k * cfg.stem_channels, rng);
    p.stem.conv2 = glorot({k, k, cfg.stem_channels, cfg.feature_dim}, k * k * cfg.stem_channels,
                          k * k * cfg.feature_dim, rng);
    p.stem.slope = cfg.leaky_slope;

    p.anchor.w1 = glorot({cfg.feature_dim, cfg.hidden_dim}, cfg.feature_dim, cfg.hidden_dim, rng);
    p.anchor.w2 = glorot({cfg.hidden_dim, cfg.embed_dim}, cfg.hidden_dim, cfg.embed_dim, rng);
    p.anchor.slope = cfg.leaky_slope;
    p.anchor.dropout_rate = dropout_rate;

    p.encoder.variant = cfg.variant;
    p.encoder.slope = cfg.leaky_slope;
    p.encoder.attn_dropout = dropout_rate;
    p.encoder.self_in_sum = cfg.self_in_sum;
    std::size_t d_in = cfg.feature_dim;
    for (std::size_t l = 0; l < cfg.layer_count; ++l) {
        std::size_t d_out = cfg.embed_dim;
        EncoderLayerParams layer;
        layer.attn_w = glorot({2 * d_in, 1}, 2 * d_in, 1, rng);
        layer.w_neigh = glorot({d_in, d_out}, d_in, d_out, rng);
        layer.w_self = glorot({d_in, d_out}, d_in, d_out, rng);
        layer.gin_eps = Tensor(Shape{1}, 0.0);
        p.encoder.layers.push_back(std::move(layer));
        d_in = d_out;
    }

    p.head_w = glorot({cfg.embed_dim, 1}, cfg.embed_dim, 1, rng);
    p.head_b = Tensor(Shape{1, 1}, 0.0);
    p.head_scale = Tensor(Shape{cfg.embed_dim, 1}, 1.0);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("stem.conv1", stem.conv1);
    out.emplace_back("stem.conv2", stem.conv2);
    out.emplace_back("anchor.w1", anchor.w1);
    out.emplace_back("anchor.w2", anchor.w2);
    for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
        const auto& layer = encoder.layers[l];
        std::string prefix = "encoder." + std::to_string(l) + ".";
        out.emplace_back(prefix + "attn_w", layer.attn_w);
        out.emplace_back(prefix + "w_neigh", layer.w_neigh);
        out.emplace_back(prefix + "w_self", layer.w_self);
        out.emplace_back(prefix + "gin_eps", layer.gin_eps);
    }
    out.emplace_back("head.w", head_w);
    out.emplace_back("head.b", head_b);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::fixed() const {
    return {{"head.scale", head_scale}};
}

void ModelParams::set_requires_grad(bool rg) {
    for (auto& [name, t] : named()) {
        Tensor tensor = t;
        tensor.set_requires_grad(rg);
    }
}

void ModelParams::zero_grad() {
    for (auto& [name, t] : named()) {
        Tensor tensor = t;
        tensor.zero_grad();
    }
}

ModelParams ModelParams::clone() const {
    ModelParams c = *this;
    c.stem.conv1 = stem.conv1.clone();
    c.stem.conv2 = stem.conv2.clone();
    c.anchor.w1 = anchor.w1.clone();
    c.anchor.w2 = anchor.w2.clone();
    for (auto& layer : c.encoder.layers) {
        layer.attn_w = layer.attn_w.clone();
        layer.w_neigh = layer.w_neigh.clone();
        layer.w_self = layer.w_self.clone();
        layer.gin_eps = layer.gin_eps.clone();
    }
    c.head_w = head_w.clone();
    c.head_b = head_b.clone();
    c.head_scale = head_scale.clone();
    return c;
}

Tensor age_head(const Tensor& node_embeddings, const Tensor& head_w, const Tensor& head_b,
                const Tensor& head_scale) {
    return add(matmul(colwise_mean(node_embeddings), mul(head_scale, head_w)), head_b);
}

}  // namespace graphage
