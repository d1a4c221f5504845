#include "graphage/patch_graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "graphage/ops.hpp"
#include "graphage/rng.hpp"

namespace graphage {

std::vector<Tensor> partition_image(const ImageSample& img, std::size_t patch_size) {
    if (patch_size == 0 || img.height % patch_size != 0 || img.width % patch_size != 0) {
        throw ConfigError("partition_image: patch size " + std::to_string(patch_size) +
                          " does not divide image " + std::to_string(img.height) + "x" +
                          std::to_string(img.width));
    }
    const std::size_t rows = img.height / patch_size;
    const std::size_t cols = img.width / patch_size;
    std::vector<Tensor> patches;
    patches.reserve(rows * cols);
    for (std::size_t py = 0; py < rows; ++py) {
        for (std::size_t px = 0; px < cols; ++px) {
            Tensor patch(Shape{patch_size, patch_size, 3});
            double* out = patch.data();
            for (std::size_t y = 0; y < patch_size; ++y)
                for (std::size_t x = 0; x < patch_size; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        *out++ = img.pixel(py * patch_size + y, px * patch_size + x, c);
            patches.push_back(std::move(patch));
        }
    }
    return patches;
}

Tensor embed_patches(const std::vector<Tensor>& patches, const StemParams& stem) {
    std::vector<Tensor> rows;
    rows.reserve(patches.size());
    for (const auto& patch : patches) {
        Tensor a = leaky_relu(conv2d(patch, stem.conv1), stem.slope);
        Tensor b = leaky_relu(conv2d(a, stem.conv2), stem.slope);
        rows.push_back(spatial_mean(b));
    }
    return vstack(rows);
}

PatchGraph build_knn_graph(const Tensor& features, std::size_t k) {
    if (features.rank() != 2) {
        throw ShapeError("build_knn_graph: expected [N,d] features, got " + shape_str(features.shape()));
    }
    const std::size_t n = features.dim(0), d = features.dim(1);
    if (k == 0 || k >= n) {
        throw ConfigError("build_knn_graph: need 0 < K < N, got K=" + std::to_string(k) +
                          ", N=" + std::to_string(n));
    }
    PatchGraph g;
    g.node_features = features;
    g.neighbors.resize(n);
    const double w = 1.0 / static_cast<double>(k);
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                double diff = features(i, t) - features(j, t);
                acc += diff * diff;
            }
            dist[j] = {acc, j};
        }
        dist[i].first = std::numeric_limits<double>::infinity();  // exclude self
        // ties broken by smaller index (pair comparison)
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        auto& nbrs = g.neighbors[i];
        nbrs.reserve(k);
        for (std::size_t t = 0; t < k; ++t) {
            nbrs.push_back(dist[t].second);
            g.edges.push_back(Edge{dist[t].second, i, 0, w});
        }
    }
    return g;
}

PatchGraph apply_mask(const PatchGraph& g, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) {
        throw ConfigError("apply_mask: p must lie in [0,1], got " + std::to_string(p));
    }
    if (p == 0.0) return g;  // identity, features shared bit-exactly
    const std::size_t n = g.num_nodes();
    const auto count = static_cast<std::size_t>(p * static_cast<double>(n));
    Rng rng = make_rng(seed, /*tag=*/0x6d61736bULL);  // mask stream
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // partial Fisher-Yates: first `count` entries are a uniform sample
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + uniform_index(rng, n - i);
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> masked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(masked.begin(), masked.end());

    PatchGraph out = g;
    out.mask_rows = masked;
    out.node_features = mask_zero_rows(g.node_features, masked);
    return out;
}

void dump_graph(const PatchGraph& g, double p, std::ostream& os) {
    const std::size_t n = g.num_nodes();
    const std::size_t d = g.node_features.dim(1);
    os << n << " " << g.k() << " " << d << " " << p << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        bool masked = std::binary_search(g.mask_rows.begin(), g.mask_rows.end(), i);
        os << i << " " << (masked ? 1 : 0);
        for (std::size_t j = 0; j < d; ++j) os << " " << g.node_features(i, j);
        os << "\n";
    }
    for (const auto& e : g.edges) {
        os << e.src << " " << e.dst << " " << e.relation << " " << e.weight << "\n";
    }
}

}  // namespace graphage
