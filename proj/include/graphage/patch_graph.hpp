#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "graphage/sample.hpp"
#include "graphage/tensor.hpp"

namespace graphage {

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    int relation = 0;
    double weight = 0.0;  // in [0,1]
};

// KNN graph over patch features: node i receives directed edges j -> i from
// each of its K nearest neighbours j.
struct PatchGraph {
    Tensor node_features;                            // [N,d]
    std::vector<Edge> edges;                         // directed, j -> i
    std::vector<std::vector<std::size_t>> neighbors; // per node, exactly K, self excluded
    std::vector<std::size_t> mask_rows;              // sorted node indices zeroed by apply_mask

    std::size_t num_nodes() const { return neighbors.size(); }
    std::size_t k() const { return neighbors.empty() ? 0 : neighbors.front().size(); }
};

// Non-overlapping patch blocks in row-major scan order; each block is a
// [p,p,3] tensor. patch_size must divide both image dimensions.
std::vector<Tensor> partition_image(const ImageSample& img, std::size_t patch_size);

// Two conv layers with LeakyReLU, then spatial mean pooling.
struct StemParams {
    Tensor conv1;  // [k,k,3,c1]
    Tensor conv2;  // [k,k,c1,d]
    double slope = 0.01;
};

// Each patch independently through the conv stem; rows are the per-patch
// feature vectors xi_i. Differentiable w.r.t. stem weights and patches.
Tensor embed_patches(const std::vector<Tensor>& patches, const StemParams& stem);

// Squared-Euclidean KNN with ties broken by smaller index; initial edge
// weights uniform 1/K, single relation id 0.
PatchGraph build_knn_graph(const Tensor& features, std::size_t k);

// Zero floor(p*N) seeded uniformly-chosen feature rows. Edges untouched;
// p=0 returns the graph bit-identically.
PatchGraph apply_mask(const PatchGraph& g, double p, std::uint64_t seed);

// Line-oriented debug dump: header "N K d p", node lines "id masked f1..fd",
// edge lines "src dst rel weight".
void dump_graph(const PatchGraph& g, double p, std::ostream& os);

}  // namespace graphage
