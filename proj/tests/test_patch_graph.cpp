#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>
#include <sstream>

#include "graphage/patch_graph.hpp"
#include "graphage/rng.hpp"

using namespace graphage;

namespace {

ImageSample random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    ImageSample img;
    img.height = h;
    img.width = w;
    img.id = "t";
    img.pixels.resize(h * w * 3);
    Rng rng = make_rng(seed);
    for (double& p : img.pixels) p = uniform(rng);
    return img;
}

Tensor random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    Tensor t(Shape{n, d});
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < t.size(); ++i) t(i) = 2.0 * uniform(rng) - 1.0;
    return t;
}

}  // namespace

TEST_CASE("partition_image degenerate and counting cases") {
    ImageSample img = random_image(32, 32, 1);
    auto one = partition_image(img, 32);
    REQUIRE(one.size() == 1);
    CHECK(one[0].shape() == Shape{32, 32, 3});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(one[0](i) == img.pixels[i]);

    CHECK(partition_image(img, 8).size() == 16);
    CHECK_THROWS_AS(partition_image(img, 5), ConfigError);  // non-divisible
    ImageSample odd = random_image(30, 32, 2);
    CHECK_THROWS_AS(partition_image(odd, 8), ConfigError);
}

TEST_CASE("partition_image blocks equal their source regions") {
    // 64x48 at patch 16 -> 12 patches, row-major scan order
    ImageSample img = random_image(64, 48, 3);
    auto patches = partition_image(img, 16);
    REQUIRE(patches.size() == 12);
    const std::size_t cols = 48 / 16;
    for (std::size_t pi = 0; pi < patches.size(); ++pi) {
        std::size_t pr = pi / cols, pc = pi % cols;
        for (std::size_t y = 0; y < 16; ++y) {
            for (std::size_t x = 0; x < 16; ++x) {
                for (std::size_t c = 0; c < 3; ++c) {
                    double expected = img.pixel(pr * 16 + y, pc * 16 + x, c);
                    CHECK(patches[pi](((y * 16) + x) * 3 + c) == expected);
                }
            }
        }
    }
}

TEST_CASE("embed_patches") {
    StemParams zero_stem;
    zero_stem.conv1 = Tensor(Shape{3, 3, 3, 4});
    zero_stem.conv2 = Tensor(Shape{3, 3, 4, 6});

    ImageSample img = random_image(16, 16, 4);
    auto patches = partition_image(img, 8);

    // zero weights (no biases anywhere) -> zero feature rows
    Tensor zf = embed_patches(patches, zero_stem);
    CHECK(zf.shape() == Shape{4, 6});
    for (std::size_t i = 0; i < zf.size(); ++i) CHECK(zf(i) == 0.0);

    // two identical patches -> identical rows
    StemParams stem;
    Rng rng = make_rng(5);
    stem.conv1 = Tensor(Shape{3, 3, 3, 4});
    stem.conv2 = Tensor(Shape{3, 3, 4, 6});
    for (std::size_t i = 0; i < stem.conv1.size(); ++i) stem.conv1(i) = uniform(rng) - 0.5;
    for (std::size_t i = 0; i < stem.conv2.size(); ++i) stem.conv2(i) = uniform(rng) - 0.5;
    auto twice = patches;
    twice[1] = twice[0];
    Tensor f = embed_patches(twice, stem);
    for (std::size_t j = 0; j < 6; ++j) CHECK(f(0, j) == f(1, j));

    // straight-line reimplementation of the stem on one patch
    const Tensor& patch = patches[2];
    auto conv_ref = [](const Tensor& in, const Tensor& k, double slope) {
        std::size_t h = in.dim(0), w = in.dim(1), c = in.dim(2);
        std::size_t ks = k.dim(0), f_out = k.dim(3);
        std::size_t oh = h - ks + 1, ow = w - ks + 1;
        Tensor out(Shape{oh, ow, f_out});
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t o = 0; o < f_out; ++o) {
                    double acc = 0.0;
                    for (std::size_t ky = 0; ky < ks; ++ky)
                        for (std::size_t kx = 0; kx < ks; ++kx)
                            for (std::size_t ci = 0; ci < c; ++ci)
                                acc += in(((y + ky) * w + x + kx) * c + ci) *
                                       k((((ky * ks) + kx) * c + ci) * f_out + o);
                    double v = acc > 0.0 ? acc : slope * acc;
                    out(((y * ow) + x) * f_out + o) = v;
                }
        return out;
    };
    Tensor a1 = conv_ref(patch, stem.conv1, stem.slope);
    Tensor a2 = conv_ref(a1, stem.conv2, stem.slope);
    std::vector<double> pooled(6, 0.0);
    std::size_t spatial = a2.dim(0) * a2.dim(1);
    for (std::size_t s = 0; s < spatial; ++s)
        for (std::size_t o = 0; o < 6; ++o) pooled[o] += a2(s * 6 + o);
    for (std::size_t o = 0; o < 6; ++o) {
        CHECK(f(2, o) == doctest::Approx(pooled[o] / static_cast<double>(spatial))
                             .epsilon(1e-12));
    }
}

TEST_CASE("build_knn_graph forced and geometric cases") {
    Tensor two(Shape{2, 1}, {0.0, 5.0});
    PatchGraph g2 = build_knn_graph(two, 1);
    CHECK(g2.neighbors[0] == std::vector<std::size_t>{1});
    CHECK(g2.neighbors[1] == std::vector<std::size_t>{0});
    CHECK(g2.edges.size() == 2);
    for (const Edge& e : g2.edges) {
        CHECK(e.relation == 0);
        CHECK(e.weight == 1.0);  // 1/K with K=1
    }

    Tensor line(Shape{4, 1}, {0.0, 1.0, 10.0, 11.0});
    PatchGraph g4 = build_knn_graph(line, 1);
    CHECK(g4.neighbors[0] == std::vector<std::size_t>{1});
    CHECK(g4.neighbors[1] == std::vector<std::size_t>{0});
    CHECK(g4.neighbors[2] == std::vector<std::size_t>{3});
    CHECK(g4.neighbors[3] == std::vector<std::size_t>{2});

    CHECK_THROWS_AS(build_knn_graph(two, 2), ConfigError);  // K >= N
}

TEST_CASE("build_knn_graph matches brute-force oracle") {
    const std::size_t n = 30, d = 4, k = 5;
    Tensor feats = random_features(n, d, 6);
    PatchGraph g = build_knn_graph(feats, k);
    for (std::size_t i = 0; i < n; ++i) {
        // exhaustive all-pairs sort with (distance, index) ordering
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double delta = feats(i, c) - feats(j, c);
                acc += delta * delta;
            }
            dist.emplace_back(acc, j);
        }
        std::sort(dist.begin(), dist.end());
        REQUIRE(g.neighbors[i].size() == k);
        for (std::size_t t = 0; t < k; ++t) CHECK(g.neighbors[i][t] == dist[t].second);
    }
    // directed edges j -> i for each neighbour j
    CHECK(g.edges.size() == n * k);
    for (const Edge& e : g.edges) {
        auto& nb = g.neighbors[e.dst];
        CHECK(std::find(nb.begin(), nb.end(), e.src) != nb.end());
        CHECK(e.weight == doctest::Approx(1.0 / k));
    }
}

TEST_CASE("knn is invariant to row permutation up to relabeling") {
    const std::size_t n = 12, d = 3, k = 4;
    Tensor feats = random_features(n, d, 7);
    PatchGraph g = build_knn_graph(feats, k);

    // reversal permutation: new index = n-1-old
    Tensor rev(Shape{n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) rev(n - 1 - i, c) = feats(i, c);
    PatchGraph gr = build_knn_graph(rev, k);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<std::size_t> expect, got;
        for (std::size_t j : g.neighbors[i]) expect.insert(n - 1 - j);
        for (std::size_t j : gr.neighbors[n - 1 - i]) got.insert(j);
        CHECK(expect == got);
    }
}

TEST_CASE("apply_mask semantics") {
    Tensor feats = random_features(10, 4, 8);
    PatchGraph g = build_knn_graph(feats, 3);

    // p = 0: bit-identical, no masked rows
    PatchGraph same = apply_mask(g, 0.0, 123);
    CHECK(same.mask_rows.empty());
    for (std::size_t i = 0; i < feats.size(); ++i)
        CHECK(same.node_features(i) == g.node_features(i));

    // p = 1: every row zero
    PatchGraph full = apply_mask(g, 1.0, 123);
    CHECK(full.mask_rows.size() == 10);
    for (std::size_t i = 0; i < full.node_features.size(); ++i)
        CHECK(full.node_features(i) == 0.0);

    // masked count is exactly floor(p*N) for every p and seed
    for (double p : {0.1, 0.25, 0.39, 0.6, 0.85}) {
        for (std::uint64_t seed : {1ULL, 2ULL, 77ULL}) {
            PatchGraph m = apply_mask(g, p, seed);
            CHECK(m.mask_rows.size() == static_cast<std::size_t>(p * 10.0));
            // unmasked rows bit-exact; masked rows zero; edges untouched
            CHECK(m.edges.size() == g.edges.size());
            for (std::size_t i = 0; i < 10; ++i) {
                bool masked = std::binary_search(m.mask_rows.begin(), m.mask_rows.end(), i);
                for (std::size_t c = 0; c < 4; ++c) {
                    if (masked)
                        CHECK(m.node_features(i, c) == 0.0);
                    else
                        CHECK(m.node_features(i, c) == g.node_features(i, c));
                }
            }
        }
    }
}

TEST_CASE("mask selection is uniform across seeds") {
    // p=0.6, N=100: exactly 60 rows; each node masked 60% +- 4% over 1000 seeds
    Tensor feats = random_features(100, 2, 9);
    PatchGraph g = build_knn_graph(feats, 3);
    std::vector<std::size_t> hits(100, 0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        PatchGraph m = apply_mask(g, 0.6, seed);
        REQUIRE(m.mask_rows.size() == 60);
        for (std::size_t i : m.mask_rows) ++hits[i];
    }
    for (std::size_t i = 0; i < 100; ++i) {
        double rate = hits[i] / 1000.0;
        CHECK(rate > 0.56);
        CHECK(rate < 0.64);
    }
}

TEST_CASE("graph dump format") {
    Tensor feats(Shape{3, 2}, {0, 0, 1, 0, 0, 1});
    PatchGraph g = build_knn_graph(feats, 1);
    g = apply_mask(g, 0.4, 5);  // floor(0.4*3) = 1 masked row
    std::ostringstream os;
    dump_graph(g, 0.4, os);
    std::istringstream is(os.str());
    std::size_t n, k, d;
    double p;
    is >> n >> k >> d >> p;
    CHECK(n == 3);
    CHECK(k == 1);
    CHECK(d == 2);
    CHECK(p == 0.4);
    std::string line;
    std::getline(is, line);  // rest of header
    std::size_t node_lines = 0, edge_lines = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::vector<std::string> toks{std::istream_iterator<std::string>(fields),
                                      std::istream_iterator<std::string>()};
        if (node_lines < n) {
            CHECK(toks.size() == 2 + d);  // id masked f1..fd
            ++node_lines;
        } else {
            CHECK(toks.size() == 4);  // src dst rel weight
            ++edge_lines;
        }
    }
    CHECK(node_lines == 3);
    CHECK(edge_lines == 3);
}
