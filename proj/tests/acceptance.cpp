// Acceptance checks: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "graphage/config.hpp"
#include "graphage/verify.hpp"

#ifndef GRAPHAGE_CLI_PATH
#error "GRAPHAGE_CLI_PATH must point at the CLI binary"
#endif

using namespace graphage;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

Tensor random_tensor(Shape shape, Rng& rng, double span = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t(i) = span * (2.0 * uniform(rng) - 1.0);
    return t;
}

double lrelu_ref(double x, double slope) { return x > 0.0 ? x : slope * x; }

double dist_sq(const Tensor& a, const Tensor& b, std::size_t row) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.dim(1); ++c) {
        double d = a(row, c) - b(row, c);
        acc += d * d;
    }
    return acc;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + GRAPHAGE_CLI_PATH + "\" " + args;
    int rc = std::system(cmd.c_str());
    return rc;
}

// ---------------------------------------------------------------------------

void check_gradient_suite() {
    auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report = run_gradcheck_suite();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    int rc = run_cli("gradcheck > /dev/null 2>&1");
    const auto& worst = report.worst();
    std::ostringstream detail;
    detail << report.cases.size() << " checks, worst rel err " << worst.rel_err << " ["
           << worst.name << "], " << secs << " s, cli exit " << rc;
    criterion("gradient suite: analytic gradients match finite differences, cli gradcheck exits 0",
              report.all_ok() && secs < 120.0 && rc == 0, detail.str());
}

void check_dense_oracle() {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_rng(1000 + trial);
        const std::size_t n = 4 + trial % 7;  // up to 10 nodes
        const std::size_t d = 2 + trial % 4;
        const std::size_t k = 1 + trial % (n - 1);
        Tensor feats = random_tensor({n, d}, rng);
        PatchGraph g = build_knn_graph(feats, k);
        EncoderLayerParams layer;
        layer.attn_w = random_tensor({2 * d, 1}, rng);
        layer.w_neigh = random_tensor({d, d}, rng);
        layer.w_self = random_tensor({d, d}, rng);
        layer.gin_eps = Tensor(Shape{1});
        Rng drop = make_rng(trial);
        AttentionField att = attention_scores(feats, g, layer, 0.01, 0.0, false, drop);
        bool self_in_sum = trial % 2 == 0;
        Tensor sparse = gcn_layer(feats, g, att, layer, 0.01, self_in_sum);

        // dense masked-adjacency reimplementation
        std::vector<std::vector<double>> hn(n, std::vector<double>(d, 0.0));
        std::vector<std::vector<double>> hs(n, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                for (std::size_t m = 0; m < d; ++m) {
                    hn[i][c] += feats(i, m) * layer.w_neigh(m, c);
                    hs[i][c] += feats(i, m) * layer.w_self(m, c);
                }
        std::vector<std::vector<double>> adj(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < k; ++t)
                adj[i][g.neighbors[i][t]] = att.neighbor_weight(i, t) / static_cast<double>(k);
        double c_self = self_in_sum ? 1.0 : 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) {
                double acc = c_self * att.self_weight(i) * hs[i][c];
                for (std::size_t j = 0; j < n; ++j) acc += adj[i][j] * hn[j][c];
                double diff = std::fabs(sparse(i, c) - lrelu_ref(acc, 0.01));
                worst = std::max(worst, diff);
                if (diff > 1e-10) ok = false;
            }
    }
    std::ostringstream detail;
    detail << "100 random graphs, max |sparse - dense| = " << worst;
    criterion("graph conv update equals dense-adjacency reimplementation to 1e-10", ok,
              detail.str());
}

void check_attention_normalization() {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        Rng rng = make_rng(5000 + trial);
        const std::size_t n = 4 + trial % 6, d = 3, k = 1 + trial % 3;
        PatchGraph g = build_knn_graph(random_tensor({n, d}, rng), k);
        EncoderLayerParams layer;
        layer.attn_w = random_tensor({2 * d, 1}, rng, 2.0);
        layer.w_neigh = random_tensor({d, d}, rng);
        layer.w_self = random_tensor({d, d}, rng);
        layer.gin_eps = Tensor(Shape{1});
        Rng drop = make_rng(trial);
        AttentionField att =
            attention_scores(g.node_features, g, layer, 0.01, 0.0, false, drop);
        for (std::size_t i = 0; i < n; ++i) {
            double total = att.self_weight(i);
            for (std::size_t t = 0; t < k; ++t) total += att.neighbor_weight(i, t);
            double dev = std::fabs(total - 1.0);
            worst = std::max(worst, dev);
            if (dev > 1e-9) ok = false;
        }
    }
    std::ostringstream detail;
    detail << "1000 trials, max |sum - 1| = " << worst;
    criterion("attention weights sum to 1 per node within 1e-9", ok, detail.str());
}

void check_loss_semantics() {
    bool ok = true;
    std::string why;
    for (std::uint64_t seed = 0; seed < 10000 && ok; ++seed) {
        Rng rng = make_rng(seed);
        const std::size_t n = 3 + seed % 5, d = 3;
        Tensor anchor = random_tensor({n, d}, rng);
        Tensor pos = random_tensor({n, d}, rng);
        Tensor npos = random_tensor({n, d}, rng);
        auto [neg, perm] = negative_shuffle(anchor, seed);
        double ln = loss_triplet(anchor, pos, neg, 0.8).item();
        double lm = loss_triplet(anchor, npos, neg, 0.8).item();
        double lv = loss_upper(anchor, pos, neg, 0.8, 0.2).item();
        if (ln < 0.0 || lm < 0.0 || lv < 0.0) {
            ok = false;
            why = "negative loss value";
            break;
        }
        // scalar-loop oracle for the upper bound: zero exactly on feasibility
        bool feasible = true;
        double oracle = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double arg = dist_sq(anchor, pos, i) - dist_sq(anchor, neg, i) + 1.0;
            if (arg < 0.0) feasible = false;
            oracle -= std::min(arg, 0.0);
        }
        oracle /= static_cast<double>(n);
        if (std::fabs(lv - oracle) > 1e-12 || (lv == 0.0) != feasible) {
            ok = false;
            why = "upper bound disagrees with scalar oracle";
        }
    }
    // degenerate bundle: anchor = positive = negative
    Rng rng = make_rng(424242);
    Tensor h = random_tensor({6, 4}, rng);
    double ln_eq = loss_triplet(h, h, h, 0.8).item();
    double lv_eq = loss_upper(h, h, h, 0.8, 0.2).item();
    if (std::fabs(ln_eq - 0.8) > 1e-12) {
        ok = false;
        why = "identical-embedding triplet loss != margin";
    }
    if (lv_eq != 0.0) {
        ok = false;
        why = "identical-embedding upper loss != 0";
    }
    criterion("loss terms nonnegative, upper bound zero exactly on its feasible region,"
              " degenerate bundle gives (0.8, 0)",
              ok, why);
}

void check_negative_sampler() {
    Rng rng = make_rng(31);
    Tensor h = random_tensor({7, 3}, rng);
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 1000 && ok; ++seed) {
        auto [neg, perm] = negative_shuffle(h, seed);
        std::vector<bool> used(7, false);
        for (std::size_t i = 0; i < 7; ++i) {
            if (perm[i] == i || used[perm[i]]) ok = false;
            used[perm[i]] = true;
            for (std::size_t c = 0; c < 3; ++c)
                if (neg(i, c) != h(perm[i], c)) ok = false;
        }
    }
    criterion("negative rows are a derangement permutation of the anchor rows (1000 seeds)", ok);
}

void check_mask_generator() {
    Rng rng = make_rng(32);
    Tensor feats = random_tensor({50, 4}, rng);
    PatchGraph g = build_knn_graph(feats, 3);
    bool ok = true;

    PatchGraph same = apply_mask(g, 0.0, 17);
    if (!same.mask_rows.empty()) ok = false;
    for (std::size_t i = 0; i < feats.size(); ++i)
        if (same.node_features(i) != g.node_features(i)) ok = false;

    for (double p : {0.1, 0.3, 0.5, 0.6, 0.77, 0.9, 1.0}) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            PatchGraph m = apply_mask(g, p, seed);
            if (m.mask_rows.size() != static_cast<std::size_t>(p * 50.0)) ok = false;
            for (std::size_t i : m.mask_rows)
                for (std::size_t c = 0; c < 4; ++c)
                    if (m.node_features(i, c) != 0.0) ok = false;
        }
    }
    criterion("mask: rate 0 is the bit-exact identity; floor(p*N) rows zeroed for every p, seed",
              ok);
}

void check_permutation_equivariance() {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_rng(8000 + trial);
        const std::size_t n = 5 + trial % 4, d = 3, k = 2;
        PatchGraph g = build_knn_graph(random_tensor({n, d}, rng), k);
        std::vector<std::size_t> pi(n);
        std::iota(pi.begin(), pi.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(pi[i - 1], pi[uniform_index(rng, i)]);
        Tensor permuted(Shape{n, d});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) permuted(pi[i], c) = g.node_features(i, c);
        PatchGraph gp = build_knn_graph(permuted, k);

        EncoderParams params;
        for (int l = 0; l < 2; ++l) {
            EncoderLayerParams layer;
            layer.attn_w = random_tensor({2 * d, 1}, rng);
            layer.w_neigh = random_tensor({d, d}, rng);
            layer.w_self = random_tensor({d, d}, rng);
            layer.gin_eps = Tensor(Shape{1}, {0.2});
            params.layers.push_back(layer);
        }
        for (ConvVariant v : {ConvVariant::max_relative, ConvVariant::edge_conv,
                              ConvVariant::graph_sage, ConvVariant::gin}) {
            params.variant = v;
            Rng d1 = make_rng(1), d2 = make_rng(1);
            Tensor base = encode(g, params, false, d1);
            Tensor perm = encode(gp, params, false, d2);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) {
                    double dev = std::fabs(perm(pi[i], c) - base(i, c));
                    worst = std::max(worst, dev);
                    if (dev > 1e-12) ok = false;
                }
        }
    }
    std::ostringstream detail;
    detail << "100 (graph, permutation) pairs x 4 variants, max deviation " << worst;
    criterion("encoder is permutation equivariant for all four conv variants", ok, detail.str());
}

void check_end_to_end_learning(const fs::path& workdir) {
    TrainConfig cfg;  // defaults throughout
    cfg.seed = 2024;

    DatasetManifest data = make_synthetic(600, cfg.model.image_h, cfg.model.image_w, cfg.seed);
    data.split.assign(600, kSplitNone);
    for (std::size_t i = 0; i < 500; ++i) data.split[i] = kSplitTrain;
    for (std::size_t i = 500; i < 600; ++i) data.split[i] = kSplitVal;

    // mean-predictor baseline from the training labels
    double mu = 0.0;
    for (std::size_t i = 0; i < 500; ++i) mu += *data.samples[i].age;
    mu /= 500.0;
    double baseline = 0.0;
    for (std::size_t i = 500; i < 600; ++i) baseline += std::fabs(*data.samples[i].age - mu);
    baseline /= 100.0;

    auto t0 = std::chrono::steady_clock::now();
    auto [ckpt, log] = run_training(data, cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_metrics_csv(log, (workdir / "metrics-a.csv").string());
    double best_mae = log[ckpt.epoch].val_mae;

    auto [ckpt2, log2] = run_training(data, cfg);  // same seed, same data
    write_metrics_csv(log2, (workdir / "metrics-b.csv").string());
    bool identical = read_file(workdir / "metrics-a.csv") == read_file(workdir / "metrics-b.csv");

    std::ostringstream detail;
    detail << "val MAE " << best_mae << " vs baseline " << baseline << " (bound "
           << 0.5 * baseline << "), " << secs << " s, rerun "
           << (identical ? "byte-identical" : "DIFFERS");
    criterion("end-to-end learning beats half the mean-predictor baseline,"
              " under 10 minutes, byte-identical rerun",
              best_mae < 0.5 * baseline && secs < 600.0 && identical, detail.str());
}

// shared tiny-run overrides so each ablation arm finishes in seconds
const char* kSmallSets =
    " --set epochs=2 --set model.image_h=16 --set model.image_w=16"
    " --set model.stem_channels=3 --set model.feature_dim=6 --set model.hidden_dim=6"
    " --set model.embed_dim=6 --set model.knn=3 --set model.layer_count=1"
    " --set loss.neighbor_samples=2 --set batch_size=16";

bool csv_well_formed(const fs::path& file, std::size_t expect_rows, std::size_t expect_cols) {
    std::ifstream in(file);
    if (!in) return false;
    std::string line;
    if (!std::getline(in, line)) return false;  // header
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        std::size_t cols = 1;
        std::stringstream ss(line);
        std::string cell;
        std::size_t seen = 0;
        while (std::getline(ss, cell, ',')) {
            ++seen;
            // last column is the metric; it must parse as a finite number
            try {
                double v = std::stod(cell);
                if (!std::isfinite(v)) return false;
            } catch (const std::exception&) {
                if (seen > 1) return false;  // only the first column may be text
            }
            cols = seen;
        }
        if (cols != expect_cols) return false;
    }
    return rows == expect_rows;
}

void check_ablation_harness(const fs::path& workdir) {
    fs::path conv_dir = workdir / "ablate-conv";
    fs::path loss_dir = workdir / "ablate-loss";
    fs::path mask_dir = workdir / "mask-sweep";
    int rc1 = run_cli("ablate-conv --synthetic 40 --seed 5 --out \"" + conv_dir.string() + "\"" +
                      kSmallSets + " > /dev/null 2>&1");
    int rc2 = run_cli("ablate-loss --synthetic 40 --seed 5 --out \"" + loss_dir.string() + "\"" +
                      kSmallSets + " > /dev/null 2>&1");
    int rc3 = run_cli("mask-sweep --synthetic 40 --seed 5 --out \"" + mask_dir.string() + "\"" +
                      kSmallSets + " > /dev/null 2>&1");
    bool ok = rc1 == 0 && rc2 == 0 && rc3 == 0 &&
              csv_well_formed(conv_dir / "ablate_conv.csv", 4, 2) &&
              csv_well_formed(loss_dir / "ablate_loss.csv", 7, 4) &&
              csv_well_formed(mask_dir / "mask_sweep.csv", 9, 2);
    std::ostringstream detail;
    detail << "exit codes " << rc1 << "/" << rc2 << "/" << rc3;
    criterion("ablation harness: conv variants (4 rows), loss grid (7 rows),"
              " mask sweep (9 rows) complete with finite CSVs",
              ok, detail.str());
    if (ok) {
        // desk-scale observations, reported rather than asserted
        std::cout << "  report: conv-variant val MAE:" << std::endl;
        std::cout << read_file(conv_dir / "ablate_conv.csv");
        std::cout << "  report: loss-grid val MAE:" << std::endl;
        std::cout << read_file(loss_dir / "ablate_loss.csv");
        std::cout << "  report: mask-rate val MAE:" << std::endl;
        std::cout << read_file(mask_dir / "mask_sweep.csv");
    }
}

}  // namespace

int main() {
    fs::path workdir = fs::temp_directory_path() / "graphage-acceptance";
    fs::create_directories(workdir);

    check_gradient_suite();
    check_dense_oracle();
    check_attention_normalization();
    check_loss_semantics();
    check_negative_sampler();
    check_mask_generator();
    check_permutation_equivariance();
    check_ablation_harness(workdir);
    check_end_to_end_learning(workdir);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all criteria satisfied" << std::endl;
    return 0;
}
