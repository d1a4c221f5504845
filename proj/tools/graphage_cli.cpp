#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "graphage/config.hpp"
#include "graphage/verify.hpp"

namespace fs = std::filesystem;
using graphage::TrainConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::size_t synthetic = 0;
    std::string dataset_dir;
    std::string labels_csv;
    std::string out_dir = "runs/out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_data) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "RNG seed")->each([&opts](const std::string&) {
        opts.seed_set = true;
    });
    if (needs_data) {
        cmd->add_option("--synthetic", opts.synthetic, "use N synthetic samples");
        cmd->add_option("--dataset", opts.dataset_dir, "image root directory");
        cmd->add_option("--labels", opts.labels_csv, "labels CSV (filename,age)");
    }
}

TrainConfig build_config(const CommonOpts& opts) {
    nlohmann::json j = graphage::config_to_json(TrainConfig{});
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw graphage::ConfigError("cannot open config file: " + opts.config_path);
        nlohmann::json file_cfg;
        try {
            in >> file_cfg;
        } catch (const nlohmann::json::exception& e) {
            throw graphage::ConfigError("malformed config " + opts.config_path + ": " + e.what());
        }
        // parse strictly so unknown keys in the file are rejected
        j = graphage::config_to_json(graphage::config_from_json(file_cfg));
    }
    for (const auto& ov : opts.overrides) graphage::apply_override(j, ov);
    TrainConfig cfg = graphage::config_from_json(j);
    if (opts.seed_set) cfg.seed = opts.seed;
    cfg.validate();
    return cfg;
}

graphage::DatasetManifest load_data(const CommonOpts& opts, const TrainConfig& cfg) {
    if (opts.synthetic > 0) {
        auto data = graphage::make_synthetic(opts.synthetic, cfg.model.image_h,
                                             cfg.model.image_w, cfg.seed);
        graphage::assign_splits(data, {0.8, 0.1, 0.1}, cfg.seed);
        return data;
    }
    if (opts.dataset_dir.empty() || opts.labels_csv.empty()) {
        throw graphage::ConfigError("either --synthetic N or --dataset DIR --labels CSV is required");
    }
    auto data = graphage::load_manifest(opts.labels_csv, opts.dataset_dir, cfg.model.image_h,
                                        cfg.model.image_w);
    for (const auto& err : data.load_errors) std::cerr << "warning: " << err << "\n";
    if (data.samples.empty()) throw graphage::DataError("dataset is empty");
    graphage::assign_splits(data, {0.8, 0.1, 0.1}, cfg.seed);
    return data;
}

// Effective config goes to disk before any work so a run is reproducible
// from its output directory alone.
void echo_config(const TrainConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "config.json", std::ios::binary);
    out << graphage::config_to_json(cfg).dump(1) << "\n";
}

std::ofstream open_csv(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw graphage::DataError("cannot write " + path.string());
    out.precision(17);
    return out;
}

int cmd_train(const CommonOpts& opts) {
    TrainConfig cfg = build_config(opts);
    echo_config(cfg, opts.out_dir);
    auto data = load_data(opts, cfg);
    auto [ckpt, log] = graphage::run_training(data, cfg);
    graphage::write_metrics_csv(log, (fs::path(opts.out_dir) / "metrics.csv").string());
    graphage::save_checkpoint(ckpt, (fs::path(opts.out_dir) / "checkpoint.json").string());
    std::cout << "best epoch " << ckpt.epoch << ", val MAE "
              << log[ckpt.epoch].val_mae << "\n";
    return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_path) {
    graphage::Checkpoint ckpt = graphage::load_checkpoint(checkpoint_path);
    TrainConfig cfg = ckpt.cfg;
    CommonOpts data_opts = opts;
    auto data = load_data(data_opts, cfg);
    std::vector<const graphage::ImageSample*> all;
    for (const auto& s : data.samples) all.push_back(&s);
    graphage::Metrics m = graphage::evaluate(all, ckpt.params, cfg, ckpt.target);

    fs::create_directories(opts.out_dir);
    auto csv = open_csv(fs::path(opts.out_dir) / "eval.csv");
    csv << "metric,value\n";
    csv << "mae," << m.mae << "\n";
    std::cout.precision(6);
    std::cout << "MAE: " << m.mae << "\n";
    std::cout << "L\tCS(L)\n";
    for (const auto& [level, frac] : m.cs) {
        std::cout << level << "\t" << frac << "\n";
        csv << "cs" << level << "," << frac << "\n";
    }
    return kExitOk;
}

int cmd_ablate_conv(const CommonOpts& opts) {
    TrainConfig cfg = build_config(opts);
    echo_config(cfg, opts.out_dir);
    auto data = load_data(opts, cfg);
    auto csv = open_csv(fs::path(opts.out_dir) / "ablate_conv.csv");
    csv << "variant,val_mae\n";
    for (auto variant : {graphage::ConvVariant::edge_conv, graphage::ConvVariant::gin,
                         graphage::ConvVariant::graph_sage, graphage::ConvVariant::max_relative}) {
        TrainConfig arm = cfg;  // same seed and data across arms
        arm.model.variant = variant;
        auto [ckpt, log] = graphage::run_training(data, arm);
        double best = log[ckpt.epoch].val_mae;
        csv << graphage::variant_name(variant) << "," << best << "\n";
        std::cout << graphage::variant_name(variant) << ": val MAE " << best << "\n";
    }
    return kExitOk;
}

int cmd_ablate_loss(const CommonOpts& opts) {
    TrainConfig cfg = build_config(opts);
    echo_config(cfg, opts.out_dir);
    auto data = load_data(opts, cfg);
    auto csv = open_csv(fs::path(opts.out_dir) / "ablate_loss.csv");
    csv << "l_n,l_m,l_v,val_mae\n";
    const bool grid[7][3] = {{false, false, false}, {true, false, false}, {false, true, false},
                             {true, true, false},   {true, false, true},  {false, true, true},
                             {true, true, true}};
    for (const auto& row : grid) {
        TrainConfig arm = cfg;
        arm.loss.w1 = row[0] ? cfg.loss.w1 : 0.0;
        arm.loss.w2 = row[1] ? cfg.loss.w2 : 0.0;
        arm.loss.w3 = row[2] ? cfg.loss.w3 : 0.0;
        auto [ckpt, log] = graphage::run_training(data, arm);
        double best = log[ckpt.epoch].val_mae;
        csv << row[0] << "," << row[1] << "," << row[2] << "," << best << "\n";
        std::cout << "L_N=" << row[0] << " L_M=" << row[1] << " L_V=" << row[2]
                  << ": val MAE " << best << "\n";
    }
    return kExitOk;
}

int cmd_mask_sweep(const CommonOpts& opts) {
    TrainConfig cfg = build_config(opts);
    echo_config(cfg, opts.out_dir);
    auto data = load_data(opts, cfg);
    auto csv = open_csv(fs::path(opts.out_dir) / "mask_sweep.csv");
    csv << "p,val_mae\n";
    for (int i = 1; i <= 9; ++i) {
        TrainConfig arm = cfg;
        arm.mask_rate = 0.1 * i;
        auto [ckpt, log] = graphage::run_training(data, arm);
        double best = log[ckpt.epoch].val_mae;
        csv << arm.mask_rate << "," << best << "\n";
        std::cout << "p=" << arm.mask_rate << ": val MAE " << best << "\n";
    }
    return kExitOk;
}

int cmd_gradcheck() {
    graphage::GradCheckReport report = graphage::run_gradcheck_suite();
    graphage::print_report(report, std::cout);
    return report.all_ok() ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked contrastive patch-graph age estimation"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, conv_opts, loss_opts, mask_opts;
    std::string checkpoint_path;

    auto* train = app.add_subcommand("train", "train a model and write checkpoint + metrics");
    add_common(train, train_opts, true);
    train->add_option_function<std::string>(
        "--epochs",
        [&train_opts](const std::string& v) { train_opts.overrides.push_back("epochs=" + v); },
        "number of training epochs (same as --set epochs=N)");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; prints MAE and CS(1..10)");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    add_common(eval, eval_opts, true);
    auto* ablate_conv = app.add_subcommand("ablate-conv", "train all four graph conv variants");
    add_common(ablate_conv, conv_opts, true);
    auto* ablate_loss = app.add_subcommand("ablate-loss", "loss on/off ablation grid (7 arms)");
    add_common(ablate_loss, loss_opts, true);
    auto* mask_sweep = app.add_subcommand("mask-sweep", "train at mask rates 0.1..0.9");
    add_common(mask_sweep, mask_opts, true);
    app.add_subcommand("gradcheck", "finite-difference verification of all gradients");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand("train")) return cmd_train(train_opts);
        if (app.got_subcommand("eval")) return cmd_eval(eval_opts, checkpoint_path);
        if (app.got_subcommand("ablate-conv")) return cmd_ablate_conv(conv_opts);
        if (app.got_subcommand("ablate-loss")) return cmd_ablate_loss(loss_opts);
        if (app.got_subcommand("mask-sweep")) return cmd_mask_sweep(mask_opts);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
    } catch (const graphage::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const graphage::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const graphage::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}
