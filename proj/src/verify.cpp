#include "graphage/verify.hpp"

#include <cmath>
#include <ostream>

#include "graphage/training.hpp"

namespace graphage {

bool GradCheckReport::all_ok() const {
    for (const auto& c : cases)
        if (!c.ok()) return false;
    return true;
}

const GradCheckCase& GradCheckReport::worst() const {
    const GradCheckCase* w = &cases.front();
    for (const auto& c : cases) {
        if (c.rel_err / c.tolerance > w->rel_err / w->tolerance) w = &c;
    }
    return *w;
}

namespace {

// random values bounded away from the LeakyReLU / hinge kinks at 0
Tensor random_tensor(Shape shape, Rng& rng, double lo = 0.1, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        double mag = lo + (hi - lo) * uniform(rng);
        t(i) = uniform(rng) < 0.5 ? -mag : mag;
    }
    return t;
}

using Fn = std::function<Tensor(std::vector<Tensor>&)>;

void run_case(GradCheckReport& report, const std::string& name, double tol, const Fn& fn,
              std::vector<Tensor> inputs, double eps = 1e-5) {
    GradCheckCase c;
    c.name = name;
    c.tolerance = tol;
    c.rel_err = grad_check(fn, inputs, eps);
    report.cases.push_back(std::move(c));
}

void op_cases(GradCheckReport& report, Rng& rng) {
    run_case(report, "sum (linear)", 1e-7,
             [](std::vector<Tensor>& in) { return sum(in[0]); },
             {random_tensor({3, 4}, rng)});
    run_case(report, "matmul-then-sum", 1e-6,
             [](std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); },
             {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
    run_case(report, "add/mul/sub mix", 1e-6,
             [](std::vector<Tensor>& in) {
                 return sum(mul(add(in[0], in[1]), sub(in[0], scale(in[1], 0.5))));
             },
             {random_tensor({2, 5}, rng), random_tensor({2, 5}, rng)});
    run_case(report, "leaky_relu", 1e-4,
             [](std::vector<Tensor>& in) { return sum(leaky_relu(in[0], 0.01)); },
             {random_tensor({4, 4}, rng)});
    run_case(report, "hinge_pos/hinge_neg", 1e-4,
             [](std::vector<Tensor>& in) {
                 return sum(sub(hinge_pos(in[0]), hinge_neg(in[0])));
             },
             {random_tensor({3, 3}, rng)});
    run_case(report, "conv2d 5x5x2 * 3x3x2x4", 1e-4,
             [](std::vector<Tensor>& in) { return sum(conv2d(in[0], in[1])); },
             {random_tensor({5, 5, 2}, rng), random_tensor({3, 3, 2, 4}, rng)});
    run_case(report, "softmax_groups readout", 1e-6,
             [](std::vector<Tensor>& in) {
                 std::vector<std::vector<std::size_t>> groups{{0, 1, 2}, {3, 4}, {5}};
                 Tensor w(Shape{6}, {0.9, -0.3, 0.4, 1.1, -0.7, 0.2});
                 return sum(mul(softmax_groups(in[0], groups), w));
             },
             {random_tensor({6}, rng)});
    run_case(report, "dropout (fixed mask)", 1e-6,
             [](std::vector<Tensor>& in) {
                 Rng drop = make_rng(77);
                 return sum(dropout(in[0], 0.5, drop, true));
             },
             {random_tensor({4, 6}, rng)});
    run_case(report, "concat/gather/scale_rows", 1e-6,
             [](std::vector<Tensor>& in) {
                 Tensor cat = concat_cols(in[0], in[1]);
                 Tensor picked = gather_rows(cat, {2, 0, 1, 2});
                 return sum(scale_rows(picked, in[2]));
             },
             {random_tensor({3, 2}, rng), random_tensor({3, 3}, rng), random_tensor({4}, rng)});
    run_case(report, "colwise mean/max, spatial_mean", 1e-4,
             [](std::vector<Tensor>& in) {
                 return add(sum(colwise_mean(in[0])),
                            add(sum(colwise_max(in[0])), sum(spatial_mean(in[1]))));
             },
             {random_tensor({5, 3}, rng), random_tensor({3, 3, 2}, rng)});
    run_case(report, "row_distance_sq", 1e-6,
             [](std::vector<Tensor>& in) { return sum(row_distance_sq(in[0], in[1])); },
             {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)});
    run_case(report, "mask_zero_rows + vstack", 1e-6,
             [](std::vector<Tensor>& in) {
                 Tensor stacked = vstack({in[0], in[1]});
                 return sum(mask_zero_rows(stacked, {1, 3}));
             },
             {random_tensor({2, 3}, rng), random_tensor({3, 3}, rng)});
    run_case(report, "scale_by scalar", 1e-6,
             [](std::vector<Tensor>& in) { return sum(scale_by(in[0], in[1])); },
             {random_tensor({3, 3}, rng), random_tensor({1}, rng)});
}

// tiny but complete model configuration for end-to-end checks
TrainConfig small_config() {
    TrainConfig cfg;
    cfg.model.image_h = 16;
    cfg.model.image_w = 24;  // N = 6 nodes with patch 8
    cfg.model.patch_size = 8;
    cfg.model.stem_channels = 3;
    cfg.model.feature_dim = 5;
    cfg.model.hidden_dim = 5;
    cfg.model.embed_dim = 5;
    cfg.model.knn = 3;
    cfg.model.layer_count = 2;
    cfg.loss.neighbor_samples = 2;
    cfg.mask_rate = 0.3;
    cfg.dropout = 0.5;
    return cfg;
}

ImageSample random_image(const TrainConfig& cfg, Rng& rng) {
    ImageSample img;
    img.height = cfg.model.image_h;
    img.width = cfg.model.image_w;
    img.id = "gradcheck";
    img.age = 40.0;
    img.pixels.resize(img.height * img.width * 3);
    for (double& p : img.pixels) p = uniform(rng);
    return img;
}

std::vector<Tensor> param_tensors(const ModelParams& p) {
    std::vector<Tensor> out;
    for (auto& [name, t] : p.named()) out.push_back(t);
    return out;
}

void encode_cases(GradCheckReport& report) {
    TrainConfig cfg = small_config();
    for (ConvVariant variant :
         {ConvVariant::max_relative, ConvVariant::edge_conv, ConvVariant::graph_sage,
          ConvVariant::gin, ConvVariant::relational}) {
        cfg.model.variant = variant;
        Rng rng = make_rng(4242);
        ModelParams params = init_params(cfg.model, 4242, cfg.dropout);
        Tensor features = random_tensor({6, cfg.model.feature_dim}, rng);
        PatchGraph g = build_knn_graph(features, cfg.model.knn);
        Tensor readout = random_tensor({static_cast<std::size_t>(6 * cfg.model.embed_dim)}, rng);

        std::vector<Tensor> inputs = param_tensors(params);
        inputs.push_back(features);
        auto fn = [&params, &g, &cfg, &readout](std::vector<Tensor>&) {
            Rng drop = make_rng(99);
            Tensor h = encode(g, params.encoder, /*training=*/true, drop);
            return sum(mul(reshape(h, readout.shape()), readout));
        };
        run_case(report, "encode grads (" + variant_name(variant) + ")", 1e-4, fn, inputs);
    }
}

void end_to_end_case(GradCheckReport& report) {
    TrainConfig cfg = small_config();
    Rng rng = make_rng(7);
    ImageSample img = random_image(cfg, rng);
    ModelParams params = init_params(cfg.model, 7, cfg.dropout);
    TargetTransform target{40.0, 10.0};

    std::vector<Tensor> inputs = param_tensors(params);
    auto fn = [&](std::vector<Tensor>&) {
        return forward_image(img, params, cfg, target, /*training=*/true, /*image_seed=*/7).loss;
    };
    run_case(report, "end-to-end loss (6-node graph)", 1e-4, fn, inputs);
}

}  // namespace

GradCheckReport run_gradcheck_suite() {
    GradCheckReport report;
    Rng rng = make_rng(20240901);
    op_cases(report, rng);
    encode_cases(report);
    end_to_end_case(report);
    return report;
}

void print_report(const GradCheckReport& report, std::ostream& os) {
    for (const auto& c : report.cases) {
        os << (c.ok() ? "PASS" : "FAIL") << "  " << c.name << "  rel_err=" << c.rel_err
           << "  tol=" << c.tolerance << "\n";
    }
    const auto& w = report.worst();
    os << "worst: " << w.name << " rel_err=" << w.rel_err << " tol=" << w.tolerance << "\n";
}

}  // namespace graphage
