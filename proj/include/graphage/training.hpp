#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphage/dataset.hpp"
#include "graphage/model.hpp"

namespace graphage {

struct TrainConfig {
    ModelConfig model;
    LossConfig loss;
    std::size_t epochs = 50;
    std::size_t batch_size = 196;
    double dropout = 0.5;
    double weight_decay = 1e-4;
    double learning_rate = 1e-4;
    double mask_rate = 0.6;  // p
    std::uint64_t seed = 0;
    double age_loss_weight = 1.0;  // lambda
    bool use_sgd = false;          // plain SGD instead of the adaptive optimizer
    bool cs_strict = false;        // CS counts |err| < L instead of <= L

    void validate() const;

    // The 196 default shrinks to 32 on datasets below 1000 samples.
    std::size_t effective_batch_size(std::size_t dataset_size) const;
};

struct Metrics {
    double mae = 0.0;
    std::vector<double> per_sample_errors;  // absolute errors, years
    std::map<int, double> cs;               // L -> fraction, L = 1..10

    double cs_at(double level, bool strict = false) const;
};

// Affine label standardization fitted on the training split; the head
// regresses in standardized units.
struct TargetTransform {
    double mu = 0.0;
    double sigma = 1.0;
    double to_years(double z) const { return mu + sigma * z; }
    double to_z(double years) const { return (years - mu) / sigma; }
};

struct Checkpoint {
    TrainConfig cfg;
    ModelParams params;
    TargetTransform target;
    std::size_t epoch = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double val_cs5 = 0.0;
};

// Moment-based adaptive gradient descent with decoupled weight decay;
// moments (0.9, 0.999), epsilon 1e-8. use_sgd switches to plain SGD
// (weight decay still decoupled).
class Optimizer {
public:
    Optimizer(const ModelParams& params, const TrainConfig& cfg);
    void step();

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, wd_;
    bool sgd_;
    std::size_t t_ = 0;
};

// Forward pass for one image: builds the patch graph, computes the four
// embeddings and the combined contrastive + age objective.
struct ImageForward {
    Tensor loss;        // [1]
    double age_pred_z;  // standardized prediction
};
ImageForward forward_image(const ImageSample& img, const ModelParams& params,
                           const TrainConfig& cfg, const TargetTransform& target,
                           bool training, std::uint64_t image_seed);

// Data-dependent head-input calibration (uses no labels): rescales each
// coordinate of the pooled embedding to a fixed spread measured over the
// training split at initialization, and centers the initial prediction by
// folding the feature mean into the bias. Without this the regression
// solution sits far outside the range the fixed learning rate can reach.
void calibrate_head(ModelParams& params, const std::vector<const ImageSample*>& train_set,
                    const TrainConfig& cfg);

// One optimizer step over a batch; returns the mean per-image loss.
double train_step(const std::vector<const ImageSample*>& batch, ModelParams& params,
                  const TrainConfig& cfg, const TargetTransform& target, Optimizer& opt,
                  std::uint64_t step_seed);

// Eval mode: no dropout, mask rate forced to 0.
Metrics evaluate(const std::vector<const ImageSample*>& dataset, const ModelParams& params,
                 const TrainConfig& cfg, const TargetTransform& target);

// Full schedule: seeded shuffled batches, per-epoch validation, best-val-MAE
// checkpoint selection.
std::pair<Checkpoint, std::vector<EpochLog>> run_training(const DatasetManifest& data,
                                                          const TrainConfig& cfg);

void write_metrics_csv(const std::vector<EpochLog>& log, const std::string& path);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace graphage
