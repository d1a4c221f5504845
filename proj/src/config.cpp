#include "graphage/config.hpp"

#include <fstream>

namespace graphage {

using nlohmann::json;

json config_to_json(const TrainConfig& cfg) {
    json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["dropout"] = cfg.dropout;
    j["weight_decay"] = cfg.weight_decay;
    j["learning_rate"] = cfg.learning_rate;
    j["mask_rate"] = cfg.mask_rate;
    j["seed"] = cfg.seed;
    j["age_loss_weight"] = cfg.age_loss_weight;
    j["use_sgd"] = cfg.use_sgd;
    j["cs_strict"] = cfg.cs_strict;
    j["model"] = {{"image_h", cfg.model.image_h},
                  {"image_w", cfg.model.image_w},
                  {"patch_size", cfg.model.patch_size},
                  {"stem_channels", cfg.model.stem_channels},
                  {"feature_dim", cfg.model.feature_dim},
                  {"hidden_dim", cfg.model.hidden_dim},
                  {"embed_dim", cfg.model.embed_dim},
                  {"knn", cfg.model.knn},
                  {"layer_count", cfg.model.layer_count},
                  {"variant", variant_name(cfg.model.variant)},
                  {"leaky_slope", cfg.model.leaky_slope},
                  {"self_in_sum", cfg.model.self_in_sum}};
    j["loss"] = {{"alpha", cfg.loss.alpha},
                 {"beta", cfg.loss.beta},
                 {"w1", cfg.loss.w1},
                 {"w2", cfg.loss.w2},
                 {"w3", cfg.loss.w3},
                 {"neighbor_samples", cfg.loss.neighbor_samples}};
    return j;
}

namespace {

// pulls j[key] into out if present, tracking consumed keys
template <typename T>
void take(const json& j, std::vector<std::string>& seen, const char* key, T& out) {
    seen.push_back(key);
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::vector<std::string>& seen, const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(seen.begin(), seen.end(), it.key()) == seen.end()) {
            throw ConfigError("unknown config key: " + scope + it.key());
        }
    }
}

}  // namespace

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    std::vector<std::string> seen;
    take(j, seen, "epochs", cfg.epochs);
    take(j, seen, "batch_size", cfg.batch_size);
    take(j, seen, "dropout", cfg.dropout);
    take(j, seen, "weight_decay", cfg.weight_decay);
    take(j, seen, "learning_rate", cfg.learning_rate);
    take(j, seen, "mask_rate", cfg.mask_rate);
    take(j, seen, "seed", cfg.seed);
    take(j, seen, "age_loss_weight", cfg.age_loss_weight);
    take(j, seen, "use_sgd", cfg.use_sgd);
    take(j, seen, "cs_strict", cfg.cs_strict);
    seen.push_back("model");
    seen.push_back("loss");
    reject_unknown(j, seen, "");

    if (j.contains("model")) {
        const json& m = j.at("model");
        std::vector<std::string> mseen;
        take(m, mseen, "image_h", cfg.model.image_h);
        take(m, mseen, "image_w", cfg.model.image_w);
        take(m, mseen, "patch_size", cfg.model.patch_size);
        take(m, mseen, "stem_channels", cfg.model.stem_channels);
        take(m, mseen, "feature_dim", cfg.model.feature_dim);
        take(m, mseen, "hidden_dim", cfg.model.hidden_dim);
        take(m, mseen, "embed_dim", cfg.model.embed_dim);
        take(m, mseen, "knn", cfg.model.knn);
        take(m, mseen, "layer_count", cfg.model.layer_count);
        std::string variant = variant_name(cfg.model.variant);
        take(m, mseen, "variant", variant);
        cfg.model.variant = parse_variant(variant);
        take(m, mseen, "leaky_slope", cfg.model.leaky_slope);
        take(m, mseen, "self_in_sum", cfg.model.self_in_sum);
        reject_unknown(m, mseen, "model.");
    }
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        std::vector<std::string> lseen;
        take(l, lseen, "alpha", cfg.loss.alpha);
        take(l, lseen, "beta", cfg.loss.beta);
        take(l, lseen, "w1", cfg.loss.w1);
        take(l, lseen, "w2", cfg.loss.w2);
        take(l, lseen, "w3", cfg.loss.w3);
        take(l, lseen, "neighbor_samples", cfg.loss.neighbor_samples);
        reject_unknown(l, lseen, "loss.");
    }
    return cfg;
}

void apply_override(json& j, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must have the form key=value: " + assignment);
    }
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    json* node = &j;
    std::size_t pos = 0;
    while (true) {
        auto dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->contains(part)) throw ConfigError("unknown config key: " + key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    try {
        if (node->is_string()) {
            *node = value;
        } else if (node->is_boolean()) {
            if (value == "true" || value == "1") *node = true;
            else if (value == "false" || value == "0") *node = false;
            else throw ConfigError("expected boolean for '" + key + "', got " + value);
        } else if (node->is_number_unsigned()) {
            *node = static_cast<std::uint64_t>(std::stoull(value));
        } else if (node->is_number_integer()) {
            *node = static_cast<std::int64_t>(std::stoll(value));
        } else {
            *node = std::stod(value);
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("cannot parse value for '" + key + "': " + value);
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for '" + key + "': " + value);
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["version"] = 1;
    j["config"] = config_to_json(ckpt.cfg);
    j["epoch"] = ckpt.epoch;
    j["target"] = {{"mu", ckpt.target.mu}, {"sigma", ckpt.target.sigma}};
    json tensors = json::object();
    for (const auto& [name, t] : ckpt.params.named()) {
        tensors[name] = {{"shape", t.shape()}, {"values", t.values()}};
    }
    for (const auto& [name, t] : ckpt.params.fixed()) {
        tensors[name] = {{"shape", t.shape()}, {"values", t.values()}};
    }
    j["tensors"] = std::move(tensors);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (!j.contains("version") || j.at("version").get<int>() != 1) {
        throw ConfigError("unsupported checkpoint version in " + path);
    }
    Checkpoint ckpt;
    ckpt.cfg = config_from_json(j.at("config"));
    ckpt.epoch = j.at("epoch").get<std::size_t>();
    ckpt.target.mu = j.at("target").at("mu").get<double>();
    ckpt.target.sigma = j.at("target").at("sigma").get<double>();
    ckpt.params = init_params(ckpt.cfg.model, ckpt.cfg.seed, ckpt.cfg.dropout);
    const json& tensors = j.at("tensors");
    auto entries = ckpt.params.named();
    for (auto& e : ckpt.params.fixed()) entries.push_back(e);
    for (auto& [name, t] : entries) {
        if (!tensors.contains(name)) {
            throw ConfigError("checkpoint " + path + " (version 1) is missing tensor '" + name +
                              "': config/checkpoint mismatch");
        }
        const json& entry = tensors.at(name);
        auto shape = entry.at("shape").get<Shape>();
        auto values = entry.at("values").get<std::vector<double>>();
        if (shape != t.shape() || values.size() != t.size()) {
            throw ConfigError("checkpoint tensor '" + name + "' shape mismatch in " + path);
        }
        Tensor dst = t;
        std::copy(values.begin(), values.end(), dst.data());
    }
    return ckpt;
}

}  // namespace graphage
