#pragma once

// Experiment configuration: one JSON document per experiment, schema-checked
// before any run. Unknown keys are rejected so a typo cannot silently fall
// back to a default.

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laurel/data.hpp"
#include "laurel/model.hpp"
#include "laurel/training.hpp"

namespace laurel {

struct DataConfig {
    std::string kind;  // gaussian_mixture | spirals | idx
    std::size_t num_classes = 0, dim = 0;
    std::size_t train_per_class = 0, eval_per_class = 0;
    double spread = 0.0, noise = 0.0;
    std::uint64_t train_seed = 0, eval_seed = 1, center_seed = 42;
    std::string train_images, train_labels, eval_images, eval_labels;
};

struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    std::vector<std::string> variants;   // compare rows
    std::vector<std::size_t> ranks;      // sweep-rank grid
    std::string out_dir = "out";
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object())
        throw std::invalid_argument("config: '" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in '" + where +
                                        "'");
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback) {
    return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::check_keys(j, {"model", "train", "data", "variants", "ranks", "out_dir"}, "<root>");
    ExperimentConfig cfg;

    const nlohmann::json& m = j.at("model");
    detail::check_keys(m,
                       {"input_dim", "width", "num_blocks", "hidden_mult", "num_classes",
                        "variant", "rank", "rw_norm", "pa_literal", "seed"},
                       "model");
    cfg.model.input_dim = m.at("input_dim").get<std::size_t>();
    cfg.model.width = m.at("width").get<std::size_t>();
    cfg.model.num_blocks = m.at("num_blocks").get<std::size_t>();
    cfg.model.hidden_mult = detail::get_or<std::size_t>(m, "hidden_mult", 1);
    cfg.model.num_classes = m.at("num_classes").get<std::size_t>();
    cfg.model.variant.kind =
        parse_variant(detail::get_or<std::string>(m, "variant", "vanilla"));
    cfg.model.rank = detail::get_or<std::size_t>(m, "rank", 0);
    cfg.model.variant.rank = cfg.model.rank;
    cfg.model.rw_norm =
        parse_rw_norm(detail::get_or<std::string>(m, "rw_norm", "softmax-pair"));
    cfg.model.pa_literal = detail::get_or<bool>(m, "pa_literal", false);
    cfg.model.seed = detail::get_or<std::uint64_t>(m, "seed", 0);

    const nlohmann::json& t = j.at("train");
    detail::check_keys(t,
                       {"steps", "batch_size", "eval_every", "learning_rate", "momentum",
                        "cosine_decay", "warmup_steps", "seeds"},
                       "train");
    cfg.train.steps = t.at("steps").get<std::size_t>();
    cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
    cfg.train.eval_every = t.at("eval_every").get<std::size_t>();
    cfg.train.optim.learning_rate = t.at("learning_rate").get<double>();
    cfg.train.optim.momentum = detail::get_or<double>(t, "momentum", 0.9);
    cfg.train.optim.cosine_decay = detail::get_or<bool>(t, "cosine_decay", true);
    cfg.train.optim.warmup_steps = detail::get_or<std::size_t>(t, "warmup_steps", 0);
    cfg.train.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.train.validate();

    const nlohmann::json& d = j.at("data");
    cfg.data.kind = d.at("kind").get<std::string>();
    if (cfg.data.kind == "gaussian_mixture") {
        detail::check_keys(d,
                           {"kind", "num_classes", "dim", "train_per_class", "eval_per_class",
                            "spread", "train_seed", "eval_seed", "center_seed"},
                           "data");
        cfg.data.num_classes = d.at("num_classes").get<std::size_t>();
        cfg.data.dim = d.at("dim").get<std::size_t>();
        cfg.data.train_per_class = d.at("train_per_class").get<std::size_t>();
        cfg.data.eval_per_class = d.at("eval_per_class").get<std::size_t>();
        cfg.data.spread = d.at("spread").get<double>();
        cfg.data.train_seed = detail::get_or<std::uint64_t>(d, "train_seed", 0);
        cfg.data.eval_seed = detail::get_or<std::uint64_t>(d, "eval_seed", 1);
        cfg.data.center_seed = detail::get_or<std::uint64_t>(d, "center_seed", 42);
    } else if (cfg.data.kind == "spirals") {
        detail::check_keys(d,
                           {"kind", "num_classes", "train_per_class", "eval_per_class", "noise",
                            "train_seed", "eval_seed"},
                           "data");
        cfg.data.num_classes = d.at("num_classes").get<std::size_t>();
        cfg.data.train_per_class = d.at("train_per_class").get<std::size_t>();
        cfg.data.eval_per_class = d.at("eval_per_class").get<std::size_t>();
        cfg.data.noise = d.at("noise").get<double>();
        cfg.data.train_seed = detail::get_or<std::uint64_t>(d, "train_seed", 0);
        cfg.data.eval_seed = detail::get_or<std::uint64_t>(d, "eval_seed", 1);
    } else if (cfg.data.kind == "idx") {
        detail::check_keys(
            d, {"kind", "train_images", "train_labels", "eval_images", "eval_labels"}, "data");
        cfg.data.train_images = d.at("train_images").get<std::string>();
        cfg.data.train_labels = d.at("train_labels").get<std::string>();
        cfg.data.eval_images = d.at("eval_images").get<std::string>();
        cfg.data.eval_labels = d.at("eval_labels").get<std::string>();
    } else {
        throw std::invalid_argument("config: unknown data kind '" + cfg.data.kind + "'");
    }

    cfg.variants = detail::get_or<std::vector<std::string>>(j, "variants", {});
    for (const std::string& v : cfg.variants) parse_variant(v);
    cfg.ranks = detail::get_or<std::vector<std::size_t>>(j, "ranks", {});
    cfg.out_dir = detail::get_or<std::string>(j, "out_dir", "out");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return parse_experiment_config(j);
}

inline std::pair<Dataset, Dataset> make_datasets(const DataConfig& d) {
    if (d.kind == "gaussian_mixture") {
        return {gen_gaussian_mixture(d.num_classes, d.dim, d.train_per_class, d.spread,
                                     d.train_seed, d.center_seed),
                gen_gaussian_mixture(d.num_classes, d.dim, d.eval_per_class, d.spread,
                                     d.eval_seed, d.center_seed)};
    }
    if (d.kind == "spirals") {
        return {gen_spirals(d.num_classes, d.train_per_class, d.noise, d.train_seed),
                gen_spirals(d.num_classes, d.eval_per_class, d.noise, d.eval_seed)};
    }
    return {load_idx(d.train_images, d.train_labels), load_idx(d.eval_images, d.eval_labels)};
}

}  // namespace laurel
