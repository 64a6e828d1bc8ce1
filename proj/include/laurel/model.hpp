#pragma once

// Block-structured residual classifier: input projection -> N residual
// blocks (two-layer ReLU MLP each) -> linear head, with a selectable
// residual scheme. Parameters live as named flat arrays; each forward pass
// materializes them as tensors (tape leaves when tracking gradients).

#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "laurel/layers.hpp"
#include "laurel/tensor.hpp"

namespace laurel {

struct ModelConfig {
    std::size_t input_dim = 2;
    std::size_t width = 8;        // D
    std::size_t num_blocks = 2;   // N
    std::size_t hidden_mult = 1;  // inner MLP width = hidden_mult * D
    std::size_t num_classes = 2;
    ResidualVariant variant;
    std::size_t rank = 0;
    RWNorm rw_norm = RWNorm::SoftmaxPair;
    bool pa_literal = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_dim < 1 || width < 1 || num_blocks < 1 || hidden_mult < 1 || num_classes < 1)
            throw std::invalid_argument("model config: all dimensions must be >= 1");
        if (needs_rank(variant.kind) && (rank < 1 || rank > width))
            throw std::invalid_argument("model config: rank " + std::to_string(rank) +
                                        " out of range [1," + std::to_string(width) + "]");
    }
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"input_dim", c.input_dim},
            {"width", c.width},
            {"num_blocks", c.num_blocks},
            {"hidden_mult", c.hidden_mult},
            {"num_classes", c.num_classes},
            {"variant", variant_name(c.variant.kind)},
            {"rank", c.rank},
            {"rw_norm", rw_norm_name(c.rw_norm)},
            {"pa_literal", c.pa_literal},
            {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.num_blocks = j.at("num_blocks").get<std::size_t>();
    c.hidden_mult = j.at("hidden_mult").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.variant.kind = parse_variant(j.at("variant").get<std::string>());
    c.rank = j.at("rank").get<std::size_t>();
    c.variant.rank = c.rank;
    c.rw_norm = parse_rw_norm(j.at("rw_norm").get<std::string>());
    c.pa_literal = j.at("pa_literal").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

struct ParamTensor {
    std::string name;
    Shape shape;
    std::vector<double> value;
};

struct ForwardPass {
    Tensor logits;
    std::vector<Tensor> leaves;  // parallel to Model::params; tracked when taping
};

class Model {
public:
    ModelConfig config;
    std::vector<ParamTensor> params;

    static Model build(ModelConfig cfg) {
        cfg.variant.rank = cfg.rank;
        cfg.validate();
        Model m;
        m.config = cfg;
        const std::size_t D = cfg.width, N = cfg.num_blocks, H = cfg.hidden_mult * D;
        std::mt19937_64 rng(cfg.seed);
        auto gauss_fill = [&rng](std::vector<double>& v, std::size_t fan_in) {
            std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
            for (double& x : v) x = g(rng);
        };
        auto push = [&m](std::string name, Shape shape, std::vector<double> value) {
            m.params.push_back({std::move(name), std::move(shape), std::move(value)});
            return m.params.size() - 1;
        };
        auto push_gauss = [&](std::string name, Shape shape, std::size_t fan_in) {
            std::vector<double> v(shape_numel(shape));
            gauss_fill(v, fan_in);
            return push(std::move(name), std::move(shape), std::move(v));
        };
        auto push_zeros = [&](std::string name, Shape shape) {
            return push(std::move(name), std::move(shape),
                        std::vector<double>(shape_numel(shape), 0.0));
        };

        m.in_w_ = push_gauss("in_proj.weight", {cfg.input_dim, D}, cfg.input_dim);
        m.in_b_ = push_zeros("in_proj.bias", {D});
        const VariantInit li =
            init_params(cfg.variant, D, N, cfg.rw_norm, cfg.pa_literal, cfg.seed + 1);
        for (std::size_t b = 0; b < N; ++b) {
            const std::string pre = "block" + std::to_string(b) + ".";
            BlockIdx idx;
            idx.fc1_w = push_gauss(pre + "fc1.weight", {D, H}, D);
            idx.fc1_b = push_zeros(pre + "fc1.bias", {H});
            idx.fc2_w = push_gauss(pre + "fc2.weight", {H, D}, H);
            idx.fc2_b = push_zeros(pre + "fc2.bias", {D});
            if (has_rw(cfg.variant.kind)) {
                idx.rw_alpha = push(pre + "rw.alpha_logit", {1}, {li.rw_logits[b][0]});
                idx.rw_beta = push(pre + "rw.beta_logit", {1}, {li.rw_logits[b][1]});
            }
            if (has_lr(cfg.variant.kind)) {
                idx.lr_A = push(pre + "lr.A", {D, cfg.rank}, li.lr_A[b]);
                idx.lr_B = push(pre + "lr.B", {cfg.rank, D}, li.lr_B[b]);
            }
            m.blocks_.push_back(idx);
        }
        if (has_pa(cfg.variant.kind)) {
            m.pa_A_ = push("pa.A_h", {D, cfg.rank}, li.pa_A_h);
            m.pa_B_ = push("pa.B_h", {cfg.rank, D}, li.pa_B_h);
            for (std::size_t j = 0; j < N; ++j)
                m.pa_gamma_.push_back(
                    push("pa.gamma" + std::to_string(j), {1}, {li.pa_gamma[j]}));
        }
        m.head_w_ = push_gauss("head.weight", {D, cfg.num_classes}, D);
        m.head_b_ = push_zeros("head.bias", {cfg.num_classes});
        return m;
    }

    std::size_t count_params() const {
        std::size_t total = 0;
        for (const ParamTensor& p : params) total += p.value.size();
        return total;
    }

    // Full forward pass. When `track` is true (and a Tape is active) every
    // parameter becomes a tape leaf, returned in `leaves` for gradient
    // lookup after backward.
    ForwardPass forward_pass(const Tensor& batch, bool track) const {
        if (batch.shape.size() != 2 || batch.shape[1] != config.input_dim)
            throw std::invalid_argument("forward: batch shape " + shape_str(batch.shape) +
                                        " does not match input_dim " +
                                        std::to_string(config.input_dim));
        ForwardPass fp;
        fp.leaves.reserve(params.size());
        Tape* tape = track ? Tape::active() : nullptr;
        for (const ParamTensor& p : params) {
            Tensor t(p.shape, p.value);
            if (tape) t = tape->leaf(t);
            fp.leaves.push_back(std::move(t));
        }
        auto L = [&fp](std::size_t i) -> const Tensor& { return fp.leaves[i]; };

        Tensor x = add_bias_row(matmul(batch, L(in_w_)), L(in_b_));
        ResidualStream stream;
        stream.push_back(x);
        const bool pa = has_pa(config.variant.kind);
        PAParams pap;
        if (pa) {
            pap.A_h = L(pa_A_);
            pap.B_h = L(pa_B_);
            for (std::size_t j : pa_gamma_) pap.gamma.push_back(L(j));
            pap.literal_mode = config.pa_literal;
        }
        for (std::size_t b = 0; b < config.num_blocks; ++b) {
            const BlockIdx& idx = blocks_[b];
            Tensor h = relu(add_bias_row(matmul(x, L(idx.fc1_w)), L(idx.fc1_b)));
            Tensor f = add_bias_row(matmul(h, L(idx.fc2_w)), L(idx.fc2_b));
            RWParams rwp;
            LRParams lrp;
            ResidualParamsView view;
            if (has_rw(config.variant.kind)) {
                rwp = RWParams{L(idx.rw_alpha), L(idx.rw_beta), config.rw_norm};
                view.rw = &rwp;
            }
            if (has_lr(config.variant.kind)) {
                lrp = LRParams{L(idx.lr_A), L(idx.lr_B)};
                view.lr = &lrp;
            }
            if (pa) view.pa = &pap;
            x = apply_residual(config.variant, f, stream, view, b);
            stream.push_back(x);
        }
        fp.logits = add_bias_row(matmul(x, L(head_w_)), L(head_b_));
        return fp;
    }

    Tensor forward(const Tensor& batch) const { return forward_pass(batch, false).logits; }

private:
    struct BlockIdx {
        std::size_t fc1_w = 0, fc1_b = 0, fc2_w = 0, fc2_b = 0;
        std::size_t rw_alpha = 0, rw_beta = 0, lr_A = 0, lr_B = 0;
    };
    std::size_t in_w_ = 0, in_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::size_t pa_A_ = 0, pa_B_ = 0;
    std::vector<std::size_t> pa_gamma_;
    std::vector<BlockIdx> blocks_;
};

inline ModelConfig naive_scale(ModelConfig cfg) {
    cfg.num_blocks += 1;
    cfg.variant = ResidualVariant{VariantKind::Vanilla, 0};
    cfg.rank = 0;
    return cfg;
}

// ---------------------------------------------------------------------------
// Checkpoint format: u64 LE header length, JSON header (config + tensor
// manifest with names/shapes/offsets), then all values as f64 LE.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const Model& m, const std::string& path) {
    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (const ParamTensor& p : m.params) {
        manifest.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}});
        offset += p.value.size();
    }
    nlohmann::json header = {{"config", config_to_json(m.config)}, {"tensors", manifest}};
    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const ParamTensor& p : m.params)
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("checkpoint header truncated: " + path);
    const nlohmann::json header = nlohmann::json::parse(hs);
    Model m = Model::build(config_from_json(header.at("config")));
    const nlohmann::json& manifest = header.at("tensors");
    if (manifest.size() != m.params.size())
        throw std::runtime_error("checkpoint manifest has " + std::to_string(manifest.size()) +
                                 " tensors, model expects " + std::to_string(m.params.size()));
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        ParamTensor& p = m.params[i];
        const nlohmann::json& e = manifest[i];
        if (e.at("name").get<std::string>() != p.name)
            throw std::runtime_error("checkpoint tensor mismatch: " +
                                     e.at("name").get<std::string>() + " vs " + p.name);
        in.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint payload truncated at tensor " + p.name);
    }
    return m;
}

}  // namespace laurel
