#pragma once

// SGD-with-momentum trainer and the multi-seed trial protocol: train each
// seed, track the best eval accuracy@1 seen during the run, aggregate
// mean/std/median over seeds. Every trial is a pure function of
// (model seed, data, config).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "laurel/data.hpp"
#include "laurel/model.hpp"
#include "laurel/tensor.hpp"

namespace laurel {

struct OptimConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    bool cosine_decay = true;
    std::size_t warmup_steps = 0;
};

struct TrainConfig {
    std::size_t steps = 100;
    std::size_t batch_size = 32;
    std::size_t eval_every = 50;
    OptimConfig optim;
    std::vector<std::uint64_t> seeds = {1};

    void validate() const {
        if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
        if (!(optim.learning_rate >= 0.0))
            throw std::invalid_argument("train config: learning rate must be >= 0");
        if (eval_every < 1 || eval_every > steps)
            throw std::invalid_argument("train config: eval_every must be in [1, steps]");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (seeds.empty()) throw std::invalid_argument("train config: need at least one seed");
    }
};

struct MetricsRecord {
    std::size_t step = 0;
    double train_loss = 0.0;
    std::optional<double> eval_accuracy;
    double learning_rate = 0.0;
};

struct TrialResult {
    std::uint64_t seed = 0;
    double best_eval_accuracy = 0.0;
    std::size_t step_of_best = 0;
    double final_train_loss = 0.0;
    std::size_t param_count = 0;
    double wall_time_sec = 0.0;
    bool failed = false;
    std::string error;
};

struct TrialsSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample std; 0 for a single seed
    double median = 0.0;
    std::size_t failed_trials = 0;
    std::vector<TrialResult> per_seed;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Linear warmup then optional cosine decay over the remaining steps.
inline double lr_at_step(const OptimConfig& o, std::size_t step, std::size_t total_steps) {
    double lr = o.learning_rate;
    if (o.warmup_steps > 0 && step < o.warmup_steps)
        return lr * static_cast<double>(step + 1) / static_cast<double>(o.warmup_steps);
    if (o.cosine_decay) {
        const std::size_t decay_steps = total_steps - o.warmup_steps;
        const double progress =
            decay_steps == 0
                ? 1.0
                : static_cast<double>(step - o.warmup_steps) / static_cast<double>(decay_steps);
        const double pi = 3.14159265358979323846;
        lr *= 0.5 * (1.0 + std::cos(pi * progress));
    }
    return lr;
}

// v <- mu*v - lr*g ; p <- p + v
inline void sgd_update(std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& velocity, double lr, double momentum) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

struct OptState {
    std::vector<std::vector<double>> velocity;  // parallel to model params

    static OptState init(const Model& m) {
        OptState s;
        for (const ParamTensor& p : m.params) s.velocity.emplace_back(p.value.size(), 0.0);
        return s;
    }
};

// One optimizer step on one batch. Returns the pre-update loss.
inline double train_step(Model& model, const Batch& batch, OptState& state, double lr,
                         double momentum) {
    Tape tape;
    ForwardPass fp = model.forward_pass(batch.features, true);
    Tensor loss = cross_entropy(fp.logits, batch.labels);
    if (!std::isfinite(loss.data[0]))
        throw DivergenceError("training diverged: non-finite loss");
    tape.backward(loss);
    for (std::size_t i = 0; i < model.params.size(); ++i)
        sgd_update(model.params[i].value, tape.grad(fp.leaves[i]), state.velocity[i], lr,
                   momentum);
    return loss.data[0];
}

// Accuracy@1 with deterministic tie-breaking: argmax, lowest class index wins.
inline double accuracy_at_1(const Model& model, const Dataset& ds) {
    const Tensor logits = model.forward(ds.features);
    const std::size_t n = logits.shape[0], c = logits.shape[1];
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = logits.data.data() + r * c;
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        if (static_cast<int>(best) == ds.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

inline TrialResult run_trial(ModelConfig model_cfg, const TrainConfig& train_cfg,
                             const Dataset& train_ds, const Dataset& eval_ds,
                             std::uint64_t seed, std::vector<MetricsRecord>* metrics = nullptr,
                             Model* out_model = nullptr) {
    train_cfg.validate();
    model_cfg.seed = seed;
    TrialResult res;
    res.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    Model model;
    try {
        model = Model::build(model_cfg);
        res.param_count = model.count_params();
        OptState state = OptState::init(model);
        std::vector<Batch> epoch;
        std::size_t cursor = 0, epoch_idx = 0;
        for (std::size_t step = 0; step < train_cfg.steps; ++step) {
            if (cursor >= epoch.size()) {
                epoch = batches(train_ds, train_cfg.batch_size,
                                seed * 1000003u + epoch_idx);
                cursor = 0;
                ++epoch_idx;
            }
            const double lr = lr_at_step(train_cfg.optim, step, train_cfg.steps);
            const double loss =
                train_step(model, epoch[cursor++], state, lr, train_cfg.optim.momentum);
            res.final_train_loss = loss;
            MetricsRecord rec{step + 1, loss, std::nullopt, lr};
            if ((step + 1) % train_cfg.eval_every == 0 || step + 1 == train_cfg.steps) {
                const double acc = accuracy_at_1(model, eval_ds);
                rec.eval_accuracy = acc;
                if (acc > res.best_eval_accuracy) {
                    res.best_eval_accuracy = acc;
                    res.step_of_best = step + 1;
                }
            }
            if (metrics) metrics->push_back(rec);
        }
    } catch (const DivergenceError& e) {
        res.failed = true;
        res.error = e.what();
    }
    if (out_model) *out_model = std::move(model);
    res.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline TrialsSummary run_trials(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                const Dataset& train_ds, const Dataset& eval_ds) {
    train_cfg.validate();
    TrialsSummary out;
    for (std::uint64_t seed : train_cfg.seeds)
        out.per_seed.push_back(run_trial(model_cfg, train_cfg, train_ds, eval_ds, seed));
    std::vector<double> accs;
    for (const TrialResult& r : out.per_seed) {
        if (r.failed) {
            ++out.failed_trials;
            continue;
        }
        accs.push_back(r.best_eval_accuracy);
    }
    if (!accs.empty()) {
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        out.mean = mean;
        if (accs.size() > 1) {
            double ss = 0.0;
            for (double a : accs) ss += (a - mean) * (a - mean);
            out.stddev = std::sqrt(ss / static_cast<double>(accs.size() - 1));
        }
        std::vector<double> sorted = accs;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        out.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    return out;
}

}  // namespace laurel
