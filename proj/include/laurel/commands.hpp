#pragma once

// Command implementations behind the CLI subcommands. Each command is a
// pure function of its config (plus fixture files) and writes its report
// files through a single code path, so identical inputs give byte-identical
// outputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "laurel/config.hpp"
#include "laurel/layers.hpp"
#include "laurel/model.hpp"
#include "laurel/training.hpp"

namespace laurel {

namespace fmt {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace fmt

// Aligned text rendering of a CSV-like table.
inline std::string render_text_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (widths.size() <= i) widths.resize(i + 1, 0);
            widths[i] = std::max(widths[i], row[i].size());
        }
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += "  ";
            out += fmt::pad(row[i], widths[i]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += "\n";
    }
    return out;
}

inline std::string render_csv(const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += row[i];
        }
        out += "\n";
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// param-count
// ---------------------------------------------------------------------------

struct ParamCountRow {
    std::string variant;
    std::size_t rank = 0;
    std::size_t added_closed_form = 0;
    std::size_t added_enumerated = 0;
    double added_pct = 0.0;
};

struct ParamCountReport {
    std::size_t baseline_params = 0;
    std::vector<ParamCountRow> rows;
    std::string csv, text;
};

inline ParamCountReport cmd_param_count(const ExperimentConfig& cfg) {
    ModelConfig base = cfg.model;
    base.variant = ResidualVariant{VariantKind::Vanilla, 0};
    base.rank = 0;
    const std::size_t baseline = Model::build(base).count_params();

    std::vector<std::string> variants = cfg.variants;
    if (variants.empty())
        variants = {"vanilla", "rw", "lr", "pa", "rw+lr", "rw+lr+pa"};
    std::vector<std::size_t> ranks = cfg.ranks;
    if (ranks.empty()) ranks = {cfg.model.rank ? cfg.model.rank : 4};

    ParamCountReport rep;
    rep.baseline_params = baseline;
    for (const std::string& vs : variants) {
        const VariantKind kind = parse_variant(vs);
        const std::vector<std::size_t> rlist =
            needs_rank(kind) ? ranks : std::vector<std::size_t>{0};
        for (std::size_t r : rlist) {
            ModelConfig mc = cfg.model;
            mc.variant = ResidualVariant{kind, r};
            mc.rank = r;
            const std::size_t total = Model::build(mc).count_params();
            ParamCountRow row;
            row.variant = vs;
            row.rank = r;
            row.added_enumerated = total - baseline;
            row.added_closed_form =
                param_count(mc.variant, cfg.model.width, cfg.model.num_blocks, r);
            row.added_pct =
                100.0 * static_cast<double>(row.added_enumerated) / static_cast<double>(baseline);
            if (row.added_closed_form != row.added_enumerated)
                throw std::runtime_error("param-count mismatch for " + vs + " r=" +
                                         std::to_string(r) + ": closed form " +
                                         std::to_string(row.added_closed_form) +
                                         " vs enumerated " + std::to_string(row.added_enumerated));
            rep.rows.push_back(row);
        }
    }
    std::vector<std::vector<std::string>> table = {
        {"variant", "rank", "params_added", "params_added_enumerated", "params_added_pct"}};
    for (const ParamCountRow& r : rep.rows)
        table.push_back({r.variant, std::to_string(r.rank), std::to_string(r.added_closed_form),
                         std::to_string(r.added_enumerated), fmt::fixed(r.added_pct, 4)});
    rep.csv = render_csv(table);
    rep.text = "baseline parameters: " + std::to_string(baseline) + "\n" +
               render_text_table(table);
    return rep;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

struct GradCheckCase {
    std::string label;
    std::vector<GradCheckGroup> groups;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    bool pass = true;
    std::string text;
};

// Backward-vs-central-differences comparison for one model configuration.
// `corrupt_group` is a test hook: the named parameter group gets its
// analytic gradient perturbed, which must surface as a failure.
inline GradCheckCase gradcheck_model(const ModelConfig& mc, double h, double tol,
                                     std::size_t min_coords,
                                     const std::string& corrupt_group = "") {
    Model model = Model::build(mc);
    std::mt19937_64 rng(mc.seed + 17);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const std::size_t b = 4;
    Tensor batch = Tensor::zeros({b, mc.input_dim});
    for (double& v : batch.data) v = unif(rng);
    std::vector<int> labels(b);
    for (int& y : labels) y = static_cast<int>(rng() % mc.num_classes);

    // analytic gradients
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        ForwardPass fp = model.forward_pass(batch, true);
        Tensor loss = cross_entropy(fp.logits, labels);
        tape.backward(loss);
        for (std::size_t i = 0; i < model.params.size(); ++i)
            analytic.push_back(tape.grad(fp.leaves[i]));
    }

    // flat parameter vector and loss-as-function-of-it
    std::vector<double> flat;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // (offset, size) per param
    for (const ParamTensor& p : model.params) {
        spans.emplace_back(flat.size(), p.value.size());
        flat.insert(flat.end(), p.value.begin(), p.value.end());
    }
    auto loss_of = [&](const std::vector<double>& v) {
        Model m2 = model;
        for (std::size_t i = 0; i < m2.params.size(); ++i)
            std::copy(v.begin() + spans[i].first,
                      v.begin() + spans[i].first + spans[i].second, m2.params[i].value.begin());
        return cross_entropy(m2.forward(batch), labels).data[0];
    };

    GradCheckCase out;
    out.label = variant_name(mc.variant.kind);
    if (has_rw(mc.variant.kind)) out.label += "/" + rw_norm_name(mc.rw_norm);
    if (has_pa(mc.variant.kind)) out.label += mc.pa_literal ? "/literal" : "/default";

    // sample coordinates: a few from every group, then uniform extras until
    // the minimum total is reached
    std::vector<std::pair<std::size_t, std::size_t>> picks;  // (param idx, coord)
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::size_t take = std::min<std::size_t>(spans[i].second, 2);
        for (std::size_t k = 0; k < take; ++k)
            picks.emplace_back(i, rng() % spans[i].second);
    }
    while (picks.size() < min_coords) {
        const std::size_t i = rng() % model.params.size();
        picks.emplace_back(i, rng() % spans[i].second);
    }

    std::map<std::string, GradCheckGroup> groups;
    for (const auto& [pi, ci] : picks) {
        const std::string& name = model.params[pi].name;
        double a = analytic[pi][ci];
        if (!corrupt_group.empty() && name == corrupt_group) a += 1.0;
        const double fd = finite_diff_coord(loss_of, flat, spans[pi].first + ci, h);
        GradCheckGroup& g = groups[name];
        g.name = name;
        g.max_rel_err = std::max(g.max_rel_err, rel_error(a, fd));
        ++g.coords_checked;
    }
    for (const auto& [name, g] : groups) {
        out.groups.push_back(g);
        if (g.max_rel_err >= tol) out.pass = false;
    }
    return out;
}

inline GradCheckReport cmd_gradcheck(const ExperimentConfig& cfg,
                                     const std::string& corrupt_group = "") {
    if (cfg.model.width > 16 || cfg.model.num_blocks > 4)
        throw std::invalid_argument("gradcheck: requires D <= 16 and N <= 4, got D=" +
                                    std::to_string(cfg.model.width) + " N=" +
                                    std::to_string(cfg.model.num_blocks));
    const std::size_t r = std::min<std::size_t>(cfg.model.rank ? cfg.model.rank : 2,
                                                cfg.model.width);
    struct CaseSpec {
        VariantKind kind;
        RWNorm norm;
        bool literal;
    };
    const std::vector<CaseSpec> specs = {
        {VariantKind::Vanilla, RWNorm::SoftmaxPair, false},
        {VariantKind::RW, RWNorm::SoftmaxPair, false},
        {VariantKind::RW, RWNorm::SigmoidSingle, false},
        {VariantKind::RW, RWNorm::None, false},
        {VariantKind::LR, RWNorm::SoftmaxPair, false},
        {VariantKind::PA, RWNorm::SoftmaxPair, false},
        {VariantKind::PA, RWNorm::SoftmaxPair, true},
        {VariantKind::RW_LR, RWNorm::SoftmaxPair, false},
        {VariantKind::RW_LR_PA, RWNorm::SoftmaxPair, false},
    };
    GradCheckReport rep;
    std::vector<std::vector<std::string>> table = {{"case", "group", "coords", "max_rel_err",
                                                    "status"}};
    for (const CaseSpec& s : specs) {
        ModelConfig mc = cfg.model;
        mc.variant = ResidualVariant{s.kind, needs_rank(s.kind) ? r : 0};
        mc.rank = mc.variant.rank;
        mc.rw_norm = s.norm;
        mc.pa_literal = s.literal;
        GradCheckCase c = gradcheck_model(mc, 1e-5, 1e-6, 20, corrupt_group);
        for (const GradCheckGroup& g : c.groups)
            table.push_back({c.label, g.name, std::to_string(g.coords_checked),
                             fmt::fixed(g.max_rel_err * 1e6, 6) + "e-6",
                             g.max_rel_err < 1e-6 ? "ok" : "FAIL"});
        if (!c.pass) rep.pass = false;
        rep.cases.push_back(std::move(c));
    }
    rep.text = render_text_table(table);
    return rep;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareRow {
    std::string label;
    std::string variant;
    std::size_t rank = 0;
    std::size_t params_total = 0;
    std::size_t params_added = 0;
    double params_added_pct = 0.0;
    TrialsSummary summary;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    std::string csv, text;
};

namespace detail {

inline CompareRow run_compare_row(const std::string& label, const ModelConfig& mc,
                                  const TrainConfig& tc, const Dataset& train_ds,
                                  const Dataset& eval_ds, std::size_t baseline_params) {
    CompareRow row;
    row.label = label;
    row.variant = variant_name(mc.variant.kind);
    row.rank = mc.rank;
    row.summary = run_trials(mc, tc, train_ds, eval_ds);
    row.params_total = Model::build(mc).count_params();
    row.params_added = row.params_total - baseline_params;
    row.params_added_pct =
        100.0 * static_cast<double>(row.params_added) / static_cast<double>(baseline_params);
    return row;
}

inline std::vector<std::vector<std::string>> compare_table(const std::vector<CompareRow>& rows) {
    std::vector<std::vector<std::string>> table = {
        {"label", "variant", "rank", "params_total", "params_added", "params_added_pct",
         "best_acc_mean", "best_acc_std", "best_acc_median", "failed_trials"}};
    for (const CompareRow& r : rows)
        table.push_back({r.label, r.variant, std::to_string(r.rank),
                         std::to_string(r.params_total), std::to_string(r.params_added),
                         fmt::fixed(r.params_added_pct, 4), fmt::fixed(r.summary.mean, 6),
                         fmt::fixed(r.summary.stddev, 6), fmt::fixed(r.summary.median, 6),
                         std::to_string(r.summary.failed_trials)});
    return table;
}

}  // namespace detail

// Baseline, baseline + 1 block (naive scaling), then one row per requested
// residual variant, all trained on the same dataset with the same seeds.
inline CompareReport cmd_compare(const ExperimentConfig& cfg) {
    auto [train_ds, eval_ds] = make_datasets(cfg.data);
    ModelConfig base = cfg.model;
    base.variant = ResidualVariant{VariantKind::Vanilla, 0};
    base.rank = 0;
    const std::size_t baseline_params = Model::build(base).count_params();

    CompareReport rep;
    rep.rows.push_back(detail::run_compare_row("vanilla", base, cfg.train, train_ds, eval_ds,
                                               baseline_params));
    rep.rows.push_back(detail::run_compare_row("naive+1layer", naive_scale(base), cfg.train,
                                               train_ds, eval_ds, baseline_params));
    for (const std::string& vs : cfg.variants) {
        const VariantKind kind = parse_variant(vs);
        if (kind == VariantKind::Vanilla) continue;  // already the baseline row
        ModelConfig mc = cfg.model;
        mc.variant = ResidualVariant{kind, needs_rank(kind) ? cfg.model.rank : 0};
        mc.rank = mc.variant.rank;
        CompareRow row =
            detail::run_compare_row(vs, mc, cfg.train, train_ds, eval_ds, baseline_params);
        // closed form must agree with the enumerated delta on every row
        const std::size_t cf =
            param_count(mc.variant, cfg.model.width, cfg.model.num_blocks, mc.rank);
        if (cf != row.params_added)
            throw std::runtime_error("compare: closed-form count " + std::to_string(cf) +
                                     " != enumerated " + std::to_string(row.params_added) +
                                     " for " + vs);
        rep.rows.push_back(std::move(row));
    }
    const auto table = detail::compare_table(rep.rows);
    rep.csv = render_csv(table);
    rep.text = render_text_table(table);
    return rep;
}

// ---------------------------------------------------------------------------
// sweep-rank
// ---------------------------------------------------------------------------

struct SweepRow {
    std::size_t rank = 0;
    std::size_t params_added = 0;
    TrialsSummary summary;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::string csv, text;
};

// Accuracy-vs-rank curve for the RW+LR variant.
inline SweepReport cmd_sweep_rank(const ExperimentConfig& cfg) {
    if (cfg.ranks.empty())
        throw std::invalid_argument("sweep-rank: config must list at least one rank");
    for (std::size_t r : cfg.ranks)
        if (r < 1 || r > cfg.model.width)
            throw std::invalid_argument("sweep-rank: rank " + std::to_string(r) +
                                        " out of range [1," + std::to_string(cfg.model.width) +
                                        "]");
    auto [train_ds, eval_ds] = make_datasets(cfg.data);
    ModelConfig base = cfg.model;
    base.variant = ResidualVariant{VariantKind::Vanilla, 0};
    base.rank = 0;
    const std::size_t baseline_params = Model::build(base).count_params();

    SweepReport rep;
    std::vector<std::vector<std::string>> table = {
        {"rank", "best_acc_mean", "best_acc_std", "params_added"}};
    for (std::size_t r : cfg.ranks) {
        ModelConfig mc = cfg.model;
        mc.variant = ResidualVariant{VariantKind::RW_LR, r};
        mc.rank = r;
        SweepRow row;
        row.rank = r;
        row.summary = run_trials(mc, cfg.train, train_ds, eval_ds);
        row.params_added = Model::build(mc).count_params() - baseline_params;
        table.push_back({std::to_string(r), fmt::fixed(row.summary.mean, 6),
                         fmt::fixed(row.summary.stddev, 6), std::to_string(row.params_added)});
        rep.rows.push_back(std::move(row));
    }
    rep.csv = render_csv(table);
    rep.text = render_text_table(table);
    return rep;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCmdResult {
    TrialResult trial;
    std::string metrics_jsonl;
};

inline std::string metrics_to_jsonl(const std::vector<MetricsRecord>& metrics) {
    std::string out;
    char buf[160];
    for (const MetricsRecord& m : metrics) {
        std::snprintf(buf, sizeof(buf), "{\"step\":%zu,\"train_loss\":%.17g,\"learning_rate\":%.17g",
                      m.step, m.train_loss, m.learning_rate);
        out += buf;
        if (m.eval_accuracy) {
            std::snprintf(buf, sizeof(buf), ",\"eval_accuracy\":%.17g", *m.eval_accuracy);
            out += buf;
        }
        out += "}\n";
    }
    return out;
}

// Single trial on the config's first seed; writes checkpoint + metrics.
inline TrainCmdResult cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
    auto [train_ds, eval_ds] = make_datasets(cfg.data);
    std::vector<MetricsRecord> metrics;
    Model model;
    TrainCmdResult res;
    res.trial = run_trial(cfg.model, cfg.train, train_ds, eval_ds, cfg.train.seeds.front(),
                          &metrics, &model);
    res.metrics_jsonl = metrics_to_jsonl(metrics);
    write_file(out_dir + "/metrics.jsonl", res.metrics_jsonl);
    if (!res.trial.failed) save_checkpoint(model, out_dir + "/checkpoint.bin");
    return res;
}

}  // namespace laurel
