// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Experiment configs are read from the repo's configs/
// directory (path injected at compile time).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "laurel/commands.hpp"
#include "laurel/config.hpp"
#include "laurel/data.hpp"
#include "laurel/layers.hpp"
#include "laurel/model.hpp"
#include "laurel/training.hpp"

#ifndef LAUREL_CONFIG_DIR
#define LAUREL_CONFIG_DIR "configs"
#endif

using namespace laurel;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string cfg_path(const std::string& name) {
    return std::string(LAUREL_CONFIG_DIR) + "/" + name;
}

double elapsed_sec(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = unif(rng);
    return t;
}

// --- criterion 1: closed-form vs enumerated parameter counts -------------

void criterion_param_count() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    std::mt19937_64 rng(101);
    const VariantKind kinds[] = {VariantKind::Vanilla, VariantKind::RW,    VariantKind::LR,
                                 VariantKind::PA,      VariantKind::RW_LR, VariantKind::RW_LR_PA};
    for (int trial = 0; trial < 50 && pass; ++trial) {
        ModelConfig cfg;
        cfg.input_dim = 2 + rng() % 8;
        cfg.width = 2 + rng() % 14;
        cfg.num_blocks = 1 + rng() % 4;
        cfg.hidden_mult = 1 + rng() % 2;
        cfg.num_classes = 2 + rng() % 6;
        cfg.variant.kind = kinds[rng() % 6];
        cfg.rank = needs_rank(cfg.variant.kind) ? 1 + rng() % cfg.width : 0;
        cfg.variant.rank = cfg.rank;
        cfg.seed = rng();
        ModelConfig vanilla = cfg;
        vanilla.variant = ResidualVariant{VariantKind::Vanilla, 0};
        vanilla.rank = 0;
        const std::size_t delta =
            Model::build(cfg).count_params() - Model::build(vanilla).count_params();
        const std::size_t cf = param_count(cfg.variant, cfg.width, cfg.num_blocks, cfg.rank);
        if (delta != cf) {
            pass = false;
            detail = "mismatch on " + variant_name(cfg.variant.kind) + " D=" +
                     std::to_string(cfg.width);
        }
    }
    // anchored closed forms
    for (std::size_t D : {16, 64}) {
        for (std::size_t N : {4, 8}) {
            if (param_count({VariantKind::LR, 4}, D, N, 4) != 8 * N * D) pass = false;
            if (param_count({VariantKind::RW, 0}, D, N, 0) != 2 * N) pass = false;
            if (param_count({VariantKind::PA, 3}, D, N, 3) != 2 * 3 * D + N) pass = false;
        }
    }
    const double dt = elapsed_sec(t0);
    if (dt >= 10.0) {
        pass = false;
        detail = "runtime " + std::to_string(dt) + "s exceeds 10s";
    }
    report(1, "parameter-count exactness (50 random configs + anchors)", pass,
           detail.empty() ? "runtime " + std::to_string(dt).substr(0, 5) + "s" : detail);
}

// --- criterion 2: gradient fidelity --------------------------------------

void criterion_grad_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    try {
        ExperimentConfig cfg = load_experiment_config(cfg_path("gradcheck.json"));
        GradCheckReport rep = cmd_gradcheck(cfg);
        double worst = 0.0;
        for (const GradCheckCase& c : rep.cases)
            for (const GradCheckGroup& g : c.groups) worst = std::max(worst, g.max_rel_err);
        pass = rep.pass;
        detail = "max rel err " + std::to_string(worst);
        if (!pass) detail += " (see gradcheck report)";
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    const double dt = elapsed_sec(t0);
    if (dt >= 30.0) {
        pass = false;
        detail = "runtime " + std::to_string(dt) + "s exceeds 30s";
    }
    report(2, "gradient fidelity vs central differences (all variants)", pass, detail);
}

// --- criterion 3: reduction at init --------------------------------------

void criterion_reduction_at_init() {
    bool pass = true;
    std::string detail;
    ModelConfig base;
    base.input_dim = 6;
    base.width = 8;
    base.num_blocks = 3;
    base.hidden_mult = 1;
    base.num_classes = 4;
    base.seed = 21;
    ModelConfig vanilla = base;
    vanilla.variant = ResidualVariant{VariantKind::Vanilla, 0};
    Model vm = Model::build(vanilla);

    struct Case {
        const char* name;
        VariantKind kind;
        std::size_t rank;
        RWNorm norm;
    };
    const Case cases[] = {{"lr", VariantKind::LR, 2, RWNorm::SoftmaxPair},
                          {"pa-default", VariantKind::PA, 2, RWNorm::SoftmaxPair},
                          {"rw-none", VariantKind::RW, 0, RWNorm::None}};
    std::mt19937_64 rng(31);
    for (const Case& c : cases) {
        ModelConfig mc = base;
        mc.variant = ResidualVariant{c.kind, c.rank};
        mc.rank = c.rank;
        mc.rw_norm = c.norm;
        Model m = Model::build(mc);
        for (int k = 0; k < 10; ++k) {
            Tensor batch = random_tensor({4, base.input_dim}, rng);
            if (m.forward(batch).data != vm.forward(batch).data) {
                pass = false;
                detail = std::string(c.name) + " not bit-identical to vanilla twin";
            }
        }
    }
    // softmax-RW at equal logits: 0.5 (f_out + x_i) within 1e-12 per block
    for (int k = 0; k < 10; ++k) {
        Tensor f = random_tensor({3, 8}, rng), x = random_tensor({3, 8}, rng);
        RWParams p{Tensor::scalar(0.0), Tensor::scalar(0.0), RWNorm::SoftmaxPair};
        Tensor out = rw_combine(f, x, p);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (std::abs(out.data[i] - 0.5 * (f.data[i] + x.data[i])) > 1e-12) {
                pass = false;
                detail = "softmax-RW half-half deviation";
            }
    }
    report(3, "reduction-at-init (LR, PA-default, RW-none bit-exact; softmax-RW half-half)",
           pass, detail);
}

// --- criterion 4: softmax constraint under training ----------------------

void criterion_softmax_constraint() {
    bool pass = true;
    std::string detail;
    ModelConfig mc;
    mc.input_dim = 4;
    mc.width = 6;
    mc.num_blocks = 2;
    mc.hidden_mult = 1;
    mc.num_classes = 3;
    mc.variant = ResidualVariant{VariantKind::RW, 0};
    mc.rw_norm = RWNorm::SoftmaxPair;
    mc.seed = 9;
    auto check = [&](const Model& m, const char* when) {
        for (std::size_t b = 0; b < mc.num_blocks; ++b) {
            double la = 0, lb = 0;
            for (const ParamTensor& p : m.params) {
                if (p.name == "block" + std::to_string(b) + ".rw.alpha_logit") la = p.value[0];
                if (p.name == "block" + std::to_string(b) + ".rw.beta_logit") lb = p.value[0];
            }
            const double alpha = 1.0 / (1.0 + std::exp(-(la - lb)));
            const double beta = 1.0 / (1.0 + std::exp(la - lb));
            if (std::abs(alpha + beta - 1.0) > 1e-12) {
                pass = false;
                detail = std::string("block ") + std::to_string(b) + " " + when;
            }
        }
    };
    check(Model::build(mc), "at init");
    TrainConfig tc;
    tc.steps = 100;
    tc.batch_size = 8;
    tc.eval_every = 100;
    tc.optim.learning_rate = 0.05;
    tc.optim.momentum = 0.9;
    tc.seeds = {1};
    Dataset train = gen_gaussian_mixture(3, 4, 30, 0.2, 1);
    Dataset eval = gen_gaussian_mixture(3, 4, 10, 0.2, 2);
    Model trained;
    run_trial(mc, tc, train, eval, 1, nullptr, &trained);
    check(trained, "after 100 steps");
    report(4, "softmax constraint alpha+beta=1 at init and after 100 steps", pass, detail);
}

// --- criterion 5: low-rank cost bound ------------------------------------

void criterion_lowrank_cost() {
    bool pass = true;
    std::string detail;
    const std::size_t D = 256, r = 4;
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> A(D * r), B(r * D), x(D);
    for (double& v : A) v = unif(rng);
    for (double& v : B) v = unif(rng);
    for (double& v : x) v = unif(rng);
    LowRankProbe p = lowrank_cost_probe(A, B, x, D, r);
    if (p.lowrank_madds > 2 * r * D + D) {
        pass = false;
        detail = "low-rank path used " + std::to_string(p.lowrank_madds) + " madds";
    }
    if (p.dense_madds < D * D) {
        pass = false;
        detail = "dense oracle used only " + std::to_string(p.dense_madds) + " madds";
    }
    for (std::size_t i = 0; i < D; ++i)
        if (std::abs(p.lowrank_out[i] - p.dense_out[i]) > 1e-12) {
            pass = false;
            detail = "route outputs disagree";
        }
    report(5, "low-rank cost bound (" + std::to_string(p.lowrank_madds) + " vs " +
                  std::to_string(p.dense_madds) + " madds, outputs within 1e-12)",
           pass, detail);
}

// --- criterion 6: byte-identical reruns ----------------------------------

void criterion_determinism() {
    bool pass = true;
    std::string detail;
    try {
        ExperimentConfig cfg = load_experiment_config(cfg_path("determinism.json"));
        CompareReport c1 = cmd_compare(cfg);
        CompareReport c2 = cmd_compare(cfg);
        if (c1.csv != c2.csv || c1.text != c2.text) {
            pass = false;
            detail = "compare outputs differ between identical runs";
        }
        SweepReport s1 = cmd_sweep_rank(cfg);
        SweepReport s2 = cmd_sweep_rank(cfg);
        if (s1.csv != s2.csv) {
            pass = false;
            detail = "sweep-rank outputs differ between identical runs";
        }
        // metrics stream as well
        auto [train_ds, eval_ds] = make_datasets(cfg.data);
        std::vector<MetricsRecord> m1, m2;
        run_trial(cfg.model, cfg.train, train_ds, eval_ds, 1, &m1);
        run_trial(cfg.model, cfg.train, train_ds, eval_ds, 1, &m2);
        if (metrics_to_jsonl(m1) != metrics_to_jsonl(m2)) {
            pass = false;
            detail = "metrics JSONL differs between identical runs";
        }
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    report(6, "determinism: repeated compare/sweep-rank runs byte-identical", pass, detail);
}

// --- criterion 7: desk-scale comparison protocol -------------------------

void criterion_protocol(CompareReport* out_report) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    try {
        ExperimentConfig cfg = load_experiment_config(cfg_path("compare_gaussian.json"));
        CompareReport rep = cmd_compare(cfg);
        const std::vector<std::string> expect_rows = {"vanilla", "naive+1layer", "rw", "rw+lr",
                                                      "rw+lr+pa"};
        if (rep.rows.size() != expect_rows.size()) {
            pass = false;
            detail = "expected 5 rows, got " + std::to_string(rep.rows.size());
        } else {
            for (std::size_t i = 0; i < expect_rows.size(); ++i)
                if (rep.rows[i].label != expect_rows[i]) {
                    pass = false;
                    detail = "row " + std::to_string(i) + " is " + rep.rows[i].label;
                }
        }
        double naive_pct = 0.0;
        for (const CompareRow& r : rep.rows) {
            if (r.label == "naive+1layer") naive_pct = r.params_added_pct;
            if (r.summary.failed_trials > 0) {
                pass = false;
                detail = r.label + " had failed trials";
            }
            if (r.summary.median <= 0.85) {
                pass = false;
                detail = r.label + " median accuracy " + std::to_string(r.summary.median) +
                         " <= 0.85";
            }
        }
        for (const CompareRow& r : rep.rows)
            if (r.label != "vanilla" && r.label != "naive+1layer" &&
                !(r.params_added_pct < naive_pct)) {
                pass = false;
                detail = r.label + " params-added % not below naive scaling";
            }
        if (out_report) *out_report = rep;
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    const double dt = elapsed_sec(t0);
    if (dt >= 600.0) {
        pass = false;
        detail = "runtime " + std::to_string(dt) + "s exceeds 10 min";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "runtime %.0fs", dt);
    report(7, "desk-scale comparison protocol (5 rows, median acc > 0.85, params %)", pass,
           detail.empty() ? buf : detail);
}

// --- criterion 8: rank sweep ---------------------------------------------

void criterion_rank_sweep() {
    bool pass = true;
    std::string detail;
    try {
        ExperimentConfig cfg = load_experiment_config(cfg_path("sweep_rank.json"));
        SweepReport rep = cmd_sweep_rank(cfg);
        if (rep.rows.size() != 6) {
            pass = false;
            detail = "expected 6 rows, got " + std::to_string(rep.rows.size());
        }
        const std::size_t N = cfg.model.num_blocks, D = cfg.model.width;
        std::string acc_curve;
        for (const SweepRow& r : rep.rows) {
            // rw+lr adds 2N + 2DN r: exactly linear in r
            if (r.params_added != 2 * N + 2 * D * N * r.rank) {
                pass = false;
                detail = "params_added not linear in r at r=" + std::to_string(r.rank);
            }
            char buf[48];
            std::snprintf(buf, sizeof(buf), " r%zu:%.3f", r.rank, r.summary.mean);
            acc_curve += buf;
        }
        report(8, "rank sweep: 6-row curve, params linear in r; accuracy" + acc_curve, pass,
               detail);
    } catch (const std::exception& e) {
        report(8, "rank sweep", false, e.what());
    }
}

// --- criterion 9: IDX loader ----------------------------------------------

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void criterion_idx() {
    bool pass = true;
    std::string detail;
    try {
        write_bytes("acc_images.idx",
                    {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                     0, 1, 128, 255, 10, 20, 30, 40});
        write_bytes("acc_labels.idx", {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 2, 3, 1});
        Dataset ds = load_idx("acc_images.idx", "acc_labels.idx");
        if (ds.features.data[1] != 1.0 / 255.0 || ds.labels != std::vector<int>{3, 1}) {
            pass = false;
            detail = "fixture decoded incorrectly";
        }
        save_idx(ds, "acc_images2.idx", "acc_labels2.idx", 2, 2);
        Dataset ds2 = load_idx("acc_images2.idx", "acc_labels2.idx");
        if (ds.features.data != ds2.features.data || ds.labels != ds2.labels) {
            pass = false;
            detail = "round trip not exact";
        }
        // bad magic: labels magic on an images file
        write_bytes("acc_badmagic.idx",
                    {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 5});
        bool threw = false;
        try {
            load_idx("acc_badmagic.idx", "acc_labels.idx");
        } catch (const std::runtime_error& e) {
            threw = std::string(e.what()).find("bad magic") != std::string::npos;
        }
        if (!threw) {
            pass = false;
            detail = "bad-magic file accepted";
        }
        // truncation
        write_bytes("acc_trunc.idx",
                    {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2});
        threw = false;
        try {
            load_idx("acc_trunc.idx", "acc_labels.idx");
        } catch (const std::runtime_error& e) {
            threw = std::string(e.what()).find("truncated") != std::string::npos;
        }
        if (!threw) {
            pass = false;
            detail = "truncated file accepted";
        }
        for (const char* f : {"acc_images.idx", "acc_labels.idx", "acc_images2.idx",
                              "acc_labels2.idx", "acc_badmagic.idx", "acc_trunc.idx"})
            std::remove(f);
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    report(9, "IDX loader: byte-authored fixture, round trip, bad magic, truncation", pass,
           detail);
}

}  // namespace

int main() {
    criterion_param_count();
    criterion_grad_fidelity();
    criterion_reduction_at_init();
    criterion_softmax_constraint();
    criterion_lowrank_cost();
    criterion_determinism();
    CompareReport protocol_report;
    criterion_protocol(&protocol_report);
    criterion_rank_sweep();
    criterion_idx();
    if (!protocol_report.text.empty())
        std::printf("\ncomparison report:\n%s", protocol_report.text.c_str());
    std::printf("\n%s\n", failures == 0 ? "all criteria passed" : "SOME CRITERIA FAILED");
    return failures == 0 ? 0 : 1;
}
