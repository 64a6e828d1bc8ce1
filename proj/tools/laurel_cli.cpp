// laurel: residual-variant experiment runner.
//
// Subcommands: param-count, gradcheck, train, compare, sweep-rank.
// Every command takes a JSON experiment config; outputs land in --out
// (default: the config's out_dir).

#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "laurel/commands.hpp"
#include "laurel/config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seeds_csv;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config out_dir)");
    cmd->add_option("--seeds", args.seeds_csv, "comma-separated seeds (overrides config)");
}

laurel::ExperimentConfig load(const CommonArgs& args) {
    laurel::ExperimentConfig cfg = laurel::load_experiment_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.seeds_csv.empty()) {
        std::vector<std::uint64_t> seeds;
        std::stringstream ss(args.seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
        if (seeds.empty()) throw std::invalid_argument("--seeds: no seeds parsed");
        cfg.train.seeds = seeds;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned augmented residual layer lab"};
    app.require_subcommand(1);

    CommonArgs pc_args, gc_args, tr_args, cmp_args, sw_args;
    std::string corrupt_group;

    CLI::App* pc = app.add_subcommand("param-count", "closed-form vs enumerated added params");
    add_common(pc, pc_args);
    CLI::App* gc = app.add_subcommand("gradcheck", "backward vs finite differences");
    add_common(gc, gc_args);
    gc->add_option("--corrupt-group", corrupt_group,
                   "test hook: perturb this parameter group's gradient");
    CLI::App* tr = app.add_subcommand("train", "single trial; checkpoint + metrics");
    add_common(tr, tr_args);
    CLI::App* cmp = app.add_subcommand("compare", "baseline / naive-scaling / variant table");
    add_common(cmp, cmp_args);
    CLI::App* sw = app.add_subcommand("sweep-rank", "accuracy-vs-rank curve for rw+lr");
    add_common(sw, sw_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (pc->parsed()) {
            laurel::ExperimentConfig cfg = load(pc_args);
            laurel::ParamCountReport rep = laurel::cmd_param_count(cfg);
            laurel::write_file(cfg.out_dir + "/report.csv", rep.csv);
            laurel::write_file(cfg.out_dir + "/report.txt", rep.text);
            std::cout << rep.text;
        } else if (gc->parsed()) {
            laurel::ExperimentConfig cfg = load(gc_args);
            laurel::GradCheckReport rep = laurel::cmd_gradcheck(cfg, corrupt_group);
            laurel::write_file(cfg.out_dir + "/report.txt", rep.text);
            std::cout << rep.text;
            if (!rep.pass) {
                std::cerr << "gradcheck failed\n";
                return 1;
            }
        } else if (tr->parsed()) {
            laurel::ExperimentConfig cfg = load(tr_args);
            laurel::TrainCmdResult res = laurel::cmd_train(cfg, cfg.out_dir);
            if (res.trial.failed) {
                std::cerr << "trial failed: " << res.trial.error << "\n";
                return 1;
            }
            std::cout << "best accuracy@1 " << res.trial.best_eval_accuracy << " at step "
                      << res.trial.step_of_best << "\n";
        } else if (cmp->parsed()) {
            laurel::ExperimentConfig cfg = load(cmp_args);
            laurel::CompareReport rep = laurel::cmd_compare(cfg);
            laurel::write_file(cfg.out_dir + "/report.csv", rep.csv);
            laurel::write_file(cfg.out_dir + "/report.txt", rep.text);
            std::cout << rep.text;
            for (const laurel::CompareRow& r : rep.rows)
                if (r.summary.failed_trials > 0) return 1;
        } else if (sw->parsed()) {
            laurel::ExperimentConfig cfg = load(sw_args);
            laurel::SweepReport rep = laurel::cmd_sweep_rank(cfg);
            laurel::write_file(cfg.out_dir + "/report.csv", rep.csv);
            laurel::write_file(cfg.out_dir + "/report.txt", rep.text);
            std::cout << rep.text;
            for (const laurel::SweepRow& r : rep.rows)
                if (r.summary.failed_trials > 0) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
