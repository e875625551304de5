// abacode: pretrain, run and compare contextual-bandit agents over labeled
// context streams.

#include "abacode/harness.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> rounds;
    std::vector<std::string> variants;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Experiment configuration (YAML)")->required();
    cmd->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--rounds", o.rounds, "Online rounds per run");
    cmd->add_option("--variant", o.variants, "Restrict to (or add) a variant by name; repeatable");
}

abacode::ExperimentConfig resolve(const Overrides& o) {
    auto cfg = abacode::load_config(o.config);
    if (o.seed)
        cfg.seeds = {*o.seed};
    if (o.out)
        cfg.out_dir = *o.out;
    if (o.rounds)
        cfg.rounds = *o.rounds;
    if (!o.variants.empty()) {
        std::vector<abacode::VariantSpec> chosen;
        for (const auto& name : o.variants) {
            const auto it = std::find_if(cfg.variants.begin(), cfg.variants.end(),
                                         [&](const auto& v) { return v.name == name; });
            chosen.push_back(it != cfg.variants.end() ? *it : abacode::standard_variant(name));
        }
        cfg.variants = std::move(chosen);
    }
    cfg.validate();
    return cfg;
}

void print_ranking(const std::vector<abacode::RankingRow>& ranking) {
    std::cout << "rank  variant            mean_accuracy  seeds\n";
    for (const auto& r : ranking)
        std::cout << std::left << std::setw(6) << r.rank << std::setw(19) << r.variant << std::setw(15)
                  << abacode::format_number(r.mean_accuracy) << r.seeds << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual bandits with context-dependent embeddings"};
    app.require_subcommand(1);

    Overrides pretrain_opts, run_opts, compare_opts;
    std::optional<std::string> snapshots;

    auto* pretrain = app.add_subcommand("pretrain", "Pretrain agents and write snapshots under <out>/snapshots");
    add_common(pretrain, pretrain_opts);

    auto* run = app.add_subcommand("run", "Run every (variant, seed) pair and write CSV results");
    add_common(run, run_opts);
    run->add_option("--from-snapshots", snapshots, "Start from snapshots written by 'pretrain'");

    auto* cmp = app.add_subcommand("compare", "Rank variants by mean accuracy from <out>/summary.csv");
    add_common(cmp, compare_opts);

    auto* gen = app.add_subcommand("gen-config", "Print a commented configuration template");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) {
            for (const auto& path : abacode::pretrain_snapshot(resolve(pretrain_opts)))
                std::cout << path << '\n';
        } else if (run->parsed()) {
            const auto cfg = resolve(run_opts);
            abacode::RunOptions options;
            options.snapshot_dir = snapshots;
            const auto rows = abacode::run_experiment(cfg, options);
            std::cout << "variant,seed,final_accuracy,total_errors\n";
            for (const auto& r : rows)
                std::cout << r.variant << ',' << r.seed << ',' << abacode::format_number(r.accuracy) << ','
                          << r.errors << '\n';
        } else if (cmp->parsed()) {
            print_ranking(abacode::compare(resolve(compare_opts)));
        } else if (gen->parsed()) {
            std::cout << abacode::config_template();
        }
    } catch (const abacode::Error& e) {
        std::cerr << "error kind=" << abacode::to_string(e.kind()) << " message=" << std::quoted(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal message=" << std::quoted(e.what()) << '\n';
        return 3;
    }
    return 0;
}
