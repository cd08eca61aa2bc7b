#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "decaylab/cli.hpp"
#include "decaylab/numerics.hpp"

using namespace decaylab;

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
    bool example = false;
};

ExperimentConfig resolve(const Options& o, std::optional<Task> task)
{
    ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (task) cfg.task = *task;
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.threads) cfg.threads = *o.threads;
    return cfg;
}

int run(const Options& o, std::optional<Task> task)
{
    if (!task) {
        if (o.example) {
            std::cout << example_config();
            return kPass;
        }
        auto cfg = resolve(o, std::nullopt);
        cfg.validate();
        std::cout << serialize_config(cfg);
        return kPass;
    }
    const auto cfg = resolve(o, task);
    const auto res = run_task(cfg);
    for (const auto& f : res.files) std::cout << "wrote " << f << "\n";
    std::cout << to_string(cfg.task) << ": " << (res.status == 0 ? "PASS" : "FAIL") << "\n";
    return res.status == 0 ? kPass : kCheckFailure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"decaylab: decay envelopes, damped wave simulation and inequality checks"};
    app.require_subcommand(1);
    Options opt;
    std::optional<Task> chosen;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "RNG seed (overrides the config)");
        sub->add_option("--out", opt.out, "output directory (overrides the config)");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    };
    const std::pair<Task, const char*> tasks[] = {
        {Task::envelope, "tabulate decay envelopes on a geometric time grid"},
        {Task::simulate, "run the wave solver and export traces and snapshots"},
        {Task::compare, "compare simulated energy with the calibrated envelope"},
        {Task::observability, "check the observability inequality on data suites"},
        {Task::lemmas, "check the lemma inequalities and the comparison chain"},
        {Task::seqlab, "comparison chain and decay bound on random recurrences"},
    };
    for (const auto& [task, help] : tasks) {
        auto* sub = app.add_subcommand(to_string(task), help);
        add_common(sub);
        sub->callback([&chosen, t = task] { chosen = t; });
    }
    auto* config = app.add_subcommand("config", "print the normalized configuration or an example");
    add_common(config);
    config->add_flag("--example", opt.example, "print a commented example configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kConfigError;
    }
    try {
        return run(opt, chosen);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalFailure;
    }
}
