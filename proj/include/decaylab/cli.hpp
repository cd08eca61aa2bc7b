#pragma once

// Experiment driver: configuration file, task runners and their output files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "decaylab/damping.hpp"
#include "decaylab/obscheck.hpp"
#include "decaylab/seqlab.hpp"
#include "decaylab/wavesim.hpp"
#include "decaylab/weight.hpp"

namespace decaylab {

enum class Task { envelope, simulate, compare, observability, lemmas, seqlab };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

struct TimeGrid {
    double t_min = 10.0;
    double t_max = 1e6;
    int points = 121;

    /// Geometric grid from t_min to t_max.
    std::vector<double> values() const;
};

struct SimulationSpec {
    int N = 128;
    double dt = 0.0;
    double T_final = 300.0;
    WaveScheme scheme = WaveScheme::leapfrog;
    WaveKind kind = WaveKind::nonlinear_damped;
    int stride = 20;
    /// Initial mode coefficients (position, velocity).
    std::vector<double> c{0.0, 0.2, 0.0};
    std::vector<double> d{1.0, 0.0, 0.5};
};

struct ObservabilitySpec {
    double T = 2.0;
    int max_mode = 16;
    int random_count = 20;
    /// Constant claimed for the inequality; NaN checks only positivity of the empirical constant.
    double claimed = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> fit_betas{0.25, 0.5, 1.0, 2.0};
    int fit_mode_hi = 16;
    int N = 256;
    int samples_per_period = 64;
};

struct LemmaSpec {
    double T = 1.0;
    int max_mode = 32;
    int random_count = 50;
    int N = 128;
    double dt_factor = 0.5;
    int seqlab_instances = 50;
    int seqlab_steps = 1000;
    /// Reruns the phiz check with k_T - 1 and reports whether any datum then fails.
    bool corrupt_kT = false;
};

struct SeqlabSpec {
    int instances = 200;
    int steps = 1000;
    /// Sampled times per instance for the decay bound on [2T, 200T].
    int bound_samples = 200;
    bool perturbed = true;
};

struct ExperimentConfig {
    Task task = Task::envelope;
    DampingLaw law = make_power_law(3.0);
    CoefficientField field = CoefficientField::bump(0.4, 0.6, 1.0, 1.0);
    GrowthSpec growth;
    EnvelopeSpec envelope{2.0, 4.0, 0.5, 0.5};
    double beta = 1.0;
    TimeGrid grid;
    SimulationSpec simulation;
    ObservabilitySpec observability;
    LemmaSpec lemmas;
    SeqlabSpec seqlab;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;

    /// Cross-field checks; throws ConfigError.
    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Parses the configuration text; `//` and `/* */` comments are allowed.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);
/// Commented example configuration listing every field with its default.
std::string example_config();

struct TaskResult {
    /// 0 when every check passed, 1 otherwise.
    int status = 0;
    nlohmann::json summary;
    std::vector<std::string> files;
};

TaskResult run_envelope(const ExperimentConfig& config);
TaskResult run_simulate(const ExperimentConfig& config);
TaskResult run_compare(const ExperimentConfig& config);
TaskResult run_observability(const ExperimentConfig& config);
TaskResult run_lemmas(const ExperimentConfig& config);
TaskResult run_seqlab(const ExperimentConfig& config);
TaskResult run_task(const ExperimentConfig& config);

/// Results of fn(0..n-1) computed on up to `threads` workers, returned in index order.
template <typename Fn>
auto parallel_map(int n, int threads, Fn&& fn) -> std::vector<decltype(fn(0))>;

} // namespace decaylab

#include "decaylab/detail/parallel_map.hpp"
