#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "decaylab/cli.hpp"

using namespace decaylab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("decaylab_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> csv_column(const std::string& text, int col)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string cell;
        for (int i = 0; i <= col; ++i) std::getline(ls, cell, ',');
        out.push_back(cell);
    }
    return out;
}

} // namespace

TEST_CASE("example config parses and round-trips")
{
    const auto cfg = parse_config(example_config());
    CHECK(cfg.task == Task::compare);
    CHECK_NOTHROW(cfg.validate());
    const auto text = serialize_config(cfg);
    const auto again = parse_config(text);
    CHECK(serialize_config(again) == text);
    CHECK(again.to_json() == cfg.to_json());
}

TEST_CASE("round trip keeps non-default values")
{
    ExperimentConfig c;
    c.task = Task::observability;
    c.law = make_cubic_exp();
    c.field = CoefficientField::indicator(0.1, 0.2, 3.0);
    c.growth.kind = GrowthKind::H_for_A3;
    c.growth.func = GrowthFunction::exponential_obs(2.0, 0.5);
    c.envelope = {3.0, 2.0, 0.25, 0.1, 7.0};
    c.observability.claimed = 0.5;
    c.simulation.c = {0.1, 0.0, -0.3};
    c.seed = 18446744073709551557ull;
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.seed == c.seed);
    CHECK(back.observability.claimed == 0.5);
    CHECK(back.envelope == c.envelope);
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(parse_config("{\"unknown\": 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"grid\": {\"tmin\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"task\": \"dance\"}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"simulation\": {\"dt\": 0.5}}").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"simulation\": {\"N\": 2, \"c\": [1, 2, 3]}}").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"task\": \"compare\", \"simulation\": {\"T_final\": 5}}").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"growth\": {\"kind\": \"H\", \"function\": {\"family\": \"constant\"}}, "
                                 "\"task\": \"envelope\"}")
                        .validate(),
                    ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/decaylab.json"), ConfigError);
}

TEST_CASE("time grid is geometric")
{
    const TimeGrid g{1.0, 1e4, 5};
    const auto t = g.values();
    REQUIRE(t.size() == 5);
    CHECK(t.front() == 1.0);
    CHECK(t.back() == 1e4);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] / t[i - 1] == doctest::Approx(10.0));
}

TEST_CASE("parallel_map keeps index order and propagates errors")
{
    const auto sq = parallel_map(100, 7, [](int i) { return i * i; });
    for (int i = 0; i < 100; ++i) CHECK(sq[i] == i * i);
    CHECK(parallel_map(0, 4, [](int i) { return i; }).empty());
    CHECK_THROWS_AS(parallel_map(10, 3,
                                 [](int i) {
                                     if (i == 6) throw ConfigError("boom");
                                     return i;
                                 }),
                    ConfigError);
}

TEST_CASE("envelope table: slope and validity flags")
{
    auto cfg = parse_config(example_config());
    cfg.task = Task::envelope;
    cfg.grid = {1.0, 1e6, 61};
    cfg.output_dir = scratch("envelope").string();
    const auto res = run_envelope(cfg);
    CHECK(res.status == 0);
    const auto text = slurp(fs::path(cfg.output_dir) / "envelope.csv");
    CHECK(text.rfind("t,envelope_main,valid_main,envelope_mainbis,valid_mainbis,closed_form,ratio,slope\n", 0) == 0);
    const auto valid = csv_column(text, 2);
    const auto slope = csv_column(text, 7);
    // Below the threshold the row is flagged, not aborted.
    CHECK(valid.front() == "0");
    CHECK(valid.back() == "1");
    // p = 3 and G = 1: slope -2/(p-1) = -1.
    CHECK(std::stod(slope.back()) == doctest::Approx(-1.0).epsilon(0.01));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "envelope.gp"));
    // Identical config, identical bytes.
    auto cfg2 = cfg;
    cfg2.output_dir = scratch("envelope2").string();
    cfg2.threads = 4;
    run_envelope(cfg2);
    CHECK(slurp(fs::path(cfg2.output_dir) / "envelope.csv") == text);
}

TEST_CASE("simulate writes trace and replayable snapshots")
{
    auto cfg = parse_config(example_config());
    cfg.task = Task::simulate;
    cfg.simulation.N = 32;
    cfg.simulation.T_final = 2.0;
    cfg.simulation.stride = 8;
    cfg.output_dir = scratch("simulate").string();
    const auto res = run_simulate(cfg);
    CHECK(res.status == 0);
    CHECK(res.summary["staggered_energy_nonincreasing"].get<bool>());
    const auto snap = read_snapshots((fs::path(cfg.output_dir) / "snapshots.bin").string());
    CHECK(snap.N == 32);
    CHECK(snap.stride == 8);
    CHECK(snap.frames.size() > 2);
    const auto trace = slurp(fs::path(cfg.output_dir) / "trace.csv");
    CHECK(trace.rfind("t,E,D,strong_norm,weak_norm\n", 0) == 0);
}

TEST_CASE("compare: calibrated envelope with cubic damping")
{
    auto cfg = parse_config(example_config());
    cfg.simulation.T_final = 120.0;
    cfg.output_dir = scratch("compare").string();
    const auto res = run_compare(cfg);
    CHECK(res.status == 0);
    CHECK(res.summary["violations"] == 0);
    CHECK(res.summary["calibration_constant"].get<double>() > 0.0);
    const auto text = slurp(fs::path(cfg.output_dir) / "compare.csv");
    CHECK(text.rfind("t,E_sim,envelope,satisfied\n", 0) == 0);
}

TEST_CASE("lemmas bundle: empty data is a flagged vacuous pass")
{
    auto cfg = parse_config(example_config());
    cfg.task = Task::lemmas;
    cfg.lemmas.max_mode = 0;
    cfg.lemmas.random_count = 0;
    cfg.lemmas.seqlab_instances = 0;
    cfg.output_dir = scratch("lemmas_empty").string();
    const auto res = run_lemmas(cfg);
    CHECK(res.status == 0);
    CHECK(res.summary["no_data"].get<bool>());
}

TEST_CASE("lemmas bundle on a small suite with the k_T self-test")
{
    auto cfg = parse_config(example_config());
    cfg.task = Task::lemmas;
    cfg.lemmas.max_mode = 4;
    cfg.lemmas.random_count = 3;
    cfg.lemmas.N = 48;
    cfg.lemmas.seqlab_instances = 5;
    cfg.lemmas.seqlab_steps = 300;
    cfg.lemmas.corrupt_kT = true;
    cfg.output_dir = scratch("lemmas").string();
    const auto res = run_lemmas(cfg);
    CHECK(res.status == 0);
    CHECK(res.summary["check_total"] == 3 * (4 + 3 + 3));
    CHECK(res.summary["self_test"]["k_T_needed_by_data"].get<double>() > 0.0);
}

TEST_CASE("seqlab and observability tasks")
{
    auto cfg = parse_config(example_config());
    cfg.seqlab.instances = 20;
    cfg.seqlab.steps = 400;
    cfg.seqlab.bound_samples = 40;
    cfg.output_dir = scratch("seqlab").string();
    const auto s = run_seqlab(cfg);
    CHECK(s.status == 0);
    CHECK(s.summary["chain_failures"] == 0);

    cfg.observability.max_mode = 6;
    cfg.observability.random_count = 4;
    cfg.observability.fit_mode_hi = 8;
    cfg.output_dir = scratch("observability").string();
    const auto o = run_observability(cfg);
    CHECK(o.status == 0);
    CHECK(o.summary["data"].size() == 6 + 6 + 4);
    CHECK(o.summary["k_T"].get<double>() == doctest::Approx(34.0));
}
