// evtcosim: command-line driver for the EV evacuation co-simulation workflow.
//
// Stages: synth -> link -> predict -> scenario -> simulate -> report, plus
// compare for pairs of finished runs. Each stage reads and writes files under
// the working directory, so stages can be rerun independently.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evtc/cosim.hpp"
#include "evtc/errors.hpp"
#include "evtc/log.hpp"
#include "evtc/scenario.hpp"
#include "evtc/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string working_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> controls; // on | off
    std::optional<double> interval_seconds;
};

evtc::scenario::ScenarioConfig load_scenario_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) throw evtc::ConfigError("--config is required");
    evtc::scenario::ScenarioConfig config = evtc::scenario::load_config(opts.config_path);
    if (!opts.working_dir.empty()) config.working_dir = opts.working_dir;
    if (opts.seed) config.rng_seed = *opts.seed;
    if (opts.jobs) config.jobs = *opts.jobs;
    if (opts.controls) config.controls = *opts.controls != "off";
    if (opts.interval_seconds) config.interval_length = *opts.interval_seconds;
    config.validate();
    return config;
}

void write_sample_configs(const fs::path& working_dir, const std::string& evac_edge,
                          const std::vector<std::string>& taz_ids) {
    using evtc::scenario::ScenarioConfig;
    ScenarioConfig base;
    base.working_dir = working_dir.string();
    base.evac_edge = evac_edge;
    base.tazs_to_evacuate = taz_ids;
    base.year_prediction = 2040;
    base.charging_time = 28800;
    base.rng_seed = 7;

    ScenarioConfig medium = base;
    medium.scenario_name = "medium_2040_2h";
    medium.prediction_level = "medium";
    medium.departure_window = 7200;
    ScenarioConfig high = base;
    high.scenario_name = "high_2040_allatonce";
    high.prediction_level = "high";
    high.departure_window = 0;

    fs::create_directories(working_dir / "configs");
    evtc::scenario::save_config(medium, working_dir / "configs" / "medium_2040_2h.json");
    evtc::scenario::save_config(high, working_dir / "configs" / "high_2040_allatonce.json");
}

int cmd_synth(const std::string& preset, const std::string& params_path,
              const fs::path& working_dir, std::optional<std::uint64_t> seed) {
    evtc::synth::CityParams params;
    if (!params_path.empty())
        params = evtc::synth::params_from_json(evtc::jsonio::load(params_path));
    else if (preset == "small")
        params = evtc::synth::small_preset();
    else if (preset == "large")
        params = evtc::synth::large_preset();
    else
        throw evtc::ConfigError("unknown preset '" + preset + "' (use small|large)");
    if (seed) params.seed = *seed;

    fs::path dataset_dir = working_dir / "dataset";
    evtc::synth::generate_city(params, dataset_dir);

    auto meta = evtc::jsonio::load(evtc::synth::DatasetPaths(dataset_dir).meta());
    std::vector<std::string> taz_ids;
    auto tazs = evtc::linker::load_tazs(evtc::synth::DatasetPaths(dataset_dir).tazs());
    for (const auto& t : tazs) taz_ids.push_back(t.id);
    write_sample_configs(working_dir, meta.at("evac_edge").get<std::string>(), taz_ids);

    std::cout << "dataset written to " << dataset_dir.string() << " (" << meta["taz_count"]
              << " TAZs, evac edge " << meta["evac_edge"] << ")\n";
    return 0;
}

int cmd_compare(const std::string& a_dir, const std::string& b_dir, const std::string& out_path) {
    evtc::cosim::ResultBundle a = evtc::cosim::load_bundle(a_dir);
    evtc::cosim::ResultBundle b = evtc::cosim::load_bundle(b_dir);
    evtc::cosim::ComparisonReport r = evtc::cosim::compare_runs(a, b);
    fs::path out = out_path.empty() ? fs::path(b_dir) / "comparison.csv" : fs::path(out_path);
    evtc::cosim::save_comparison(r, a, b, out);
    std::cout << "evacuation time: " << r.evac_time_a << " s -> " << r.evac_time_b << " s ("
              << evtc::csv::num(r.evac_time_delta_pct, 2) << "%)\n"
              << "mean waiting:    " << r.waiting_a << " s -> " << r.waiting_b << " s ("
              << evtc::csv::num(r.waiting_delta_pct, 2) << "%)\n"
              << "peak overloads:  " << r.peak_overloads_a << " -> " << r.peak_overloads_b << "\n"
              << "total overloads: " << r.total_overloads_a << " -> " << r.total_overloads_b
              << "\n"
              << "total undervoltages: " << r.total_undervoltages_a << " -> "
              << r.total_undervoltages_b << "\n"
              << "per-interval deltas written to " << out.string() << "\n";
    return 0;
}

int run_interactive(const CommonOpts& opts) {
    evtc::scenario::ScenarioConfig config = load_scenario_config(opts);
    std::cout << "scenario: " << config.scenario_name << "\n";
    while (true) {
        std::cout << "\nstages:\n"
                  << "  1) scenario  (vehicles, schedules, routes, charging series)\n"
                  << "  2) simulate  (traffic + time-series power flow)\n"
                  << "  3) report    (summaries, histograms, TAZ overload map)\n"
                  << "  4) all of the above\n"
                  << "  0) quit\n"
                  << "choice> " << std::flush;
        int choice = -1;
        if (!(std::cin >> choice)) return 0;
        try {
            switch (choice) {
                case 0: return 0;
                case 1: evtc::cosim::run_scenario_stage(config); break;
                case 2: evtc::cosim::run_simulate(config); break;
                case 3: evtc::cosim::run_report_stage(config); break;
                case 4: evtc::cosim::run_scenario(config); break;
                default: std::cout << "unknown choice\n"; continue;
            }
            std::cout << "done\n";
        } catch (const evtc::Error& e) {
            std::cout << "error: " << e.what() << "\n";
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EV evacuation co-simulation: synthetic city, traffic and grid workflow"};
    app.require_subcommand(0, 1);

    CommonOpts opts;
    bool interactive = false;
    app.add_flag("--interactive", interactive, "interactive stage picker (needs --config)");
    app.add_option("--config", opts.config_path, "scenario config JSON");

    std::string preset = "small", params_path, working_dir_str;
    std::uint64_t seed_val = 0;
    bool seed_set = false;
    int jobs_val = 0;
    std::string controls_val, a_dir, b_dir, out_path;
    double interval_val = 0;
    long report_interval = -1;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config)
            cmd->add_option("--config", opts.config_path, "scenario config JSON");
        cmd->add_option("--working-dir", working_dir_str, "override working directory");
        cmd->add_option("--seed", seed_val, "override rng seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--jobs", jobs_val, "parallel workers for power intervals");
        cmd->add_option("--controls", controls_val, "on|off: discrete voltage controls")
            ->check(CLI::IsMember({"on", "off"}));
        cmd->add_option("--interval-seconds", interval_val, "power-flow interval length");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic city dataset");
    synth->add_option("--preset", preset, "small|large")->check(CLI::IsMember({"small", "large"}));
    synth->add_option("--params", params_path, "city parameters JSON (overrides --preset)");
    add_common(synth, false);

    CLI::App* link = app.add_subcommand("link", "link parcels to buses, edges and TAZs");
    add_common(link, false);

    CLI::App* predict = app.add_subcommand("predict", "compute per-TAZ EV adoption profiles");
    add_common(predict, false);

    CLI::App* scen = app.add_subcommand("scenario", "materialize vehicles and charging series");
    add_common(scen, true);

    CLI::App* simulate = app.add_subcommand("simulate", "run traffic and time-series power flow");
    add_common(simulate, true);

    CLI::App* report = app.add_subcommand("report", "derive summaries and histograms");
    report->add_option("--interval", report_interval,
                       "interval for the TAZ overload map (default: peak)");
    add_common(report, true);

    CLI::App* compare = app.add_subcommand("compare", "compare two finished runs");
    compare->add_option("--a", a_dir, "first scenario directory")->required();
    compare->add_option("--b", b_dir, "second scenario directory")->required();
    compare->add_option("--out", out_path, "comparison csv path");

    CLI11_PARSE(app, argc, argv);

    if (!working_dir_str.empty()) opts.working_dir = working_dir_str;
    if (seed_set) opts.seed = seed_val;
    if (jobs_val > 0) opts.jobs = jobs_val;
    if (!controls_val.empty()) opts.controls = controls_val;
    if (interval_val > 0) opts.interval_seconds = interval_val;

    try {
        if (interactive) return run_interactive(opts);
        if (synth->parsed()) {
            fs::path wd = opts.working_dir.empty() ? fs::path(".") : fs::path(opts.working_dir);
            return cmd_synth(preset, params_path, wd,
                             seed_set ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
        }
        if (link->parsed()) {
            fs::path wd = opts.working_dir.empty() ? fs::path(".") : fs::path(opts.working_dir);
            auto outcome = evtc::cosim::run_link(wd / "dataset");
            std::cout << "linked " << outcome.parcels << " parcels (" << outcome.unassigned_taz
                      << " outside TAZs, " << outcome.unknown_category
                      << " without category estimate)\n";
            return 0;
        }
        if (predict->parsed()) {
            fs::path wd = opts.working_dir.empty() ? fs::path(".") : fs::path(opts.working_dir);
            evtc::cosim::run_predict(wd / "dataset");
            std::cout << "profiles written\n";
            return 0;
        }
        if (scen->parsed()) {
            auto config = load_scenario_config(opts);
            auto outcome = evtc::cosim::run_scenario_stage(config);
            std::cout << "vehicles " << outcome.vehicles << ", EVs " << outcome.evs
                      << " (grid-connected " << outcome.grid_connected_evs << "), unreachable "
                      << outcome.unreachable << "\n";
            return 0;
        }
        if (simulate->parsed()) {
            auto config = load_scenario_config(opts);
            auto outcome = evtc::cosim::run_simulate(config);
            std::cout << "traffic: " << outcome.traffic_summary.arrived << "/"
                      << outcome.traffic_summary.vehicles << " arrived";
            if (outcome.traffic_summary.complete)
                std::cout << ", evacuation " << outcome.traffic_summary.total_time_to_evacuate
                          << " s";
            std::cout << "\npower: " << outcome.intervals << " intervals, "
                      << outcome.total_overloads << " overloads, "
                      << outcome.total_undervoltages << " undervoltages\n";
            return 0;
        }
        if (report->parsed()) {
            auto config = load_scenario_config(opts);
            evtc::cosim::run_report_stage(config, report_interval);
            std::cout << "report written to "
                      << evtc::cosim::ScenarioPaths(config).dir.string() << "\n";
            return 0;
        }
        if (compare->parsed()) return cmd_compare(a_dir, b_dir, out_path);
        std::cout << app.help();
        return 0;
    } catch (const evtc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const evtc::StageOrderError& e) {
        std::cerr << "stage-order error: " << e.what() << "\n";
        return 4;
    } catch (const evtc::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 5;
    } catch (const evtc::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
