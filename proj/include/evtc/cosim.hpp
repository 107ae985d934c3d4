#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "evtc/adoption.hpp"
#include "evtc/csv.hpp"
#include "evtc/errors.hpp"
#include "evtc/grid.hpp"
#include "evtc/jsonio.hpp"
#include "evtc/linker.hpp"
#include "evtc/log.hpp"
#include "evtc/powerflow.hpp"
#include "evtc/scenario.hpp"
#include "evtc/synth.hpp"
#include "evtc/traffic.hpp"

// Workflow orchestration. Stages communicate through files under
// <working_dir>/<scenario_name>/ so completed stages can be rerun or resumed
// independently; the dataset directory is shared across scenarios.
//
// Stage order: synth -> link -> predict -> scenario -> simulate -> report.

namespace evtc::cosim {

namespace fs = std::filesystem;

struct ScenarioPaths {
    fs::path dir;
    ScenarioPaths(const scenario::ScenarioConfig& c) : dir(fs::path(c.working_dir) / c.scenario_name) {}
    explicit ScenarioPaths(fs::path d) : dir(std::move(d)) {}
    fs::path config() const { return dir / "scenario_config.json"; }
    fs::path vehicles() const { return dir / "vehicles.csv"; }
    fs::path routes() const { return dir / "routes.csv"; }
    fs::path charging_series() const { return dir / "charging_series.csv"; }
    fs::path traffic_vehicles() const { return dir / "traffic_vehicles.csv"; }
    fs::path curves() const { return dir / "curves.csv"; }
    fs::path violations() const { return dir / "violations.csv"; }
    fs::path controls_log() const { return dir / "controls_log.csv"; }
    fs::path run_report() const { return dir / "run_report.json"; }
    fs::path traffic_summary() const { return dir / "traffic_summary.json"; }
    fs::path severity_histogram() const { return dir / "severity_histogram.csv"; }
    fs::path taz_overloads() const { return dir / "taz_overloads.csv"; }
};

inline void require_file(const fs::path& path, const std::string& producing_stage) {
    if (!fs::exists(path))
        throw StageOrderError("missing " + path.string() + "; run the '" + producing_stage +
                              "' stage first");
}

// ---------------------------------------------------------------------------
// Stage: link

struct LinkOutcome {
    long parcels = 0;
    long unassigned_taz = 0;
    long unknown_category = 0;
};

inline LinkOutcome run_link(const fs::path& dataset_dir) {
    synth::DatasetPaths paths(dataset_dir);
    require_file(paths.grid(), "synth");
    require_file(paths.roads(), "synth");
    require_file(paths.tazs(), "synth");
    require_file(paths.parcels(), "synth");
    require_file(paths.vehicle_estimates(), "synth");

    grid::DistributionNetwork net = grid::load_network(paths.grid());
    traffic::RoadNetwork roads = traffic::load_roads(paths.roads());
    std::vector<linker::Taz> tazs = linker::load_tazs(paths.tazs());
    std::vector<linker::Parcel> parcels = linker::load_parcels(paths.parcels());
    linker::EstimateTable estimates = linker::EstimateTable::load(paths.vehicle_estimates());
    linker::EstimateTable manual;
    if (fs::exists(paths.manual_counts()))
        manual = linker::EstimateTable::load(paths.manual_counts());

    linker::LinkReport report;
    std::vector<linker::Parcel> linked =
        linker::link_parcels(std::move(parcels), net, roads, tazs, estimates, manual, 1.0, &report);
    linker::save_linked_parcels(linked, paths.linked_parcels());
    if (report.unassigned_taz > 0)
        log::warn(std::to_string(report.unassigned_taz) + " parcels outside every TAZ");
    return {report.parcels, report.unassigned_taz, report.unknown_category};
}

// ---------------------------------------------------------------------------
// Stage: predict

inline void run_predict(const fs::path& dataset_dir, int start_year = 2020,
                        int end_year = 2050) {
    synth::DatasetPaths paths(dataset_dir);
    require_file(paths.tracts(), "synth");
    require_file(paths.age_by_income(), "synth");
    require_file(paths.ev_share_history(), "synth");
    require_file(paths.fleet_projection(), "synth");
    require_file(paths.market(), "synth");
    require_file(paths.adoption_curves(), "synth");

    std::vector<adoption::CensusTract> tracts =
        adoption::load_tracts(paths.tracts(), paths.age_by_income());
    adoption::MarketHistory history = adoption::load_market_history(
        paths.ev_share_history(), paths.fleet_projection(), paths.market());
    std::map<std::string, adoption::AdoptionCurve> curves =
        adoption::load_curves(paths.adoption_curves());

    adoption::save_profiles(
        adoption::base_case_fractions(tracts, history, start_year, end_year),
        paths.profiles("base"));
    for (const std::string& level : {"medium", "high"}) {
        auto it = curves.find(level);
        if (it == curves.end()) throw DataError("adoption curves missing case '" + level + "'");
        std::vector<adoption::TazEvProfile> profiles;
        for (int year = start_year; year <= end_year; ++year) {
            if (!it->second.penetration_by_year.count(year)) continue;
            auto year_rows = adoption::curve_case_fractions(tracts, it->second, history, year);
            profiles.insert(profiles.end(), year_rows.begin(), year_rows.end());
        }
        adoption::save_profiles(profiles, paths.profiles(level));
    }
}

// ---------------------------------------------------------------------------
// Stage: scenario (vehicles, schedules, routes, charging series)

inline void save_routes(const std::vector<scenario::SimVehicle>& vehicles,
                        const std::map<std::string, std::vector<std::string>>& routes,
                        const fs::path& path) {
    csv::Writer w(path);
    w.row({"vehicle_id", "route"});
    for (const scenario::SimVehicle& v : vehicles) {
        auto it = routes.find(v.vehicle_id);
        if (it == routes.end()) continue; // unreachable origin, counted in run report
        std::string joined;
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            if (i) joined += ';';
            joined += it->second[i];
        }
        w.row({v.vehicle_id, joined});
    }
    w.close();
}

inline std::map<std::string, std::vector<std::string>> load_routes(const fs::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t vc = t.col("vehicle_id"), rc = t.col("route");
    std::map<std::string, std::vector<std::string>> out;
    for (std::size_t r = 0; r < t.size(); ++r)
        out[t.at(r, vc)] = csv::Table::split(t.at(r, rc), ';');
    return out;
}

struct ScenarioStageOutcome {
    long vehicles = 0;
    long evs = 0;
    long grid_connected_evs = 0;
    long unreachable = 0;
    double charging_clock_offset_s = 0;
};

inline ScenarioStageOutcome run_scenario_stage(const scenario::ScenarioConfig& config) {
    config.validate();
    synth::DatasetPaths dataset(config.resolved_dataset_dir());
    require_file(dataset.linked_parcels(), "link");
    require_file(dataset.roads(), "synth");
    require_file(dataset.grid(), "synth");

    std::vector<linker::Parcel> parcels = linker::load_linked_parcels(dataset.linked_parcels());
    traffic::RoadNetwork roads = traffic::load_roads(dataset.roads());
    grid::DistributionNetwork net = grid::load_network(dataset.grid());

    std::vector<adoption::TazEvProfile> profiles;
    if (config.ev_penetration_rate < 0) {
        // The extreme case extends the high-case draw.
        std::string level =
            config.prediction_level == "extreme" ? "high" : config.prediction_level;
        require_file(dataset.profiles(level), "predict");
        profiles = adoption::load_profiles(dataset.profiles(level));
    }

    std::map<std::string, geometry::Point> bus_xy;
    for (const grid::Bus& b : net.buses) bus_xy[b.id] = {b.x, b.y};

    std::vector<scenario::SimVehicle> vehicles =
        scenario::generate_vehicles(config, parcels, profiles, bus_xy);
    scenario::assign_schedules(vehicles, config);

    // Route every vehicle to the evacuation edge; one reverse search serves
    // all origins. Unreachable vehicles are dropped and counted.
    traffic::DestTable table = traffic::build_dest_table(roads, config.evac_edge);
    std::map<std::string, std::vector<std::string>> routes;
    long unreachable = 0;
    std::vector<scenario::SimVehicle> kept;
    for (const scenario::SimVehicle& v : vehicles) {
        try {
            routes[v.vehicle_id] = traffic::route_via(roads, table, v.origin_edge);
            kept.push_back(v);
        } catch (const UnreachableError&) {
            ++unreachable;
        }
    }

    scenario::ChargingSeries series = scenario::build_charging_series(kept, config);

    ScenarioPaths out(config);
    fs::create_directories(out.dir);
    scenario::save_config(config, out.config());
    scenario::save_vehicles(kept, out.vehicles());
    save_routes(kept, routes, out.routes());
    scenario::save_charging_series(series, out.charging_series());

    ScenarioStageOutcome outcome;
    outcome.vehicles = static_cast<long>(kept.size());
    for (const scenario::SimVehicle& v : kept) {
        if (v.is_electric) {
            ++outcome.evs;
            if (v.grid_connected) ++outcome.grid_connected_evs;
        }
    }
    outcome.unreachable = unreachable;
    outcome.charging_clock_offset_s = series.clock_offset_s;

    jsonio::json stage;
    stage["vehicles"] = outcome.vehicles;
    stage["evs"] = outcome.evs;
    stage["grid_connected_evs"] = outcome.grid_connected_evs;
    stage["unreachable_vehicles"] = outcome.unreachable;
    stage["charging_clock_offset_s"] = outcome.charging_clock_offset_s;
    jsonio::save(out.dir / "scenario_stage.json", stage);
    return outcome;
}

// ---------------------------------------------------------------------------
// Stage: simulate (traffic + per-interval power flow)

struct IntervalResult {
    powerflow::ViolationReport violations;
    bool converged = true;
    bool round_cap_hit = false;
    powerflow::ControlLog control_log; // device actions with interval context
};

namespace detail {

inline IntervalResult solve_interval(const grid::DistributionNetwork& net,
                                     const std::map<std::string, double>& charging,
                                     bool controls, double v_threshold, long interval) {
    IntervalResult out;
    grid::DistributionNetwork loaded = grid::apply_charging_loads(net, charging);
    std::vector<grid::FeederTree> feeders = grid::feeder_partition(loaded);
    powerflow::ViolationReport merged;
    merged.interval_index = static_cast<int>(interval);
    for (grid::FeederTree& f : feeders) {
        powerflow::PowerFlowSolution sol;
        if (controls) {
            powerflow::ControlOutcome ctrl =
                powerflow::run_discrete_controls(std::move(f), loaded.source_voltage_pu);
            sol = std::move(ctrl.solution);
            out.round_cap_hit = out.round_cap_hit || ctrl.round_cap_hit;
            for (const powerflow::ControlAction& a : ctrl.log) out.control_log.push_back(a);
            f = std::move(ctrl.feeder);
        } else {
            sol = powerflow::solve_feeder(f, loaded.source_voltage_pu);
        }
        if (!sol.converged) {
            out.converged = false;
            continue;
        }
        powerflow::ViolationReport vr = powerflow::detect_violations(sol, loaded, v_threshold);
        merged.overloads.insert(merged.overloads.end(), vr.overloads.begin(), vr.overloads.end());
        merged.undervoltages.insert(merged.undervoltages.end(), vr.undervoltages.begin(),
                                    vr.undervoltages.end());
    }
    std::sort(merged.overloads.begin(), merged.overloads.end(),
              [](const auto& a, const auto& b) { return a.branch_id < b.branch_id; });
    std::sort(merged.undervoltages.begin(), merged.undervoltages.end(), [](const auto& a, const auto& b) {
        if (a.bus_id != b.bus_id) return a.bus_id < b.bus_id;
        return a.phase < b.phase;
    });
    out.violations = std::move(merged);
    return out;
}

} // namespace detail

struct SimulateOutcome {
    traffic::MetricsSummary traffic_summary;
    long intervals = 0;
    std::vector<long> unconverged_intervals;
    long total_overloads = 0;
    long total_undervoltages = 0;
};

inline SimulateOutcome run_simulate(const scenario::ScenarioConfig& config) {
    config.validate();
    synth::DatasetPaths dataset(config.resolved_dataset_dir());
    ScenarioPaths paths(config);
    require_file(paths.vehicles(), "scenario");
    require_file(paths.routes(), "scenario");
    require_file(paths.charging_series(), "scenario");
    require_file(dataset.roads(), "synth");
    require_file(dataset.grid(), "synth");

    traffic::RoadNetwork roads = traffic::load_roads(dataset.roads());
    grid::DistributionNetwork net = grid::load_network(dataset.grid());
    std::vector<scenario::SimVehicle> vehicles = scenario::load_vehicles(paths.vehicles());
    std::map<std::string, std::vector<std::string>> routes = load_routes(paths.routes());

    // Traffic.
    std::vector<traffic::VehicleTrip> trips;
    trips.reserve(vehicles.size());
    for (const scenario::SimVehicle& v : vehicles) {
        traffic::VehicleTrip trip;
        trip.vehicle_id = v.vehicle_id;
        trip.origin_edge = v.origin_edge;
        trip.dest_edge = config.evac_edge;
        trip.scheduled_departure = v.scheduled_departure;
        trip.route = routes.at(v.vehicle_id);
        trip.is_electric = v.is_electric;
        trips.push_back(std::move(trip));
    }
    traffic::SimOptions sim_opts;
    sim_opts.dt = config.dt;
    sim_opts.max_sim_time = config.max_sim_time;
    traffic::TrafficResult traffic_result = traffic::simulate_traffic(roads, trips, sim_opts);
    traffic::save_vehicle_records(traffic_result, paths.traffic_vehicles());
    traffic::save_curve(traffic_result, paths.curves());

    // Power: one snapshot per interval of the charging series, each settled
    // independently so intervals can run in parallel deterministically.
    scenario::ChargingSeries series = scenario::load_charging_series(
        paths.charging_series(), config.load_per_charging_ev, config.interval_length, 0);
    const long n_intervals = series.interval_count();
    std::vector<IntervalResult> results(n_intervals);
    {
        int jobs = std::max(1, config.jobs);
        std::atomic<long> next{0};
        auto worker = [&]() {
            while (true) {
                long k = next.fetch_add(1);
                if (k >= n_intervals) break;
                results[k] = detail::solve_interval(net, series.kw_at(k), config.controls,
                                                    config.undervoltage_threshold_pu, k);
            }
        };
        if (jobs == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
    }

    // Violations CSV: one row per violation, undervoltages carry v_pu in the
    // severity column and an empty bucket.
    SimulateOutcome outcome;
    {
        csv::Writer w(paths.violations());
        w.row({"interval", "component_id", "kind", "phase", "severity_or_vpu", "bucket"});
        for (long k = 0; k < n_intervals; ++k) {
            const IntervalResult& r = results[k];
            if (!r.converged) {
                outcome.unconverged_intervals.push_back(k);
                continue; // excluded from violation counts
            }
            for (const powerflow::Overload& o : r.violations.overloads) {
                w.row({csv::num(k), o.branch_id, "overload",
                       std::string(1, phase_letter(o.phase)), csv::num(o.severity, 6),
                       powerflow::bucket_label(o.bucket)});
                ++outcome.total_overloads;
            }
            for (const powerflow::Undervoltage& u : r.violations.undervoltages) {
                w.row({csv::num(k), u.bus_id, "undervoltage",
                       std::string(1, phase_letter(u.phase)), csv::num(u.v_pu, 6),
                       std::string{}});
                ++outcome.total_undervoltages;
            }
        }
        w.close();
    }
    {
        csv::Writer w(paths.controls_log());
        w.row({"interval", "device_id", "round", "action", "measured_v_pu", "tap_pos"});
        for (long k = 0; k < n_intervals; ++k)
            for (const powerflow::ControlAction& a : results[k].control_log)
                w.row({csv::num(k), a.device_id, csv::num(a.round), a.action,
                       csv::num(a.measured_v_pu, 6), csv::num(a.tap_pos)});
        w.close();
    }

    outcome.traffic_summary = traffic::traffic_metrics(traffic_result);
    outcome.intervals = n_intervals;

    // Run report.
    jsonio::json report;
    jsonio::json stage_info;
    if (fs::exists(paths.dir / "scenario_stage.json"))
        stage_info = jsonio::load(paths.dir / "scenario_stage.json");
    report["scenario_name"] = config.scenario_name;
    report["rng_seed"] = config.rng_seed;
    report["controls"] = config.controls ? "on" : "off";
    report["intervals"] = n_intervals;
    report["interval_length_s"] = config.interval_length;
    report["charging_clock_offset_s"] = stage_info.value("charging_clock_offset_s", 0.0);
    report["unconverged_intervals"] = outcome.unconverged_intervals;
    report["unreachable_vehicles"] = stage_info.value("unreachable_vehicles", 0L);
    report["vehicles"] = stage_info.value("vehicles", 0L);
    report["evs"] = stage_info.value("evs", 0L);
    report["grid_connected_evs"] = stage_info.value("grid_connected_evs", 0L);
    report["total_overloads"] = outcome.total_overloads;
    report["total_undervoltages"] = outcome.total_undervoltages;
    bool cap_hit = false;
    for (const IntervalResult& r : results) cap_hit = cap_hit || r.round_cap_hit;
    jsonio::json warnings = jsonio::json::array();
    if (cap_hit) warnings.push_back("control round cap hit in at least one interval");
    if (!outcome.unconverged_intervals.empty())
        warnings.push_back("unconverged intervals excluded from violation counts");
    if (traffic_result.hit_max_sim_time)
        warnings.push_back("traffic simulation stopped at max_sim_time before all arrivals");
    report["warnings"] = warnings;
    report["traffic"] = {
        {"vehicles", outcome.traffic_summary.vehicles},
        {"arrived", outcome.traffic_summary.arrived},
        {"unarrived", outcome.traffic_summary.unarrived},
        {"complete", outcome.traffic_summary.complete},
    };
    jsonio::save(paths.run_report(), report);
    return outcome;
}

// ---------------------------------------------------------------------------
// Stage: report (summaries derived from raw outputs)

inline jsonio::json summary_to_json(const traffic::MetricsSummary& s) {
    jsonio::json j;
    j["vehicles"] = s.vehicles;
    j["arrived"] = s.arrived;
    j["unarrived"] = s.unarrived;
    j["complete"] = s.complete;
    j["total_time_to_evacuate_s"] = s.total_time_to_evacuate;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("avg_speed_mps", s.avg_speed);
    put("avg_duration_s", s.avg_duration);
    put("avg_waiting_time_s", s.avg_waiting_time);
    put("avg_time_loss_s", s.avg_time_loss);
    put("avg_departure_delay_s", s.avg_departure_delay);
    return j;
}

// Violation rows loaded back from disk; the in-memory face of violations.csv.
struct ViolationRow {
    long interval;
    std::string component_id;
    std::string kind; // overload | undervoltage
    std::string phase;
    double severity_or_vpu;
    std::string bucket;
};

inline std::vector<ViolationRow> load_violations(const fs::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t ic = t.col("interval"), cc = t.col("component_id"), kc = t.col("kind");
    std::size_t pc = t.col("phase"), sc = t.col("severity_or_vpu"), bc = t.col("bucket");
    std::vector<ViolationRow> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r)
        out.push_back({t.int_at(r, ic), t.at(r, cc), t.at(r, kc), t.at(r, pc), t.num_at(r, sc),
                       t.at(r, bc)});
    return out;
}

// Per-TAZ overload counts for one interval: overloaded branch -> downstream
// bus -> nearest parcel -> that parcel's TAZ. Components with no assignable
// TAZ count under the sentinel key.
inline std::map<std::string, long> taz_overload_map(const std::vector<ViolationRow>& rows,
                                                    const grid::DistributionNetwork& net,
                                                    const std::vector<linker::Parcel>& parcels,
                                                    long interval) {
    long max_interval = -1;
    for (const ViolationRow& r : rows) max_interval = std::max(max_interval, r.interval);
    if (interval < 0 || interval > max_interval)
        throw ConfigError("taz_overload_map: unknown interval " + std::to_string(interval));

    std::map<std::string, const grid::Branch*> branch_by_id;
    for (const grid::Branch& br : net.branches) branch_by_id[br.id] = &br;
    std::map<std::string, geometry::Point> bus_xy;
    for (const grid::Bus& b : net.buses) bus_xy[b.id] = {b.x, b.y};

    std::map<std::string, std::string> taz_of_bus; // memo
    auto taz_for_bus = [&](const std::string& bus_id) -> std::string {
        auto memo = taz_of_bus.find(bus_id);
        if (memo != taz_of_bus.end()) return memo->second;
        geometry::Point p = bus_xy.at(bus_id);
        double best = std::numeric_limits<double>::infinity();
        const linker::Parcel* pick = nullptr;
        for (const linker::Parcel& parcel : parcels) {
            double d = geometry::dist2(p, {parcel.x, parcel.y});
            if (d < best || (d == best && pick && parcel.id < pick->id)) {
                best = d;
                pick = &parcel;
            }
        }
        std::string taz = (pick && pick->taz_assigned) ? pick->taz_id : "(none)";
        taz_of_bus[bus_id] = taz;
        return taz;
    };

    std::map<std::string, long> counts;
    for (const ViolationRow& r : rows) {
        if (r.interval != interval || r.kind != "overload") continue;
        auto br = branch_by_id.find(r.component_id);
        if (br == branch_by_id.end()) {
            counts["(none)"] += 1;
            continue;
        }
        counts[taz_for_bus(br->second->to_bus)] += 1;
    }
    return counts;
}

inline void run_report_stage(const scenario::ScenarioConfig& config, long interval = -1) {
    config.validate();
    ScenarioPaths paths(config);
    require_file(paths.traffic_vehicles(), "simulate");
    require_file(paths.violations(), "simulate");
    synth::DatasetPaths dataset(config.resolved_dataset_dir());
    require_file(dataset.linked_parcels(), "link");
    require_file(dataset.grid(), "synth");

    // Rebuild the metrics summary from the per-vehicle records.
    csv::Table t = csv::Table::read(paths.traffic_vehicles());
    traffic::TrafficResult result;
    std::size_t sc = t.col("scheduled_departure"), ac = t.col("arrival_time");
    std::size_t arr = t.col("arrived");
    double earliest = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.size(); ++r) {
        traffic::VehicleRecord rec;
        rec.vehicle_id = t.at(r, t.col("vehicle_id"));
        rec.scheduled_departure = t.num_at(r, sc);
        rec.arrived = t.at(r, arr) == "1";
        rec.departure_delay = t.num_at(r, t.col("departure_delay"));
        rec.waiting_time = t.num_at(r, t.col("waiting_time"));
        rec.route_length = t.num_at(r, t.col("route_length"));
        if (rec.arrived) {
            rec.arrival_time = t.num_at(r, ac);
            rec.duration = t.num_at(r, t.col("duration"));
            rec.time_loss = t.num_at(r, t.col("time_loss"));
            result.arrived += 1;
            result.last_arrival_time = std::max(result.last_arrival_time, rec.arrival_time);
        }
        earliest = std::min(earliest, rec.scheduled_departure);
        result.vehicles.push_back(std::move(rec));
    }
    result.earliest_scheduled = result.vehicles.empty() ? 0 : earliest;
    result.inserted = static_cast<long>(result.vehicles.size());

    if (!result.vehicles.empty())
        jsonio::save(paths.traffic_summary(), summary_to_json(traffic::traffic_metrics(result)));
    else {
        jsonio::json j;
        j["vehicles"] = 0;
        jsonio::save(paths.traffic_summary(), j);
    }

    std::vector<ViolationRow> rows = load_violations(paths.violations());

    // Severity histogram per interval per bucket.
    std::map<std::pair<long, std::string>, long> hist;
    long peak_interval = 0;
    std::map<long, long> overloads_per_interval;
    for (const ViolationRow& r : rows) {
        if (r.kind != "overload") continue;
        hist[{r.interval, r.bucket}] += 1;
        overloads_per_interval[r.interval] += 1;
    }
    for (const auto& [k, count] : overloads_per_interval)
        if (count > overloads_per_interval[peak_interval]) peak_interval = k;
    {
        csv::Writer w(paths.severity_histogram());
        w.row({"interval", "bucket", "count"});
        for (const auto& [key, count] : hist)
            w.row({csv::num(key.first), key.second, csv::num(count)});
        w.close();
    }

    // TAZ overload map for the requested interval (default: peak interval).
    grid::DistributionNetwork net = grid::load_network(dataset.grid());
    std::vector<linker::Parcel> parcels = linker::load_linked_parcels(dataset.linked_parcels());
    long chosen = interval >= 0 ? interval : peak_interval;
    std::map<std::string, long> taz_counts;
    if (!rows.empty()) taz_counts = taz_overload_map(rows, net, parcels, chosen);
    {
        csv::Writer w(paths.taz_overloads());
        w.row({"interval", "taz_id", "count"});
        for (const auto& [taz, count] : taz_counts)
            w.row({csv::num(chosen), taz, csv::num(count)});
        w.close();
    }
}

// ---------------------------------------------------------------------------
// Whole-run driver and result bundle

struct ResultBundle {
    std::string scenario_name;
    double interval_length = 900;
    long intervals = 0;
    std::vector<long> overloads_per_interval;     // index = interval
    std::vector<long> undervoltages_per_interval;
    std::map<std::pair<long, std::string>, long> bucket_counts;
    jsonio::json traffic_summary;
    jsonio::json run_report;
    std::vector<ViolationRow> violations;
};

inline ResultBundle load_bundle(const fs::path& scenario_dir) {
    ScenarioPaths paths{scenario_dir};
    require_file(paths.run_report(), "simulate");
    require_file(paths.violations(), "simulate");
    require_file(paths.traffic_summary(), "report");

    ResultBundle b;
    b.run_report = jsonio::load(paths.run_report());
    b.traffic_summary = jsonio::load(paths.traffic_summary());
    b.scenario_name = b.run_report.value("scenario_name", std::string{});
    b.interval_length = b.run_report.value("interval_length_s", 900.0);
    b.intervals = b.run_report.value("intervals", 0L);
    b.violations = load_violations(paths.violations());
    b.overloads_per_interval.assign(std::max<long>(b.intervals, 1), 0);
    b.undervoltages_per_interval.assign(std::max<long>(b.intervals, 1), 0);
    for (const ViolationRow& r : b.violations) {
        if (r.interval >= static_cast<long>(b.overloads_per_interval.size())) {
            b.overloads_per_interval.resize(r.interval + 1, 0);
            b.undervoltages_per_interval.resize(r.interval + 1, 0);
        }
        if (r.kind == "overload") {
            b.overloads_per_interval[r.interval] += 1;
            b.bucket_counts[{r.interval, r.bucket}] += 1;
        } else {
            b.undervoltages_per_interval[r.interval] += 1;
        }
    }
    return b;
}

inline ResultBundle run_scenario(const scenario::ScenarioConfig& config) {
    run_scenario_stage(config);
    run_simulate(config);
    run_report_stage(config);
    return load_bundle(ScenarioPaths(config).dir);
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonReport {
    double evac_time_a = 0, evac_time_b = 0;
    double evac_time_delta = 0, evac_time_delta_pct = 0;
    double waiting_a = 0, waiting_b = 0, waiting_delta_pct = 0;
    long peak_overloads_a = 0, peak_overloads_b = 0;
    long total_overloads_a = 0, total_overloads_b = 0;
    long total_undervoltages_a = 0, total_undervoltages_b = 0;
    // Per-interval deltas (b - a), padded to the longer horizon.
    std::vector<long> overload_delta;
    std::vector<long> undervoltage_delta;
    std::map<std::string, long> bucket_total_delta;
};

// Bundles must share the interval length; a shorter horizon is padded with
// empty intervals (no charging -> base case, which is violation-free by
// construction).
inline ComparisonReport compare_runs(const ResultBundle& a, const ResultBundle& b) {
    if (a.interval_length != b.interval_length)
        throw ConfigError("compare_runs: mismatched horizons (interval lengths differ)");
    ComparisonReport r;
    auto evac = [](const ResultBundle& x) {
        return x.traffic_summary.value("total_time_to_evacuate_s", 0.0);
    };
    auto waiting = [](const ResultBundle& x) {
        return x.traffic_summary.contains("avg_waiting_time_s") &&
                       !x.traffic_summary["avg_waiting_time_s"].is_null()
                   ? x.traffic_summary["avg_waiting_time_s"].get<double>()
                   : 0.0;
    };
    r.evac_time_a = evac(a);
    r.evac_time_b = evac(b);
    r.evac_time_delta = r.evac_time_b - r.evac_time_a;
    r.evac_time_delta_pct = r.evac_time_a != 0 ? 100.0 * r.evac_time_delta / r.evac_time_a : 0;
    r.waiting_a = waiting(a);
    r.waiting_b = waiting(b);
    r.waiting_delta_pct = r.waiting_a != 0 ? 100.0 * (r.waiting_b - r.waiting_a) / r.waiting_a : 0;

    std::size_t horizon =
        std::max(a.overloads_per_interval.size(), b.overloads_per_interval.size());
    auto at = [](const std::vector<long>& v, std::size_t i) {
        return i < v.size() ? v[i] : 0L;
    };
    for (std::size_t i = 0; i < horizon; ++i) {
        long oa = at(a.overloads_per_interval, i), ob = at(b.overloads_per_interval, i);
        long ua = at(a.undervoltages_per_interval, i), ub = at(b.undervoltages_per_interval, i);
        r.overload_delta.push_back(ob - oa);
        r.undervoltage_delta.push_back(ub - ua);
        r.peak_overloads_a = std::max(r.peak_overloads_a, oa);
        r.peak_overloads_b = std::max(r.peak_overloads_b, ob);
        r.total_overloads_a += oa;
        r.total_overloads_b += ob;
        r.total_undervoltages_a += ua;
        r.total_undervoltages_b += ub;
    }
    for (const auto& [key, count] : a.bucket_counts) r.bucket_total_delta[key.second] -= count;
    for (const auto& [key, count] : b.bucket_counts) r.bucket_total_delta[key.second] += count;
    return r;
}

inline void save_comparison(const ComparisonReport& r, const ResultBundle& a,
                            const ResultBundle& b, const fs::path& path) {
    csv::Writer w(path);
    w.row({"interval", "overloads_a", "overloads_b", "overload_delta", "undervoltages_a",
           "undervoltages_b", "undervoltage_delta"});
    auto at = [](const std::vector<long>& v, std::size_t i) { return i < v.size() ? v[i] : 0L; };
    for (std::size_t i = 0; i < r.overload_delta.size(); ++i)
        w.row({csv::num(i), csv::num(at(a.overloads_per_interval, i)),
               csv::num(at(b.overloads_per_interval, i)), csv::num(r.overload_delta[i]),
               csv::num(at(a.undervoltages_per_interval, i)),
               csv::num(at(b.undervoltages_per_interval, i)), csv::num(r.undervoltage_delta[i])});
    w.close();
}

} // namespace evtc::cosim
