#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evtc/adoption.hpp"
#include "evtc/csv.hpp"
#include "evtc/errors.hpp"
#include "evtc/geometry.hpp"
#include "evtc/jsonio.hpp"
#include "evtc/linker.hpp"
#include "evtc/rng.hpp"

// Materializes a scenario: concrete vehicles with electric flags, departure
// times, charging windows, and the per-interval charging load series.

namespace evtc::scenario {

struct ScenarioConfig {
    std::string scenario_name;
    std::string working_dir;
    double ev_penetration_rate = -1; // fixed rate in [0,1], or -1 to use predictions
    int year_prediction = 0;
    std::string prediction_level; // base | medium | high | extreme
    double load_per_charging_ev = 7.2; // kW
    double charging_time = 28800;      // seconds before departure
    double departure_window = 0;       // seconds; 0 = all at once
    std::vector<std::string> tazs_to_evacuate;
    std::string evac_edge;
    std::uint64_t rng_seed = 1;
    double interval_length = 900; // seconds per power-flow interval

    // Engine knobs beyond the core parameter table.
    bool controls = true;
    double undervoltage_threshold_pu = 0.95;
    double grid_coverage_radius_m = 3000;
    double extreme_target_rate = 0.8;
    double dt = 1.0;
    double max_sim_time = 172800;
    int jobs = 1;
    std::string dataset_dir; // defaults to <working_dir>/dataset

    std::string resolved_dataset_dir() const {
        return dataset_dir.empty() ? working_dir + "/dataset" : dataset_dir;
    }

    void validate() const {
        if (scenario_name.empty()) throw ConfigError("scenario_name must be set");
        if (working_dir.empty()) throw ConfigError("working_dir must be set");
        bool fixed = ev_penetration_rate >= 0;
        if (fixed && ev_penetration_rate > 1.0)
            throw ConfigError("ev_penetration_rate must be in [0,1] or -1");
        if (!fixed && ev_penetration_rate != -1.0)
            throw ConfigError("ev_penetration_rate sentinel must be exactly -1");
        if (fixed && !prediction_level.empty())
            throw ConfigError("set either ev_penetration_rate or prediction_level, not both");
        if (!fixed) {
            if (prediction_level != "base" && prediction_level != "medium" &&
                prediction_level != "high" && prediction_level != "extreme")
                throw ConfigError("prediction_level must be base|medium|high|extreme");
            if (year_prediction <= 0)
                throw ConfigError("year_prediction required with prediction_level");
        }
        if (load_per_charging_ev <= 0) throw ConfigError("load_per_charging_ev must be > 0");
        if (charging_time < 0 || departure_window < 0)
            throw ConfigError("charging_time and departure_window must be >= 0");
        if (interval_length <= 0) throw ConfigError("interval_length must be > 0");
        if (evac_edge.empty()) throw ConfigError("evac_edge must be set");
        if (extreme_target_rate < 0 || extreme_target_rate > 1)
            throw ConfigError("extreme_target_rate must be in [0,1]");
    }
};

struct SimVehicle {
    std::string vehicle_id;
    std::string parcel_id;
    std::string taz_id;
    std::string bus_id;
    std::string origin_edge;
    bool is_electric = false;
    bool grid_connected = true; // parcel within coverage radius of its bus
    double scheduled_departure = 0;
    double charge_start = 0; // scheduled_departure - charging_time (may be negative)
    double charge_end = 0;   // = scheduled_departure
};

// ---------------------------------------------------------------------------
// Vehicle generation

// One vehicle per unit of the parcel's estimate. The electric draw uses a
// single uniform keyed by vehicle id compared against the TAZ fraction, so the
// EV set at a lower fraction is a subset of the set at any higher fraction
// under the same seed. For the extreme level, pass the high-case profiles;
// extra vehicles are flipped at random up to extreme_target_rate.
inline std::vector<SimVehicle> generate_vehicles(
    const ScenarioConfig& config, const std::vector<linker::Parcel>& parcels,
    const std::vector<adoption::TazEvProfile>& profiles,
    const std::map<std::string, geometry::Point>& bus_xy) {
    config.validate();
    std::set<std::string> evacuate(config.tazs_to_evacuate.begin(),
                                   config.tazs_to_evacuate.end());

    bool fixed = config.ev_penetration_rate >= 0;
    std::map<std::string, double> fraction_by_taz;
    if (!fixed) {
        for (const adoption::TazEvProfile& p : profiles)
            if (p.year == config.year_prediction) fraction_by_taz[p.taz_id] = p.ev_fraction;
        for (const std::string& taz : evacuate)
            if (!fraction_by_taz.count(taz))
                throw DataError("no EV profile for evacuated TAZ " + taz + " in year " +
                                std::to_string(config.year_prediction));
    }

    std::vector<const linker::Parcel*> selected;
    for (const linker::Parcel& p : parcels)
        if (p.taz_assigned && evacuate.count(p.taz_id)) selected.push_back(&p);
    std::sort(selected.begin(), selected.end(),
              [](const linker::Parcel* a, const linker::Parcel* b) { return a->id < b->id; });

    std::vector<SimVehicle> out;
    for (const linker::Parcel* p : selected) {
        double fraction = fixed ? config.ev_penetration_rate : fraction_by_taz.at(p->taz_id);
        bool connected = true;
        auto it = bus_xy.find(p->bus_id);
        if (it != bus_xy.end()) {
            double d = geometry::dist({p->x, p->y}, it->second);
            connected = d <= config.grid_coverage_radius_m;
        }
        for (int k = 0; k < p->vehicle_count; ++k) {
            SimVehicle v;
            v.vehicle_id = p->id + "_v" + std::to_string(k);
            v.parcel_id = p->id;
            v.taz_id = p->taz_id;
            v.bus_id = p->bus_id;
            v.origin_edge = p->edge_id;
            v.grid_connected = connected;
            double u = rng::keyed_uniform(config.rng_seed, "ev", v.vehicle_id);
            v.is_electric = u < fraction;
            out.push_back(std::move(v));
        }
    }

    if (!fixed && config.prediction_level == "extreme") {
        std::vector<std::pair<std::string, bool>> fleet;
        fleet.reserve(out.size());
        for (const SimVehicle& v : out) fleet.push_back({v.vehicle_id, v.is_electric});
        adoption::extend_to_extreme(fleet, config.extreme_target_rate, config.rng_seed);
        std::map<std::string, bool> flag;
        for (const auto& [id, ev] : fleet) flag[id] = ev;
        for (SimVehicle& v : out) v.is_electric = flag.at(v.vehicle_id);
    }
    return out;
}

// Departure uniform on [0, departure_window]; charging occupies
// [departure - charging_time, departure). Negative charge starts are kept as
// recorded; the series shifts its own clock (see build_charging_series).
inline void assign_schedules(std::vector<SimVehicle>& vehicles, const ScenarioConfig& config) {
    for (SimVehicle& v : vehicles) {
        double u = rng::keyed_uniform(config.rng_seed, "depart", v.vehicle_id);
        v.scheduled_departure = config.departure_window * u;
        v.charge_end = v.scheduled_departure;
        v.charge_start = v.scheduled_departure - config.charging_time;
        if (!v.is_electric) {
            v.charge_start = 0;
            v.charge_end = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Charging series

// Integer EV counts per (interval, bus); kW values are count x rate so the
// multiples-of-rate invariant holds exactly. Interval 0 starts at the series
// clock origin, which is shifted so the earliest charge_start maps to t = 0
// when any window begins before the evacuation clock.
struct ChargingSeries {
    double interval_length = 900;
    double rate_kw = 7.2;
    double clock_offset_s = 0; // series time = evacuation time + offset
    std::map<long, std::map<std::string, long>> ev_counts; // interval -> bus -> EVs

    long interval_count() const {
        return ev_counts.empty() ? 0 : ev_counts.rbegin()->first + 1;
    }

    std::map<std::string, double> kw_at(long interval) const {
        std::map<std::string, double> out;
        auto it = ev_counts.find(interval);
        if (it == ev_counts.end()) return out;
        for (const auto& [bus, count] : it->second) out[bus] = count * rate_kw;
        return out;
    }
};

inline ChargingSeries build_charging_series(const std::vector<SimVehicle>& vehicles,
                                            const ScenarioConfig& config) {
    ChargingSeries series;
    series.interval_length = config.interval_length;
    series.rate_kw = config.load_per_charging_ev;

    double min_start = 0;
    bool any = false;
    for (const SimVehicle& v : vehicles) {
        if (!v.is_electric || !v.grid_connected || v.charge_end <= v.charge_start) continue;
        min_start = any ? std::min(min_start, v.charge_start) : v.charge_start;
        any = true;
    }
    if (!any) return series;
    series.clock_offset_s = std::max(0.0, -min_start);

    const double L = series.interval_length;
    for (const SimVehicle& v : vehicles) {
        if (!v.is_electric || !v.grid_connected || v.charge_end <= v.charge_start) continue;
        double s = v.charge_start + series.clock_offset_s;
        double e = v.charge_end + series.clock_offset_s;
        // Half-open window [s, e): interval k overlaps iff k*L < e and s < (k+1)*L.
        long first = static_cast<long>(std::floor(s / L));
        if (first < 0) first = 0;
        for (long k = first; k * L < e; ++k)
            if (s < (k + 1) * L) series.ev_counts[k][v.bus_id] += 1;
    }
    return series;
}

// ---------------------------------------------------------------------------
// Interchange

inline jsonio::json config_to_json(const ScenarioConfig& c) {
    jsonio::json j;
    j["scenario_name"] = c.scenario_name;
    j["working_dir"] = c.working_dir;
    j["ev_penetration_rate"] = c.ev_penetration_rate;
    j["year_prediction"] = c.year_prediction;
    j["prediction_level"] = c.prediction_level;
    j["load_per_charging_ev"] = c.load_per_charging_ev;
    j["charging_time"] = c.charging_time;
    j["departure_window"] = c.departure_window;
    j["tazs_to_evacuate"] = c.tazs_to_evacuate;
    j["evac_edge"] = c.evac_edge;
    j["rng_seed"] = c.rng_seed;
    j["interval_length"] = c.interval_length;
    j["controls"] = c.controls ? "on" : "off";
    j["undervoltage_threshold_pu"] = c.undervoltage_threshold_pu;
    j["grid_coverage_radius_m"] = c.grid_coverage_radius_m;
    j["extreme_target_rate"] = c.extreme_target_rate;
    j["dt"] = c.dt;
    j["max_sim_time"] = c.max_sim_time;
    j["jobs"] = c.jobs;
    if (!c.dataset_dir.empty()) j["dataset_dir"] = c.dataset_dir;
    return j;
}

inline ScenarioConfig config_from_json(const jsonio::json& j) {
    ScenarioConfig c;
    c.scenario_name = jsonio::require(j, "scenario_name", "scenario config").get<std::string>();
    c.working_dir = jsonio::require(j, "working_dir", "scenario config").get<std::string>();
    c.ev_penetration_rate = j.value("ev_penetration_rate", -1.0);
    c.year_prediction = j.value("year_prediction", 0);
    c.prediction_level = j.value("prediction_level", std::string{});
    c.load_per_charging_ev = j.value("load_per_charging_ev", 7.2);
    c.charging_time = j.value("charging_time", 28800.0);
    c.departure_window = j.value("departure_window", 0.0);
    for (const auto& taz : j.value("tazs_to_evacuate", jsonio::json::array()))
        c.tazs_to_evacuate.push_back(taz.get<std::string>());
    c.evac_edge = j.value("evac_edge", std::string{});
    c.rng_seed = j.value("rng_seed", std::uint64_t{1});
    c.interval_length = j.value("interval_length", 900.0);
    if (j.contains("controls")) {
        if (j["controls"].is_boolean())
            c.controls = j["controls"].get<bool>();
        else
            c.controls = j["controls"].get<std::string>() != "off";
    }
    c.undervoltage_threshold_pu = j.value("undervoltage_threshold_pu", 0.95);
    c.grid_coverage_radius_m = j.value("grid_coverage_radius_m", 3000.0);
    c.extreme_target_rate = j.value("extreme_target_rate", 0.8);
    c.dt = j.value("dt", 1.0);
    c.max_sim_time = j.value("max_sim_time", 172800.0);
    c.jobs = j.value("jobs", 1);
    c.dataset_dir = j.value("dataset_dir", std::string{});
    return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    return config_from_json(jsonio::load(path));
}

inline void save_config(const ScenarioConfig& c, const std::filesystem::path& path) {
    jsonio::save(path, config_to_json(c));
}

inline void save_vehicles(const std::vector<SimVehicle>& vehicles,
                          const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"vehicle_id", "parcel_id", "taz_id", "bus_id", "origin_edge", "is_electric",
           "grid_connected", "scheduled_departure", "charge_start", "charge_end"});
    for (const SimVehicle& v : vehicles)
        w.row({v.vehicle_id, v.parcel_id, v.taz_id, v.bus_id, v.origin_edge,
               v.is_electric ? "1" : "0", v.grid_connected ? "1" : "0",
               csv::num(v.scheduled_departure, 3), csv::num(v.charge_start, 3),
               csv::num(v.charge_end, 3)});
    w.close();
}

inline std::vector<SimVehicle> load_vehicles(const std::filesystem::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t id = t.col("vehicle_id"), pid = t.col("parcel_id"), taz = t.col("taz_id");
    std::size_t bus = t.col("bus_id"), edge = t.col("origin_edge");
    std::size_t ev = t.col("is_electric"), gc = t.col("grid_connected");
    std::size_t dep = t.col("scheduled_departure"), cs = t.col("charge_start"),
                ce = t.col("charge_end");
    std::vector<SimVehicle> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
        SimVehicle v;
        v.vehicle_id = t.at(r, id);
        v.parcel_id = t.at(r, pid);
        v.taz_id = t.at(r, taz);
        v.bus_id = t.at(r, bus);
        v.origin_edge = t.at(r, edge);
        v.is_electric = t.at(r, ev) == "1";
        v.grid_connected = t.at(r, gc) == "1";
        v.scheduled_departure = t.num_at(r, dep);
        v.charge_start = t.num_at(r, cs);
        v.charge_end = t.num_at(r, ce);
        out.push_back(std::move(v));
    }
    return out;
}

inline void save_charging_series(const ChargingSeries& series,
                                 const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"interval", "bus_id", "kw"});
    for (const auto& [interval, buses] : series.ev_counts)
        for (const auto& [bus, count] : buses)
            w.row({csv::num(interval), bus, csv::num(count * series.rate_kw, 3)});
    w.close();
}

inline ChargingSeries load_charging_series(const std::filesystem::path& path, double rate_kw,
                                           double interval_length, double clock_offset_s) {
    ChargingSeries series;
    series.rate_kw = rate_kw;
    series.interval_length = interval_length;
    series.clock_offset_s = clock_offset_s;
    csv::Table t = csv::Table::read(path);
    std::size_t ic = t.col("interval"), bc = t.col("bus_id"), kc = t.col("kw");
    for (std::size_t r = 0; r < t.size(); ++r) {
        long interval = t.int_at(r, ic);
        series.ev_counts[interval][t.at(r, bc)] =
            std::llround(t.num_at(r, kc) / rate_kw);
    }
    return series;
}

} // namespace evtc::scenario
