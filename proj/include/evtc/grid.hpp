#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "evtc/errors.hpp"
#include "evtc/geometry.hpp"
#include "evtc/jsonio.hpp"
#include "evtc/phasor.hpp"

// Synthetic distribution network model: substations feed radial feeders of
// buses connected by lines and transformers, with consumer loads, switched
// capacitors and tap regulators. Networks are immutable after validation;
// every operation returns a new value.

namespace evtc::grid {

struct Bus {
    std::string id;
    std::string feeder_id;
    double x = 0, y = 0;
    PhaseMask phases = kPhaseABC;
    double base_voltage = 0; // line-to-neutral volts
    double vmin_pu = 0.95;
    double vmax_pu = 1.05;
};

enum class BranchKind { Line, Transformer };

struct Branch {
    std::string id;
    std::string from_bus; // upstream (source side)
    std::string to_bus;   // downstream
    BranchKind kind = BranchKind::Line;
    PhaseMat z_ohm{};     // series impedance, referred to the downstream side
    double i_rated_a = 0; // normal current limit, downstream side amps
    // Transformers only. Effective per-phase ratio is
    // tap_ratio[p] * (1 + tap_pos * step) with step owned by the regulator;
    // V_downstream = ratio * V_upstream.
    std::array<double, 3> tap_ratio{1.0, 1.0, 1.0};
    int tap_pos = 0;
};

enum class LoadKind { Base, EvCharging };

struct Load {
    std::string bus_id;
    LoadKind kind = LoadKind::Base;
    std::array<double, 3> kw{};   // per phase
    std::array<double, 3> kvar{}; // per phase
};

struct Capacitor {
    std::string id;
    std::string bus_id;
    double kvar_per_phase = 0;
    bool switched_on = false;
    double v_on_pu = 0.95;  // switch on below this
    double v_off_pu = 1.05; // switch off above this
};

struct Regulator {
    std::string id;
    std::string branch_id; // must reference a transformer
    std::string regulated_bus;
    double target_pu = 1.0;
    double band_pu = 0.02;
    int step_count = 16;
    double step_size = 0.00625;
};

struct Substation {
    std::string id;
    double x = 0, y = 0;
};

struct DistributionNetwork {
    int format_version = 1;
    std::string source_bus; // transmission interface marker; may be empty
    double source_voltage_pu = 1.0;
    std::vector<Substation> substations;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Load> loads;
    std::vector<Capacitor> capacitors;
    std::vector<Regulator> regulators;
};

struct Violation {
    std::string code;
    std::string component;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// ---------------------------------------------------------------------------
// Validation

inline ValidationReport validate_network(const DistributionNetwork& net) {
    ValidationReport report;
    auto add = [&](const std::string& code, const std::string& comp, const std::string& msg) {
        report.violations.push_back({code, comp, msg});
    };

    std::unordered_map<std::string, const Bus*> bus_by_id;
    for (const Bus& b : net.buses) {
        if (!bus_by_id.emplace(b.id, &b).second)
            add("duplicate_id", b.id, "duplicate bus id");
        if (b.phases == 0) add("empty_phases", b.id, "bus has no phases");
        if (b.base_voltage <= 0) add("nonpositive_rating", b.id, "base_voltage must be > 0");
        if (!(b.vmin_pu < 1.0 && 1.0 < b.vmax_pu))
            add("bad_voltage_band", b.id, "requires vmin_pu < 1 < vmax_pu");
    }

    std::unordered_map<std::string, const Branch*> branch_by_id;
    for (const Branch& br : net.branches) {
        if (!branch_by_id.emplace(br.id, &br).second)
            add("duplicate_id", br.id, "duplicate branch id");
        if (br.from_bus == br.to_bus) add("self_loop", br.id, "from_bus equals to_bus");
        auto from = bus_by_id.find(br.from_bus);
        auto to = bus_by_id.find(br.to_bus);
        if (from == bus_by_id.end())
            add("dangling_reference", br.id, "unknown from_bus " + br.from_bus);
        if (to == bus_by_id.end())
            add("dangling_reference", br.id, "unknown to_bus " + br.to_bus);
        if (br.i_rated_a <= 0) add("nonpositive_rating", br.id, "i_rated must be > 0");
        if (!mat_symmetric(br.z_ohm))
            add("asymmetric_impedance", br.id, "impedance matrix must be symmetric");
        if (from != bus_by_id.end() && to != bus_by_id.end()) {
            // Downstream phases must be served by the upstream bus.
            PhaseMask fp = from->second->phases, tp = to->second->phases;
            if ((tp & fp) != tp)
                add("phase_mismatch", br.id, "to_bus phases not a subset of from_bus phases");
            if (from->second->feeder_id != to->second->feeder_id)
                add("cross_feeder_branch", br.id, "endpoints belong to different feeders");
        }
        if (br.kind == BranchKind::Transformer) {
            for (int p = 0; p < 3; ++p) {
                if (br.tap_ratio[p] < 0.9 || br.tap_ratio[p] > 1.1)
                    add("tap_out_of_range", br.id, "tap ratio outside [0.9, 1.1]");
            }
        }
    }

    for (const Load& l : net.loads) {
        if (!bus_by_id.count(l.bus_id))
            add("dangling_reference", l.bus_id, "load references missing bus " + l.bus_id);
        if (l.kind == LoadKind::Base) {
            for (int p = 0; p < 3; ++p)
                if (l.kw[p] < 0) add("negative_load", l.bus_id, "base load kw must be >= 0");
        }
    }

    std::unordered_set<std::string> cap_ids, reg_ids;
    for (const Capacitor& c : net.capacitors) {
        if (!cap_ids.insert(c.id).second) add("duplicate_id", c.id, "duplicate capacitor id");
        if (!bus_by_id.count(c.bus_id))
            add("dangling_reference", c.id, "capacitor references missing bus " + c.bus_id);
        if (!(c.v_on_pu < c.v_off_pu))
            add("bad_capacitor_thresholds", c.id, "requires v_on_pu < v_off_pu");
    }
    for (const Regulator& r : net.regulators) {
        if (!reg_ids.insert(r.id).second) add("duplicate_id", r.id, "duplicate regulator id");
        auto br = branch_by_id.find(r.branch_id);
        if (br == branch_by_id.end())
            add("dangling_reference", r.id, "regulator references missing branch " + r.branch_id);
        else if (br->second->kind != BranchKind::Transformer)
            add("bad_regulator", r.id, "regulated branch is not a transformer");
        if (!bus_by_id.count(r.regulated_bus))
            add("dangling_reference", r.id, "regulator references missing bus " + r.regulated_bus);
        if (r.band_pu <= 0) add("bad_regulator", r.id, "band_pu must be > 0");
        if (r.step_count < 0 || r.step_size < 0) add("bad_regulator", r.id, "negative tap range");
    }

    // Radial structure per feeder: connected, single root, |E| = |V| - 1.
    std::map<std::string, std::vector<const Bus*>> feeders;
    for (const Bus& b : net.buses) feeders[b.feeder_id].push_back(&b);
    std::map<std::string, std::vector<const Branch*>> feeder_branches;
    for (const Branch& br : net.branches) {
        auto to = bus_by_id.find(br.to_bus);
        auto from = bus_by_id.find(br.from_bus);
        if (to == bus_by_id.end() || from == bus_by_id.end()) continue;
        if (from->second->feeder_id != to->second->feeder_id) continue;
        feeder_branches[to->second->feeder_id].push_back(&br);
    }

    for (const auto& [fid, fbuses] : feeders) {
        const auto& fbr = feeder_branches[fid];
        std::unordered_map<std::string, int> upstream_count;
        std::unordered_map<std::string, std::vector<std::string>> down;
        for (const Bus* b : fbuses) upstream_count[b->id] = 0;
        for (const Branch* br : fbr) {
            upstream_count[br->to_bus]++;
            down[br->from_bus].push_back(br->to_bus);
        }
        std::vector<std::string> roots;
        for (const Bus* b : fbuses)
            if (upstream_count[b->id] == 0) roots.push_back(b->id);
        std::sort(roots.begin(), roots.end());
        for (const auto& [bid, cnt] : upstream_count)
            if (cnt > 1) add("cycle", bid, "bus has multiple upstream branches in feeder " + fid);
        if (roots.empty()) {
            add("cycle", fid, "feeder has no root bus (directed cycle)");
            continue;
        }
        if (roots.size() > 1)
            add("multiple_roots", fid, "feeder has " + std::to_string(roots.size()) + " root buses");
        // Reachability from the first root.
        std::unordered_set<std::string> seen;
        std::queue<std::string> q;
        q.push(roots.front());
        seen.insert(roots.front());
        while (!q.empty()) {
            std::string cur = q.front();
            q.pop();
            for (const std::string& nb : down[cur])
                if (seen.insert(nb).second) q.push(nb);
        }
        for (const Bus* b : fbuses)
            if (!seen.count(b->id))
                add("disconnected", b->id, "bus unreachable from feeder root in " + fid);
        if (fbr.size() != fbuses.size() - 1)
            add("cycle", fid,
                "feeder has " + std::to_string(fbr.size()) + " branches for " +
                    std::to_string(fbuses.size()) + " buses");
    }

    return report;
}

// ---------------------------------------------------------------------------
// Feeder partition

// Flattened radial feeder, buses in BFS order from the root. This is the
// solver's working representation; indices are positions in `buses`.
struct FeederTree {
    std::string feeder_id;
    std::vector<Bus> buses; // [0] is the root (substation-side bus)
    std::vector<Branch> branches;
    std::vector<int> branch_parent; // bus index, per branch
    std::vector<int> branch_child;
    std::vector<std::array<Complex, 3>> load_va; // aggregated per bus, volt-amps
    std::vector<Capacitor> capacitors;
    std::vector<int> capacitor_bus;
    std::vector<Regulator> regulators;
    std::vector<int> regulator_branch;
    std::vector<int> regulator_bus;
    std::unordered_map<std::string, int> bus_index;

    int index_of(const std::string& bus_id) const {
        auto it = bus_index.find(bus_id);
        return it == bus_index.end() ? -1 : it->second;
    }
};

inline std::vector<FeederTree> feeder_partition(const DistributionNetwork& net) {
    ValidationReport report = validate_network(net);
    if (!report.ok()) {
        const Violation& v = report.violations.front();
        throw DataError("feeder_partition on invalid network: [" + v.code + "] " + v.component +
                        ": " + v.message + " (+" + std::to_string(report.violations.size() - 1) +
                        " more)");
    }

    std::map<std::string, std::vector<const Bus*>> by_feeder;
    for (const Bus& b : net.buses) by_feeder[b.feeder_id].push_back(&b);

    std::unordered_map<std::string, std::vector<const Branch*>> down;
    std::unordered_map<std::string, int> upstream_count;
    for (const Bus& b : net.buses) upstream_count[b.id] = 0;
    for (const Branch& br : net.branches) {
        down[br.from_bus].push_back(&br);
        upstream_count[br.to_bus]++;
    }
    for (auto& [id, v] : down)
        std::sort(v.begin(), v.end(),
                  [](const Branch* a, const Branch* b) { return a->to_bus < b->to_bus; });

    std::vector<FeederTree> trees;
    for (const auto& [fid, fbuses] : by_feeder) {
        FeederTree t;
        t.feeder_id = fid;
        std::string root;
        std::vector<std::string> sorted_ids;
        for (const Bus* b : fbuses) sorted_ids.push_back(b->id);
        std::sort(sorted_ids.begin(), sorted_ids.end());
        for (const std::string& id : sorted_ids)
            if (upstream_count[id] == 0) {
                root = id;
                break;
            }

        std::unordered_map<std::string, const Bus*> bus_map;
        for (const Bus* b : fbuses) bus_map[b->id] = b;

        std::queue<std::string> q;
        q.push(root);
        t.buses.push_back(*bus_map[root]);
        t.bus_index[root] = 0;
        while (!q.empty()) {
            std::string cur = q.front();
            q.pop();
            int parent_idx = t.bus_index[cur];
            for (const Branch* br : down[cur]) {
                int child_idx = static_cast<int>(t.buses.size());
                t.buses.push_back(*bus_map[br->to_bus]);
                t.bus_index[br->to_bus] = child_idx;
                t.branches.push_back(*br);
                t.branch_parent.push_back(parent_idx);
                t.branch_child.push_back(child_idx);
                q.push(br->to_bus);
            }
        }

        t.load_va.assign(t.buses.size(), {});
        trees.push_back(std::move(t));
    }

    // Attach loads / capacitors / regulators to their feeder.
    std::unordered_map<std::string, std::pair<int, int>> locate; // bus -> (tree, index)
    for (std::size_t ti = 0; ti < trees.size(); ++ti)
        for (const auto& [bid, idx] : trees[ti].bus_index)
            locate[bid] = {static_cast<int>(ti), idx};

    for (const Load& l : net.loads) {
        auto [ti, bi] = locate.at(l.bus_id);
        for (int p = 0; p < 3; ++p)
            trees[ti].load_va[bi][p] += Complex{l.kw[p] * 1000.0, l.kvar[p] * 1000.0};
    }
    for (const Capacitor& c : net.capacitors) {
        auto [ti, bi] = locate.at(c.bus_id);
        trees[ti].capacitors.push_back(c);
        trees[ti].capacitor_bus.push_back(bi);
    }
    std::unordered_map<std::string, std::pair<int, int>> branch_locate;
    for (std::size_t ti = 0; ti < trees.size(); ++ti)
        for (std::size_t bi = 0; bi < trees[ti].branches.size(); ++bi)
            branch_locate[trees[ti].branches[bi].id] = {static_cast<int>(ti), static_cast<int>(bi)};
    for (const Regulator& r : net.regulators) {
        auto [ti, bri] = branch_locate.at(r.branch_id);
        trees[ti].regulators.push_back(r);
        trees[ti].regulator_branch.push_back(bri);
        trees[ti].regulator_bus.push_back(trees[ti].bus_index.at(r.regulated_bus));
    }

    return trees;
}

// ---------------------------------------------------------------------------
// Charging loads

// Replaces all ev_charging loads with the given bus -> kW map. Charging is
// constant-power at unity power factor, split equally over the bus's phases.
inline DistributionNetwork apply_charging_loads(const DistributionNetwork& net,
                                                const std::map<std::string, double>& charging) {
    std::unordered_map<std::string, const Bus*> bus_by_id;
    for (const Bus& b : net.buses) bus_by_id[b.id] = &b;
    for (const auto& [bus_id, kw] : charging) {
        (void)kw;
        if (!bus_by_id.count(bus_id)) throw DataError("charging load on unknown bus " + bus_id);
    }

    DistributionNetwork out = net;
    out.loads.erase(std::remove_if(out.loads.begin(), out.loads.end(),
                                   [](const Load& l) { return l.kind == LoadKind::EvCharging; }),
                    out.loads.end());
    for (const auto& [bus_id, kw] : charging) {
        if (kw == 0.0) continue;
        const Bus* bus = bus_by_id.at(bus_id);
        int n = phase_count(bus->phases);
        Load l;
        l.bus_id = bus_id;
        l.kind = LoadKind::EvCharging;
        for (int p = 0; p < 3; ++p)
            if (has_phase(bus->phases, p)) l.kw[p] = kw / n;
        out.loads.push_back(l);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON interchange

namespace detail {

using jsonio::json;

inline json complex_to_json(const Complex& c) { return json::array({c.real(), c.imag()}); }

inline Complex complex_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw DataError("complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json mat_to_json(const PhaseMat& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) {
        json row = json::array();
        for (int j = 0; j < 3; ++j) row.push_back(complex_to_json(m[i][j]));
        rows.push_back(row);
    }
    return rows;
}

inline PhaseMat mat_from_json(const json& j) {
    PhaseMat m{};
    if (!j.is_array() || j.size() != 3) throw DataError("impedance must be a 3x3 matrix");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) m[i][k] = complex_from_json(j[i][k]);
    return m;
}

} // namespace detail

inline jsonio::json network_to_json(const DistributionNetwork& net) {
    using jsonio::json;
    json j;
    j["format_version"] = net.format_version;
    j["source_bus"] = net.source_bus;
    j["source_voltage_pu"] = net.source_voltage_pu;
    j["substations"] = json::array();
    for (const auto& s : net.substations)
        j["substations"].push_back({{"id", s.id}, {"x", s.x}, {"y", s.y}});
    j["buses"] = json::array();
    for (const auto& b : net.buses)
        j["buses"].push_back({{"id", b.id},
                              {"feeder_id", b.feeder_id},
                              {"x", b.x},
                              {"y", b.y},
                              {"phases", format_phases(b.phases)},
                              {"base_voltage", b.base_voltage},
                              {"vmin_pu", b.vmin_pu},
                              {"vmax_pu", b.vmax_pu}});
    j["branches"] = jsonio::json::array();
    for (const auto& br : net.branches) {
        json e = {{"id", br.id},
                  {"from_bus", br.from_bus},
                  {"to_bus", br.to_bus},
                  {"kind", br.kind == BranchKind::Line ? "line" : "transformer"},
                  {"i_rated", br.i_rated_a},
                  {"z", detail::mat_to_json(br.z_ohm)}};
        if (br.kind == BranchKind::Transformer) {
            e["tap_ratio"] = {br.tap_ratio[0], br.tap_ratio[1], br.tap_ratio[2]};
            e["tap_pos"] = br.tap_pos;
        }
        j["branches"].push_back(e);
    }
    j["loads"] = json::array();
    for (const auto& l : net.loads)
        j["loads"].push_back({{"bus_id", l.bus_id},
                              {"kind", l.kind == LoadKind::Base ? "base" : "ev_charging"},
                              {"kw", {l.kw[0], l.kw[1], l.kw[2]}},
                              {"kvar", {l.kvar[0], l.kvar[1], l.kvar[2]}}});
    j["capacitors"] = json::array();
    for (const auto& c : net.capacitors)
        j["capacitors"].push_back({{"id", c.id},
                                   {"bus_id", c.bus_id},
                                   {"kvar_per_phase", c.kvar_per_phase},
                                   {"switched_on", c.switched_on},
                                   {"v_on_pu", c.v_on_pu},
                                   {"v_off_pu", c.v_off_pu}});
    j["regulators"] = json::array();
    for (const auto& r : net.regulators)
        j["regulators"].push_back({{"id", r.id},
                                   {"branch_id", r.branch_id},
                                   {"regulated_bus", r.regulated_bus},
                                   {"target_pu", r.target_pu},
                                   {"band_pu", r.band_pu},
                                   {"step_count", r.step_count},
                                   {"step_size", r.step_size}});
    return j;
}

inline DistributionNetwork network_from_json(const jsonio::json& j) {
    using jsonio::require;
    DistributionNetwork net;
    net.format_version = require(j, "format_version", "network").get<int>();
    net.source_bus = j.value("source_bus", std::string{});
    net.source_voltage_pu = j.value("source_voltage_pu", 1.0);
    for (const auto& s : j.value("substations", jsonio::json::array()))
        net.substations.push_back({s.at("id").get<std::string>(), s.at("x").get<double>(),
                                   s.at("y").get<double>()});
    for (const auto& b : require(j, "buses", "network")) {
        Bus bus;
        bus.id = b.at("id").get<std::string>();
        bus.feeder_id = b.at("feeder_id").get<std::string>();
        bus.x = b.at("x").get<double>();
        bus.y = b.at("y").get<double>();
        bus.phases = parse_phases(b.at("phases").get<std::string>());
        bus.base_voltage = b.at("base_voltage").get<double>();
        bus.vmin_pu = b.value("vmin_pu", 0.95);
        bus.vmax_pu = b.value("vmax_pu", 1.05);
        net.buses.push_back(std::move(bus));
    }
    for (const auto& e : require(j, "branches", "network")) {
        Branch br;
        br.id = e.at("id").get<std::string>();
        br.from_bus = e.at("from_bus").get<std::string>();
        br.to_bus = e.at("to_bus").get<std::string>();
        std::string kind = e.at("kind").get<std::string>();
        if (kind == "line")
            br.kind = BranchKind::Line;
        else if (kind == "transformer")
            br.kind = BranchKind::Transformer;
        else
            throw DataError("unknown branch kind: " + kind);
        br.i_rated_a = e.at("i_rated").get<double>();
        br.z_ohm = detail::mat_from_json(e.at("z"));
        if (e.contains("tap_ratio")) {
            for (int p = 0; p < 3; ++p) br.tap_ratio[p] = e["tap_ratio"][p].get<double>();
        }
        br.tap_pos = e.value("tap_pos", 0);
        net.branches.push_back(std::move(br));
    }
    for (const auto& l : j.value("loads", jsonio::json::array())) {
        Load load;
        load.bus_id = l.at("bus_id").get<std::string>();
        std::string kind = l.at("kind").get<std::string>();
        load.kind = (kind == "base") ? LoadKind::Base : LoadKind::EvCharging;
        for (int p = 0; p < 3; ++p) {
            load.kw[p] = l.at("kw")[p].get<double>();
            load.kvar[p] = l.at("kvar")[p].get<double>();
        }
        net.loads.push_back(std::move(load));
    }
    for (const auto& c : j.value("capacitors", jsonio::json::array())) {
        Capacitor cap;
        cap.id = c.at("id").get<std::string>();
        cap.bus_id = c.at("bus_id").get<std::string>();
        cap.kvar_per_phase = c.at("kvar_per_phase").get<double>();
        cap.switched_on = c.at("switched_on").get<bool>();
        cap.v_on_pu = c.at("v_on_pu").get<double>();
        cap.v_off_pu = c.at("v_off_pu").get<double>();
        net.capacitors.push_back(std::move(cap));
    }
    for (const auto& r : j.value("regulators", jsonio::json::array())) {
        Regulator reg;
        reg.id = r.at("id").get<std::string>();
        reg.branch_id = r.at("branch_id").get<std::string>();
        reg.regulated_bus = r.at("regulated_bus").get<std::string>();
        reg.target_pu = r.at("target_pu").get<double>();
        reg.band_pu = r.at("band_pu").get<double>();
        reg.step_count = r.at("step_count").get<int>();
        reg.step_size = r.at("step_size").get<double>();
        net.regulators.push_back(std::move(reg));
    }
    return net;
}

inline void save_network(const DistributionNetwork& net, const std::filesystem::path& path) {
    jsonio::save(path, network_to_json(net));
}

inline DistributionNetwork load_network(const std::filesystem::path& path) {
    return network_from_json(jsonio::load(path));
}

} // namespace evtc::grid
