#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evtc/csv.hpp"
#include "evtc/errors.hpp"
#include "evtc/geometry.hpp"
#include "evtc/grid.hpp"
#include "evtc/jsonio.hpp"
#include "evtc/traffic.hpp"

// Builds the parcel links: parcel -> nearest bus, parcel -> nearest road edge,
// parcel -> vehicle estimate, parcel -> containing TAZ. Plain linear scans:
// they are the contract (ties broken by smallest id) and fast enough at the
// scales generated here.

namespace evtc::linker {

struct Parcel {
    std::string id;
    double x = 0, y = 0;
    std::string category;
    std::string subcategory;
    int vehicle_count = 0;
    std::string bus_id;
    std::string edge_id;
    std::string taz_id; // empty when unassigned
    bool taz_assigned = false;
};

struct Taz {
    std::string id;
    std::string census_tract_id;
    double land_area_m2 = 0;
    std::vector<geometry::Ring> rings;
};

// ---------------------------------------------------------------------------
// Spatial joins

inline std::string nearest_bus(const Parcel& parcel, const std::vector<grid::Bus>& buses) {
    if (buses.empty()) throw DataError("nearest_bus with empty bus list");
    geometry::Point p{parcel.x, parcel.y};
    double best = std::numeric_limits<double>::infinity();
    const grid::Bus* pick = nullptr;
    for (const grid::Bus& b : buses) {
        double d = geometry::dist2(p, {b.x, b.y});
        if (d < best || (d == best && pick && b.id < pick->id)) {
            best = d;
            pick = &b;
        }
    }
    return pick->id;
}

inline std::string nearest_edge(const Parcel& parcel, const traffic::RoadNetwork& roads) {
    if (roads.edges.empty()) throw DataError("nearest_edge with empty edge list");
    geometry::Point p{parcel.x, parcel.y};
    double best = std::numeric_limits<double>::infinity();
    const traffic::RoadEdge* pick = nullptr;
    for (const traffic::RoadEdge& e : roads.edges) {
        const traffic::RoadNode& a = roads.nodes[roads.node_index(e.from_node)];
        const traffic::RoadNode& b = roads.nodes[roads.node_index(e.to_node)];
        double d = geometry::point_segment_dist2(p, {a.x, a.y}, {b.x, b.y});
        if (d < best || (d == best && pick && e.id < pick->id)) {
            best = d;
            pick = &e;
        }
    }
    return pick->id;
}

// Boundary points resolve to the containing TAZ with the smallest id; parcels
// in no TAZ come back empty (flagged unassigned by the caller).
inline std::optional<std::string> assign_taz(const Parcel& parcel, const std::vector<Taz>& tazs) {
    geometry::Point p{parcel.x, parcel.y};
    std::optional<std::string> pick;
    for (const Taz& t : tazs) {
        geometry::Containment c = geometry::polygon_contains(t.rings, p);
        if (c == geometry::Containment::Outside) continue;
        if (!pick || t.id < *pick) pick = t.id;
    }
    return pick;
}

// ---------------------------------------------------------------------------
// Vehicle estimation

// (category, subcategory) -> vehicle count. Shipped as a data file so users
// can extend categories without touching code.
class EstimateTable {
public:
    void insert(const std::string& category, const std::string& subcategory, double value) {
        rows_[{category, subcategory}] = value;
    }

    std::optional<double> lookup(const std::string& category, const std::string& subcategory) const {
        auto it = rows_.find({category, subcategory});
        if (it == rows_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const { return rows_.size(); }
    const std::map<std::pair<std::string, std::string>, double>& rows() const { return rows_; }

    static EstimateTable load(const std::filesystem::path& path) {
        csv::Table t = csv::Table::read(path);
        std::size_t cc = t.col("category"), sc = t.col("subcategory"), vc = t.col("vehicles");
        EstimateTable out;
        for (std::size_t r = 0; r < t.size(); ++r)
            out.insert(t.at(r, cc), t.at(r, sc), t.num_at(r, vc));
        return out;
    }

    void save(const std::filesystem::path& path) const {
        csv::Writer w(path);
        w.row({"category", "subcategory", "vehicles"});
        for (const auto& [key, value] : rows_)
            w.row({key.first, key.second, csv::num(static_cast<long long>(value))});
        w.close();
    }

private:
    std::map<std::pair<std::string, std::string>, double> rows_;
};

// Category table first, manual counts (scaled) second, zero with a warning
// last. Total over all inputs.
inline int estimate_vehicles(const std::string& category, const std::string& subcategory,
                             const EstimateTable& estimates, const EstimateTable& manual_counts,
                             double manual_scale = 1.0,
                             std::vector<std::string>* warnings = nullptr) {
    if (auto v = estimates.lookup(category, subcategory)) return static_cast<int>(*v);
    if (auto v = manual_counts.lookup(category, subcategory))
        return static_cast<int>(std::llround(*v * manual_scale));
    if (warnings)
        warnings->push_back("no vehicle estimate for (" + category + ", " + subcategory +
                            "), assuming 0");
    return 0;
}

// ---------------------------------------------------------------------------
// Linking driver

struct LinkReport {
    long parcels = 0;
    long unassigned_taz = 0;
    long unknown_category = 0;
    std::vector<std::string> warnings;
};

inline std::vector<Parcel> link_parcels(std::vector<Parcel> parcels,
                                        const grid::DistributionNetwork& net,
                                        const traffic::RoadNetwork& roads,
                                        const std::vector<Taz>& tazs,
                                        const EstimateTable& estimates,
                                        const EstimateTable& manual_counts,
                                        double manual_scale = 1.0,
                                        LinkReport* report = nullptr) {
    LinkReport local;
    for (Parcel& p : parcels) {
        p.bus_id = nearest_bus(p, net.buses);
        p.edge_id = nearest_edge(p, roads);
        auto taz = assign_taz(p, tazs);
        p.taz_assigned = taz.has_value();
        p.taz_id = taz.value_or("");
        if (!p.taz_assigned) ++local.unassigned_taz;
        std::size_t warn_before = local.warnings.size();
        p.vehicle_count = estimate_vehicles(p.category, p.subcategory, estimates, manual_counts,
                                            manual_scale, &local.warnings);
        if (local.warnings.size() > warn_before) ++local.unknown_category;
    }
    local.parcels = static_cast<long>(parcels.size());
    if (report) *report = std::move(local);
    return parcels;
}

// ---------------------------------------------------------------------------
// Interchange

inline std::vector<Parcel> load_parcels(const std::filesystem::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t id = t.col("id"), x = t.col("x"), y = t.col("y");
    std::size_t cat = t.col("category"), sub = t.col("subcategory");
    std::vector<Parcel> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
        Parcel p;
        p.id = t.at(r, id);
        p.x = t.num_at(r, x);
        p.y = t.num_at(r, y);
        p.category = t.at(r, cat);
        p.subcategory = t.at(r, sub);
        out.push_back(std::move(p));
    }
    return out;
}

inline void save_parcels(const std::vector<Parcel>& parcels, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"id", "x", "y", "category", "subcategory"});
    for (const Parcel& p : parcels)
        w.row({p.id, csv::num(p.x, 3), csv::num(p.y, 3), p.category, p.subcategory});
    w.close();
}

inline void save_linked_parcels(const std::vector<Parcel>& parcels,
                                const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"id", "x", "y", "category", "subcategory", "bus_id", "edge_id", "taz_id",
           "vehicle_count"});
    for (const Parcel& p : parcels)
        w.row({p.id, csv::num(p.x, 3), csv::num(p.y, 3), p.category, p.subcategory, p.bus_id,
               p.edge_id, p.taz_id, csv::num(p.vehicle_count)});
    w.close();
}

inline std::vector<Parcel> load_linked_parcels(const std::filesystem::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t id = t.col("id"), x = t.col("x"), y = t.col("y");
    std::size_t cat = t.col("category"), sub = t.col("subcategory");
    std::size_t bus = t.col("bus_id"), edge = t.col("edge_id"), taz = t.col("taz_id");
    std::size_t veh = t.col("vehicle_count");
    std::vector<Parcel> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
        Parcel p;
        p.id = t.at(r, id);
        p.x = t.num_at(r, x);
        p.y = t.num_at(r, y);
        p.category = t.at(r, cat);
        p.subcategory = t.at(r, sub);
        p.bus_id = t.at(r, bus);
        p.edge_id = t.at(r, edge);
        p.taz_id = t.at(r, taz);
        p.taz_assigned = !p.taz_id.empty();
        p.vehicle_count = static_cast<int>(t.int_at(r, veh));
        out.push_back(std::move(p));
    }
    return out;
}

inline jsonio::json tazs_to_json(const std::vector<Taz>& tazs) {
    using jsonio::json;
    json j;
    j["format_version"] = 1;
    j["tazs"] = json::array();
    for (const Taz& t : tazs) {
        json rings = json::array();
        for (const geometry::Ring& r : t.rings) {
            json ring = json::array();
            for (const geometry::Point& pt : r) ring.push_back({pt.x, pt.y});
            rings.push_back(ring);
        }
        j["tazs"].push_back({{"id", t.id},
                             {"census_tract_id", t.census_tract_id},
                             {"land_area", t.land_area_m2},
                             {"rings", rings}});
    }
    return j;
}

inline std::vector<Taz> tazs_from_json(const jsonio::json& j) {
    std::vector<Taz> out;
    for (const auto& t : jsonio::require(j, "tazs", "taz file")) {
        Taz taz;
        taz.id = t.at("id").get<std::string>();
        taz.census_tract_id = t.at("census_tract_id").get<std::string>();
        taz.land_area_m2 = t.at("land_area").get<double>();
        for (const auto& ring : t.at("rings")) {
            geometry::Ring r;
            for (const auto& pt : ring) r.push_back({pt[0].get<double>(), pt[1].get<double>()});
            if (r.size() < 3) throw DataError("degenerate TAZ ring in " + taz.id);
            taz.rings.push_back(std::move(r));
        }
        out.push_back(std::move(taz));
    }
    return out;
}

inline void save_tazs(const std::vector<Taz>& tazs, const std::filesystem::path& path) {
    jsonio::save(path, tazs_to_json(tazs));
}

inline std::vector<Taz> load_tazs(const std::filesystem::path& path) {
    return tazs_from_json(jsonio::load(path));
}

} // namespace evtc::linker
