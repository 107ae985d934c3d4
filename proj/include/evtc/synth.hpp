#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evtc/adoption.hpp"
#include "evtc/errors.hpp"
#include "evtc/grid.hpp"
#include "evtc/linker.hpp"
#include "evtc/powerflow.hpp"
#include "evtc/rng.hpp"
#include "evtc/scenario.hpp"
#include "evtc/traffic.hpp"

// Synthetic-city generator: an internally consistent bundle of distribution
// grid, Manhattan road grid, parcels, TAZ cells and census tracts, plus the
// exogenous adoption series, so the whole pipeline runs without external data.
// Deterministic per seed.

namespace evtc::synth {

struct CategoryMix {
    std::string category;
    std::string subcategory;
    double weight = 0;
};

struct CityParams {
    int substations = 2;
    int feeders_per_substation = 3;
    int buses_per_feeder = 40;
    int road_rows = 12;
    int road_cols = 12;
    int parcel_count = 5500;
    int taz_rows = 2;
    int taz_cols = 3;
    std::vector<CategoryMix> category_mix; // defaults applied when empty
    std::uint64_t seed = 1;

    // Electrical and road templates. Values are typical medium-voltage feeder
    // constants; the ratings themselves are sized from a baseline solve.
    double road_spacing_m = 500;
    double base_voltage_ln = 7200; // 12.47 kV LL
    double source_voltage_pu = 1.02;
    double load_kw_min = 12, load_kw_max = 30; // per phase per bus
    double rating_utilization = 0.72;          // baseline current / rating
    double evac_saturation_flow = 0.40;        // veh/s/lane on the exit edge

    void validate() const {
        if (substations < 1 || feeders_per_substation < 1 || buses_per_feeder < 3)
            throw ConfigError("city params: need >= 1 substation/feeder and >= 3 buses per feeder");
        if (road_rows < 2 || road_cols < 2) throw ConfigError("city params: road grid too small");
        if (taz_rows < 1 || taz_cols < 1) throw ConfigError("city params: taz grid too small");
        if (parcel_count < 1) throw ConfigError("city params: parcel_count must be >= 1");
        // Feeders need distinct corridors inside the road area.
        if (substations * feeders_per_substation > (road_rows - 1) * (road_cols - 1))
            throw ConfigError("city params: more feeders than the road area supports");
    }
};

inline std::vector<CategoryMix> default_category_mix() {
    return {
        {"RESIDENTIAL", "01-SFR", 0.78},
        {"RESIDENTIAL", "08-DUPLEX/TRIPLEX", 0.08},
        {"APART", "07-APT<5 UNITS", 0.07},
        {"CONDO", "04-CONDO", 0.04},
        {"TOWNHOUSE", "041-TOWNHOME", 0.02},
        {"COMM", "00-STOREFRONT", 0.01}, // not in the estimate table: manual-count path
    };
}

inline CityParams small_preset() {
    CityParams p;
    p.substations = 2;
    p.feeders_per_substation = 3;
    p.buses_per_feeder = 40;
    p.road_rows = 12;
    p.road_cols = 12;
    p.parcel_count = 5500;
    p.taz_rows = 2;
    p.taz_cols = 3;
    return p;
}

inline CityParams large_preset() {
    CityParams p;
    p.substations = 4;
    p.feeders_per_substation = 3;
    p.buses_per_feeder = 60;
    p.road_rows = 24;
    p.road_cols = 24;
    p.parcel_count = 15500;
    p.taz_rows = 10;
    p.taz_cols = 10;
    return p;
}

// The full vehicle-estimate table from the source parcel-category data.
inline linker::EstimateTable default_estimate_table() {
    linker::EstimateTable t;
    t.insert("APART", "07-APT<5 UNITS", 4);
    t.insert("RESIDENTIAL", "07-APT<5 UNITS", 4);
    t.insert("GOV OWNED", "07-APT<5 UNITS", 4);
    t.insert("APART", "041-TOWNHOME", 4);
    t.insert("COMM", "07-APT<5 UNITS", 4);
    t.insert("COMM", "09-TWNHSEAPT", 4);
    t.insert("RESIDENTIAL", "08-DUPLEX/TRIPLEX", 3);
    t.insert("MULTI-FAMILY<4", "01-SFR", 3);
    t.insert("MULTI-FAMILY<4", "08-DUPLEX/TRIPLEX", 3);
    t.insert("GOV OWNED", "08-DUPLEX/TRIPLEX", 3);
    t.insert("MULTI-FAMILY<4", "07-APT<5 UNITS", 3);
    t.insert("MULTI-FAMILY<4", "0", 3);
    t.insert("OFFICE", "08-DUPLEX/TRIPLEX", 3);
    t.insert("COMM", "08-DUPLEX/TRIPLEX", 3);
    t.insert("APART", "08-DUPLEX/TRIPLEX", 3);
    t.insert("IND", "08-DUPLEX/TRIPLEX", 3);
    t.insert("RESIDENTIAL", "01-SFR", 1);
    t.insert("CONDO", "04-CONDO", 1);
    t.insert("TOWNHOUSE", "041-TOWNHOME", 1);
    t.insert("RESIDENTIAL", "09-TWNHSEAPT", 1);
    t.insert("AGRI/HORT", "01-SFR", 1);
    t.insert("RESIDENTIAL", "02-MANUFHM", 1);
    t.insert("COMM", "01-SFR", 1);
    t.insert("GOV OWNED", "01-SFR", 1);
    t.insert("DEVEL. RESTRICT.", "01-SFR", 1);
    t.insert("IND", "01-SFR", 1);
    t.insert("INSTITUTIONAL", "01-SFR", 1);
    t.insert("SINGLE WIDE MH", "0", 1);
    t.insert("ASSIST LIV/SKILLCARE", "01-SFR", 1);
    t.insert("OFFICE", "01-SFR", 1);
    t.insert("APART", "01-SFR", 1);
    t.insert("AIRPORT", "01-SFR", 1);
    t.insert("VACANT", "01-SFR", 1);
    t.insert("MFG HOM", "02-MANUFHM", 1);
    t.insert("TOWNHOUSE", "04-CONDO", 1);
    t.insert("SCHOOL/COLL/UNIV", "01-SFR", 1);
    t.insert("RESIDENTIAL", "05-PATIOHM", 1);
    t.insert("TWINHOME", "012-TWIN HOME", 1);
    t.insert("COMM", "02-MANUFHM", 1);
    t.insert("INSTITUTIONAL", "02-MANUFHM", 1);
    t.insert("LEASED", "01-SFR", 1);
    t.insert("IND", "02-MANUFHM", 1);
    return t;
}

inline linker::EstimateTable default_manual_counts() {
    linker::EstimateTable t;
    t.insert("COMM", "00-STOREFRONT", 2);
    return t;
}

struct CityData {
    grid::DistributionNetwork net;
    traffic::RoadNetwork roads;
    std::vector<linker::Taz> tazs;
    std::vector<linker::Parcel> parcels; // unlinked
    std::vector<adoption::CensusTract> tracts;
    adoption::MarketHistory history;
    std::map<std::string, adoption::AdoptionCurve> curves;
    linker::EstimateTable estimates;
    linker::EstimateTable manual_counts;
    std::string evac_edge_id;
    // Age table rows used to derive tract aging (also written to disk).
    std::vector<std::array<double, 3>> age_rows; // year, min_income, avg_age
};

namespace detail {

inline std::string two(int v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", v);
    return buf;
}

inline std::string three(int v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03d", v);
    return buf;
}

inline PhaseMat line_impedance(double length_m) {
    // Overhead MV template, ohms per km: self 0.30 + j0.60, mutual 0.08 + j0.25.
    const Complex self{0.30, 0.60};
    const Complex mutual{0.08, 0.25};
    PhaseMat z{};
    double km = length_m / 1000.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) z[i][j] = (i == j ? self : mutual) * km;
    return z;
}

inline PhaseMat transformer_impedance(double base_voltage_ln, double s_rated_va) {
    // ~1% R, 5% X on the unit's own rating, diagonal.
    double z_base = base_voltage_ln * base_voltage_ln / (s_rated_va / 3.0);
    PhaseMat z{};
    for (int p = 0; p < 3; ++p) z[p][p] = Complex{0.01 * z_base, 0.05 * z_base};
    return z;
}

inline void build_grid(const CityParams& params, CityData& city, double width, double height) {
    rng::Stream rs(params.seed, "grid");
    grid::DistributionNetwork& net = city.net;
    net.format_version = 1;
    net.source_bus = "";
    net.source_voltage_pu = params.source_voltage_pu;

    for (int s = 0; s < params.substations; ++s) {
        double fx = (s + 0.5) / params.substations;
        net.substations.push_back({"sub" + two(s), fx * width, 0.35 * height});
    }

    for (int s = 0; s < params.substations; ++s) {
        const grid::Substation& sub = net.substations[s];
        for (int fi = 0; fi < params.feeders_per_substation; ++fi) {
            std::string feeder = "s" + two(s) + "f" + two(fi);
            double heading = rs.uniform(0, 2 * 3.14159265358979);

            // Root bus at the substation; the head transformer feeds the trunk.
            std::vector<int> bus_of; // local index -> net.buses index
            auto add_bus = [&](double x, double y, int local) {
                grid::Bus b;
                b.id = feeder + "b" + three(local);
                b.feeder_id = feeder;
                b.x = std::clamp(x, 0.0, width);
                b.y = std::clamp(y, 0.0, height);
                b.phases = kPhaseABC;
                b.base_voltage = params.base_voltage_ln;
                bus_of.push_back(static_cast<int>(net.buses.size()));
                net.buses.push_back(std::move(b));
            };
            add_bus(sub.x + rs.uniform(-40, 40), sub.y + rs.uniform(-40, 40), 0);

            std::vector<int> parent_of(params.buses_per_feeder, -1);
            std::vector<double> px(params.buses_per_feeder), py(params.buses_per_feeder);
            px[0] = net.buses[bus_of[0]].x;
            py[0] = net.buses[bus_of[0]].y;
            int trunk_tip = 0;
            for (int b = 1; b < params.buses_per_feeder; ++b) {
                // ~70% trunk extension, ~30% lateral off a recent bus.
                int parent;
                if (b == 1 || rs.uniform() < 0.7) {
                    parent = trunk_tip;
                } else {
                    parent = static_cast<int>(rs.range(std::max(1, b - 6), b - 1));
                }
                double step = rs.uniform(140, 260);
                double angle = heading + rs.uniform(-0.9, 0.9);
                px[b] = px[parent] + step * std::cos(angle);
                py[b] = py[parent] + step * std::sin(angle);
                add_bus(px[b], py[b], b);
                parent_of[b] = parent;
                if (parent == trunk_tip) trunk_tip = b;
            }

            for (int b = 1; b < params.buses_per_feeder; ++b) {
                grid::Branch br;
                br.id = feeder + "_br" + three(b);
                br.from_bus = net.buses[bus_of[parent_of[b]]].id;
                br.to_bus = net.buses[bus_of[b]].id;
                if (b == 1) {
                    br.kind = grid::BranchKind::Transformer;
                    br.z_ohm = transformer_impedance(params.base_voltage_ln, 6e6);
                } else {
                    const grid::Bus& a = net.buses[bus_of[parent_of[b]]];
                    const grid::Bus& c = net.buses[bus_of[b]];
                    double len = std::max(30.0, geometry::dist({a.x, a.y}, {c.x, c.y}));
                    br.kind = grid::BranchKind::Line;
                    br.z_ohm = line_impedance(len);
                }
                br.i_rated_a = 1; // sized after the baseline solve
                net.branches.push_back(std::move(br));
            }

            // Loads on every bus past the head transformer, mildly unbalanced.
            for (int b = 2; b < params.buses_per_feeder; ++b) {
                grid::Load load;
                load.bus_id = net.buses[bus_of[b]].id;
                load.kind = grid::LoadKind::Base;
                for (int p = 0; p < 3; ++p) {
                    double kw = rs.uniform(params.load_kw_min, params.load_kw_max);
                    load.kw[p] = std::round(kw * 10) / 10;
                    load.kvar[p] = std::round(kw * 0.3287 * 10) / 10; // pf 0.95
                }
                net.loads.push_back(std::move(load));
            }

            // Head regulator monitors the electrically deepest bus.
            std::vector<double> depth(params.buses_per_feeder, 0.0);
            int deepest = 1;
            for (int b = 2; b < params.buses_per_feeder; ++b) {
                const grid::Bus& a = net.buses[bus_of[parent_of[b]]];
                const grid::Bus& c = net.buses[bus_of[b]];
                depth[b] = depth[parent_of[b]] + geometry::dist({a.x, a.y}, {c.x, c.y});
                if (depth[b] > depth[deepest]) deepest = b;
            }
            grid::Regulator reg;
            reg.id = feeder + "_reg";
            reg.branch_id = feeder + "_br001";
            reg.regulated_bus = net.buses[bus_of[deepest]].id;
            reg.target_pu = 1.0;
            reg.band_pu = 0.03;
            reg.step_count = 16;
            reg.step_size = 0.00625;
            net.regulators.push_back(std::move(reg));

            // Two switched capacitors along the feeder, off at baseline.
            for (int ci = 0; ci < 2; ++ci) {
                int at = std::clamp<int>(
                    static_cast<int>((ci == 0 ? 0.4 : 0.75) * params.buses_per_feeder), 2,
                    params.buses_per_feeder - 1);
                grid::Capacitor cap;
                cap.id = feeder + "_cap" + std::to_string(ci);
                cap.bus_id = net.buses[bus_of[at]].id;
                cap.kvar_per_phase = 100;
                cap.switched_on = false;
                cap.v_on_pu = 0.96;
                cap.v_off_pu = 1.05;
                net.capacitors.push_back(std::move(cap));
            }
        }
    }

    // Rate every branch from the baseline solve so the unstressed city is
    // clean and headroom is uniform.
    for (grid::FeederTree& f : grid::feeder_partition(net)) {
        powerflow::PowerFlowSolution sol =
            powerflow::solve_feeder(f, params.source_voltage_pu);
        if (!sol.converged)
            throw NumericError("baseline solve failed for feeder " + f.feeder_id);
        for (grid::Branch& br : net.branches) {
            auto it = sol.branch_current_a.find(br.id);
            if (it == sol.branch_current_a.end()) continue;
            double imax = 0;
            for (int p = 0; p < 3; ++p) imax = std::max(imax, std::abs(it->second[p]));
            br.i_rated_a = std::max(40.0, std::ceil(imax / params.rating_utilization));
        }
    }
}

inline void build_roads(const CityParams& params, CityData& city, double width, double height) {
    traffic::RoadNetwork& roads = city.roads;
    auto node_id = [&](int r, int c) { return "n" + two(r) + "_" + two(c); };
    for (int r = 0; r < params.road_rows; ++r)
        for (int c = 0; c < params.road_cols; ++c)
            roads.nodes.push_back({node_id(r, c), c * params.road_spacing_m,
                                   r * params.road_spacing_m});

    auto add_edge = [&](const std::string& id, const std::string& a, const std::string& b,
                        int lanes, double speed) {
        traffic::RoadEdge e;
        e.id = id;
        e.from_node = a;
        e.to_node = b;
        e.length_m = params.road_spacing_m;
        e.speed_mps = speed;
        e.lanes = lanes;
        e.saturation_flow = 0.5;
        e.jam_density = 0.145;
        roads.edges.push_back(std::move(e));
    };

    for (int r = 0; r < params.road_rows; ++r) {
        bool arterial = (r % 4 == 0);
        int lanes = arterial ? 2 : 1;
        double speed = arterial ? 22.2 : 13.9;
        for (int c = 0; c + 1 < params.road_cols; ++c) {
            std::string base = "eh" + two(r) + "_" + two(c);
            add_edge(base + "e", node_id(r, c), node_id(r, c + 1), lanes, speed);
            add_edge(base + "w", node_id(r, c + 1), node_id(r, c), lanes, speed);
        }
    }
    for (int c = 0; c < params.road_cols; ++c) {
        bool arterial = (c % 4 == 0);
        int lanes = arterial ? 2 : 1;
        double speed = arterial ? 22.2 : 13.9;
        for (int r = 0; r + 1 < params.road_rows; ++r) {
            std::string base = "ev" + two(r) + "_" + two(c);
            add_edge(base + "n", node_id(r, c), node_id(r + 1, c), lanes, speed);
            add_edge(base + "s", node_id(r + 1, c), node_id(r, c), lanes, speed);
        }
    }

    // Exit ramp to the safe node east of the city; this edge is the evacuation
    // bottleneck.
    int exit_row = (params.road_rows / 2 / 4) * 4; // an arterial row near mid-height
    roads.nodes.push_back({"zz_exit", width + 1200.0, exit_row * params.road_spacing_m});
    traffic::RoadEdge evac;
    evac.id = "zz_evac";
    evac.from_node = node_id(exit_row, params.road_cols - 1);
    evac.to_node = "zz_exit";
    evac.length_m = 1200;
    evac.speed_mps = 27.8;
    evac.lanes = 1;
    evac.saturation_flow = params.evac_saturation_flow;
    evac.jam_density = 0.145;
    roads.edges.push_back(evac);
    city.evac_edge_id = "zz_evac";

    roads.build_index();
}

inline void build_tazs(const CityParams& params, CityData& city, double width, double height) {
    double cw = width / params.taz_cols;
    double ch = height / params.taz_rows;
    int n = 0;
    for (int r = 0; r < params.taz_rows; ++r) {
        for (int c = 0; c < params.taz_cols; ++c) {
            linker::Taz t;
            t.id = "taz" + two(n);
            t.census_tract_id = "tract" + two(n / 2);
            double x0 = c * cw, y0 = r * ch;
            t.rings.push_back({{x0, y0}, {x0 + cw, y0}, {x0 + cw, y0 + ch}, {x0, y0 + ch}});
            t.land_area_m2 = cw * ch;
            city.tazs.push_back(std::move(t));
            ++n;
        }
    }
}

inline void build_parcels(const CityParams& params, CityData& city, double width, double height) {
    rng::Stream rs(params.seed, "parcels");
    const std::vector<CategoryMix>& mix =
        params.category_mix.empty() ? default_category_mix() : params.category_mix;
    std::vector<double> weights;
    for (const CategoryMix& m : mix) weights.push_back(m.weight);

    // Load buses are the anchors so parcels sit inside grid coverage.
    std::vector<const grid::Bus*> anchors;
    std::set<std::string> load_buses;
    for (const grid::Load& l : city.net.loads) load_buses.insert(l.bus_id);
    for (const grid::Bus& b : city.net.buses)
        if (load_buses.count(b.id)) anchors.push_back(&b);

    for (int i = 0; i < params.parcel_count; ++i) {
        linker::Parcel p;
        p.id = "p" + std::string(5 - std::min<std::size_t>(5, std::to_string(i).size()), '0') +
               std::to_string(i);
        const CategoryMix& m = mix[rs.pick_weighted(weights.data(), weights.size())];
        p.category = m.category;
        p.subcategory = m.subcategory;
        if (rs.uniform() < 0.85 && !anchors.empty()) {
            const grid::Bus* bus = anchors[rs.range(0, static_cast<long>(anchors.size()) - 1)];
            p.x = std::clamp(bus->x + rs.uniform(-220, 220), 0.0, width - 0.001);
            p.y = std::clamp(bus->y + rs.uniform(-220, 220), 0.0, height - 0.001);
        } else {
            p.x = rs.uniform(0, width - 0.001);
            p.y = rs.uniform(0, height - 0.001);
        }
        city.parcels.push_back(std::move(p));
    }
}

inline void build_adoption_inputs(const CityParams& params, CityData& city) {
    rng::Stream rs(params.seed, "adoption");

    // Vehicle totals per tract drive households (one vehicle per household).
    std::map<std::string, long> vehicles_by_tract;
    {
        std::vector<linker::Parcel> linked = linker::link_parcels(
            city.parcels, city.net, city.roads, city.tazs, city.estimates, city.manual_counts);
        std::map<std::string, std::string> tract_of_taz;
        for (const linker::Taz& t : city.tazs) tract_of_taz[t.id] = t.census_tract_id;
        for (const linker::Parcel& p : linked)
            if (p.taz_assigned) vehicles_by_tract[tract_of_taz.at(p.taz_id)] += p.vehicle_count;
    }

    // Age table: higher income, newer vehicles. Static across years.
    for (int year = 2019; year <= 2051; ++year) {
        city.age_rows.push_back({static_cast<double>(year), 0.0, 13.0});
        city.age_rows.push_back({static_cast<double>(year), 50000.0, 11.0});
        city.age_rows.push_back({static_cast<double>(year), 75000.0, 9.5});
        city.age_rows.push_back({static_cast<double>(year), 100000.0, 8.5});
    }

    std::set<std::string> tract_ids;
    for (const linker::Taz& t : city.tazs) tract_ids.insert(t.census_tract_id);
    long total_vehicles = 0;
    for (const std::string& tid : tract_ids) {
        adoption::CensusTract tract;
        tract.id = tid;
        tract.households = std::max<long>(1, vehicles_by_tract[tid]);
        total_vehicles += tract.households;
        tract.median_income = std::round(rs.uniform(45000, 110000));
        tract.mean_income = std::round(tract.median_income * 1.08);
        tract.land_area_in_study = 1.0;
        for (const linker::Taz& t : city.tazs)
            if (t.census_tract_id == tid) tract.taz_ids.push_back(t.id);
        std::sort(tract.taz_ids.begin(), tract.taz_ids.end());
        for (const auto& row : city.age_rows) {
            int year = static_cast<int>(row[0]);
            if (tract.mean_income >= row[1]) tract.avg_vehicle_age_by_year[year] = row[2];
        }
        city.tracts.push_back(std::move(tract));
    }

    // National fleet and county share are set so the county fleet matches the
    // city's vehicle total in 2020.
    const double national_2020 = 7.46e6;
    for (int year = 2019; year <= 2051; ++year)
        city.history.fleet_total_by_year[year] =
            std::llround(national_2020 * std::pow(1.006, year - 2020));
    city.history.county_share = static_cast<double>(total_vehicles) / national_2020;
    city.history.seed_year = 2019;
    city.history.seed_ev_count = std::max<long>(1, std::llround(0.004 * total_vehicles));

    // Sales-share history: zero before 2011, slow ramp afterwards.
    for (int year = 2000; year <= 2051; ++year) {
        double share = 0.0;
        if (year >= 2011) share = std::min(0.12, 0.002 * std::pow(1.22, year - 2011));
        city.history.ev_share_by_year[year] = share;
    }

    // Medium and high adoption trajectories; high stays above medium.
    adoption::AdoptionCurve medium, high;
    medium.level = "medium";
    high.level = "high";
    for (int year = 2020; year <= 2050; ++year) {
        double t = (year - 2020) / 20.0;
        medium.penetration_by_year[year] = std::min(0.30, 0.083 * t);
        high.penetration_by_year[year] = std::min(0.60, 0.208 * t);
    }
    city.curves["medium"] = medium;
    city.curves["high"] = high;
}

} // namespace detail

inline CityData generate_city_data(const CityParams& params) {
    params.validate();
    CityData city;
    city.estimates = default_estimate_table();
    city.manual_counts = default_manual_counts();
    double width = (params.road_cols - 1) * params.road_spacing_m;
    double height = (params.road_rows - 1) * params.road_spacing_m;
    detail::build_roads(params, city, width, height);
    detail::build_grid(params, city, width, height);
    detail::build_tazs(params, city, width, height);
    detail::build_parcels(params, city, width, height);
    detail::build_adoption_inputs(params, city);
    return city;
}

// File names inside a dataset directory.
struct DatasetPaths {
    std::filesystem::path dir;
    explicit DatasetPaths(std::filesystem::path d) : dir(std::move(d)) {}
    std::filesystem::path grid() const { return dir / "grid.json"; }
    std::filesystem::path roads() const { return dir / "roads.json"; }
    std::filesystem::path tazs() const { return dir / "tazs.json"; }
    std::filesystem::path parcels() const { return dir / "parcels.csv"; }
    std::filesystem::path linked_parcels() const { return dir / "linked_parcels.csv"; }
    std::filesystem::path tracts() const { return dir / "tracts.csv"; }
    std::filesystem::path age_by_income() const { return dir / "age_by_income.csv"; }
    std::filesystem::path ev_share_history() const { return dir / "ev_share_history.csv"; }
    std::filesystem::path fleet_projection() const { return dir / "fleet_projection.csv"; }
    std::filesystem::path market() const { return dir / "market.csv"; }
    std::filesystem::path adoption_curves() const { return dir / "adoption_curves.csv"; }
    std::filesystem::path vehicle_estimates() const { return dir / "vehicle_estimates.csv"; }
    std::filesystem::path manual_counts() const { return dir / "manual_counts.csv"; }
    std::filesystem::path profiles(const std::string& level) const {
        return dir / ("profiles_" + level + ".csv");
    }
    std::filesystem::path meta() const { return dir / "dataset.json"; }
};

inline void generate_city(const CityParams& params, const std::filesystem::path& dataset_dir) {
    CityData city = generate_city_data(params);
    std::filesystem::create_directories(dataset_dir);
    DatasetPaths paths(dataset_dir);

    grid::save_network(city.net, paths.grid());
    traffic::save_roads(city.roads, paths.roads());
    linker::save_tazs(city.tazs, paths.tazs());
    linker::save_parcels(city.parcels, paths.parcels());
    adoption::save_tracts(city.tracts, paths.tracts());
    city.estimates.save(paths.vehicle_estimates());
    city.manual_counts.save(paths.manual_counts());

    {
        csv::Writer w(paths.age_by_income());
        w.row({"year", "min_income", "avg_age"});
        for (const auto& row : city.age_rows)
            w.row({csv::num(static_cast<long long>(row[0])), csv::num(row[1], 0),
                   csv::num(row[2], 2)});
        w.close();
    }
    {
        csv::Writer w(paths.ev_share_history());
        w.row({"year", "share"});
        for (const auto& [year, share] : city.history.ev_share_by_year)
            w.row({csv::num(year), csv::num(share, 6)});
        w.close();
    }
    {
        csv::Writer w(paths.fleet_projection());
        w.row({"year", "total"});
        for (const auto& [year, total] : city.history.fleet_total_by_year)
            w.row({csv::num(year), csv::num(total)});
        w.close();
    }
    {
        csv::Writer w(paths.market());
        w.row({"key", "value"});
        w.row({"county_share", csv::num(city.history.county_share, 9)});
        w.row({"seed_year", csv::num(city.history.seed_year)});
        w.row({"seed_ev_count", csv::num(city.history.seed_ev_count)});
        w.close();
    }
    {
        csv::Writer w(paths.adoption_curves());
        w.row({"case", "year", "penetration"});
        for (const auto& [level, curve] : city.curves)
            for (const auto& [year, pen] : curve.penetration_by_year)
                w.row({level, csv::num(year), csv::num(pen, 6)});
        w.close();
    }
    {
        jsonio::json meta;
        meta["format_version"] = 1;
        meta["evac_edge"] = city.evac_edge_id;
        meta["seed"] = params.seed;
        meta["substations"] = params.substations;
        meta["feeders_per_substation"] = params.feeders_per_substation;
        meta["buses_per_feeder"] = params.buses_per_feeder;
        meta["parcel_count"] = params.parcel_count;
        meta["taz_count"] = params.taz_rows * params.taz_cols;
        jsonio::save(paths.meta(), meta);
    }
}

inline CityParams params_from_json(const jsonio::json& j) {
    CityParams p;
    p.substations = j.value("substations", p.substations);
    p.feeders_per_substation = j.value("feeders_per_substation", p.feeders_per_substation);
    p.buses_per_feeder = j.value("buses_per_feeder", p.buses_per_feeder);
    p.road_rows = j.value("road_rows", p.road_rows);
    p.road_cols = j.value("road_cols", p.road_cols);
    p.parcel_count = j.value("parcel_count", p.parcel_count);
    p.taz_rows = j.value("taz_rows", p.taz_rows);
    p.taz_cols = j.value("taz_cols", p.taz_cols);
    p.seed = j.value("seed", p.seed);
    if (j.contains("category_mix")) {
        for (const auto& m : j["category_mix"])
            p.category_mix.push_back({m.at("category").get<std::string>(),
                                      m.at("subcategory").get<std::string>(),
                                      m.at("weight").get<double>()});
    }
    return p;
}

} // namespace evtc::synth
