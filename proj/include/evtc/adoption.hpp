#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "evtc/csv.hpp"
#include "evtc/errors.hpp"
#include "evtc/rng.hpp"

// Per-TAZ electric-vehicle fractions. The base case accumulates yearly EV
// additions from lagged sales shares (lag = tract average vehicle age); the
// medium/high cases apply an exogenous adoption curve; the extreme case keeps
// the high-case EVs and flips random extra vehicles to reach a target rate.
// All exogenous series arrive as data files.

namespace evtc::adoption {

struct CensusTract {
    std::string id;
    long households = 0;
    double median_income = 0;
    double mean_income = 0;
    double land_area_in_study = 1.0; // fraction of the tract inside the study area
    std::vector<std::string> taz_ids;
    std::map<int, double> avg_vehicle_age_by_year;
};

struct MarketHistory {
    std::map<int, double> ev_share_by_year;
    std::map<int, long> fleet_total_by_year; // national fleet
    double county_share = 0;                 // county fraction of the national fleet
    int seed_year = 0;                       // registration snapshot year
    long seed_ev_count = 0;                  // county EVs registered in seed_year
};

struct AdoptionCurve {
    std::string level; // medium | high
    std::map<int, double> penetration_by_year;
};

struct TazEvProfile {
    std::string taz_id;
    int year = 0;
    long total_vehicles = 0;
    double ev_fraction = 0;
};

// ---------------------------------------------------------------------------
// Integer allocation

// Largest-remainder apportionment; remainder ties go to the smallest index.
inline std::vector<long> allocate_proportional(long total, const std::vector<double>& weights) {
    for (double w : weights)
        if (w < 0) throw ConfigError("allocate_proportional: negative weight");
    std::vector<long> out(weights.size(), 0);
    if (total == 0) return out;
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (sum <= 0) throw ConfigError("allocate_proportional: zero total weight for nonzero total");

    std::vector<double> remainder(weights.size());
    long assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double quota = total * weights[i] / sum;
        out[i] = static_cast<long>(std::floor(quota));
        remainder[i] = quota - out[i];
        assigned += out[i];
    }
    std::vector<std::size_t> idx(weights.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (long k = 0; k < total - assigned; ++k) out[idx[k]] += 1;
    return out;
}

// ---------------------------------------------------------------------------
// Tract -> TAZ conversion

// Tract counts are first scaled by the in-study land-area fraction (rounded),
// then split equally among the tract's TAZs.
inline std::map<std::string, long> tract_to_taz(const std::map<std::string, long>& by_tract,
                                                const std::vector<CensusTract>& tracts) {
    std::map<std::string, const CensusTract*> tract_by_id;
    for (const CensusTract& t : tracts) tract_by_id[t.id] = &t;

    std::map<std::string, long> out;
    for (const auto& [tract_id, count] : by_tract) {
        auto it = tract_by_id.find(tract_id);
        if (it == tract_by_id.end()) throw DataError("unknown tract " + tract_id);
        const CensusTract& tract = *it->second;
        if (tract.taz_ids.empty()) throw DataError("tract " + tract_id + " has no TAZs");
        long scaled = std::llround(count * tract.land_area_in_study);
        std::vector<double> equal(tract.taz_ids.size(), 1.0);
        std::vector<long> split = allocate_proportional(scaled, equal);
        for (std::size_t i = 0; i < tract.taz_ids.size(); ++i)
            out[tract.taz_ids[i]] += split[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared pieces

namespace detail {

inline std::vector<double> tract_weights(const std::vector<CensusTract>& tracts) {
    // Joint proportionality to households and median income, as a product.
    std::vector<double> w;
    w.reserve(tracts.size());
    for (const CensusTract& t : tracts) w.push_back(t.households * t.median_income);
    return w;
}

inline long county_fleet(const MarketHistory& history, int year) {
    auto it = history.fleet_total_by_year.find(year);
    if (it == history.fleet_total_by_year.end())
        throw DataError("fleet projection missing year " + std::to_string(year));
    return std::llround(it->second * history.county_share);
}

// Household-proportional tract fleets for one year.
inline std::map<std::string, long> tract_fleets(const std::vector<CensusTract>& tracts,
                                                const MarketHistory& history, int year) {
    std::vector<double> hh;
    hh.reserve(tracts.size());
    for (const CensusTract& t : tracts) hh.push_back(static_cast<double>(t.households));
    std::vector<long> alloc = allocate_proportional(county_fleet(history, year), hh);
    std::map<std::string, long> out;
    for (std::size_t i = 0; i < tracts.size(); ++i) out[tracts[i].id] = alloc[i];
    return out;
}

inline std::vector<TazEvProfile> profiles_for_year(const std::map<std::string, long>& ev_by_tract,
                                                   const std::vector<CensusTract>& tracts,
                                                   const MarketHistory& history, int year) {
    std::map<std::string, long> ev_taz = tract_to_taz(ev_by_tract, tracts);
    std::map<std::string, long> fleet_taz = tract_to_taz(tract_fleets(tracts, history, year), tracts);
    std::vector<TazEvProfile> out;
    for (const auto& [taz_id, fleet] : fleet_taz) {
        TazEvProfile p;
        p.taz_id = taz_id;
        p.year = year;
        p.total_vehicles = fleet;
        long evs = 0;
        auto it = ev_taz.find(taz_id);
        if (it != ev_taz.end()) evs = it->second;
        p.ev_fraction = fleet > 0 ? std::min(1.0, static_cast<double>(evs) / fleet) : 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

inline double ev_share_at(const MarketHistory& history, int year) {
    auto it = history.ev_share_by_year.find(year);
    if (it == history.ev_share_by_year.end())
        throw DataError("ev share history missing year " + std::to_string(year));
    return it->second;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Base case

// Seed registrations are spread over tracts proportionally to households x
// median income; each following year adds (tract fleet / avg vehicle age) x
// ev_share(year - round(avg age)) new EVs per tract.
inline std::vector<TazEvProfile> base_case_fractions(const std::vector<CensusTract>& tracts,
                                                     const MarketHistory& history, int start_year,
                                                     int target_year) {
    if (target_year < start_year) throw ConfigError("target_year before start_year");
    std::vector<double> w = detail::tract_weights(tracts);
    std::vector<long> seed = allocate_proportional(history.seed_ev_count, w);

    std::map<std::string, double> cumulative;
    for (std::size_t i = 0; i < tracts.size(); ++i)
        cumulative[tracts[i].id] = static_cast<double>(seed[i]);

    std::vector<TazEvProfile> out;
    for (int year = start_year; year <= target_year; ++year) {
        if (year > start_year) {
            std::map<std::string, long> fleets = detail::tract_fleets(tracts, history, year);
            for (const CensusTract& t : tracts) {
                auto age_it = t.avg_vehicle_age_by_year.find(year);
                if (age_it == t.avg_vehicle_age_by_year.end())
                    throw DataError("tract " + t.id + " missing average vehicle age for " +
                                    std::to_string(year));
                int lag = static_cast<int>(std::lround(age_it->second));
                double share = detail::ev_share_at(history, year - lag);
                double turnover = age_it->second > 0
                                      ? static_cast<double>(fleets[t.id]) / age_it->second
                                      : 0.0;
                double& cum = cumulative[t.id];
                cum = std::min(cum + share * turnover, static_cast<double>(fleets[t.id]));
            }
        }
        std::map<std::string, long> ev_by_tract;
        for (const auto& [id, cum] : cumulative) ev_by_tract[id] = std::llround(cum);
        auto year_profiles = detail::profiles_for_year(ev_by_tract, tracts, history, year);
        out.insert(out.end(), year_profiles.begin(), year_profiles.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Curve cases (medium / high)

inline std::vector<TazEvProfile> curve_case_fractions(const std::vector<CensusTract>& tracts,
                                                      const AdoptionCurve& curve,
                                                      const MarketHistory& history, int year) {
    auto it = curve.penetration_by_year.find(year);
    if (it == curve.penetration_by_year.end())
        throw ConfigError("adoption curve '" + curve.level + "' does not cover year " +
                          std::to_string(year));
    long county_ev = std::llround(it->second * detail::county_fleet(history, year));
    std::vector<long> alloc = allocate_proportional(county_ev, detail::tract_weights(tracts));
    std::map<std::string, long> ev_by_tract;
    for (std::size_t i = 0; i < tracts.size(); ++i) ev_by_tract[tracts[i].id] = alloc[i];
    return detail::profiles_for_year(ev_by_tract, tracts, history, year);
}

// ---------------------------------------------------------------------------
// Extreme case

// Flips non-EVs to electric, chosen uniformly at random (seeded), until the
// overall rate reaches target_rate with the minimal number of flips. Existing
// EVs always stay electric, so the output set is a superset of the input set.
inline std::vector<std::string> extend_to_extreme(std::vector<std::pair<std::string, bool>>& fleet,
                                                  double target_rate, std::uint64_t seed) {
    long total = static_cast<long>(fleet.size());
    long current = 0;
    for (const auto& [id, ev] : fleet)
        if (ev) ++current;
    long needed = static_cast<long>(std::ceil(target_rate * total)) - current;
    if (needed < 0) throw ConfigError("extreme target below current EV rate");
    if (needed == 0) return {};

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < fleet.size(); ++i)
        if (!fleet[i].second) candidates.push_back(i);
    if (needed > static_cast<long>(candidates.size()))
        throw ConfigError("extreme target exceeds fleet size");

    // Hash order over ids is a uniform random permutation for a fixed seed.
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        auto ha = rng::keyed_u64(seed, "extreme", fleet[a].first);
        auto hb = rng::keyed_u64(seed, "extreme", fleet[b].first);
        if (ha != hb) return ha < hb;
        return fleet[a].first < fleet[b].first;
    });

    std::vector<std::string> flipped;
    for (long k = 0; k < needed; ++k) {
        fleet[candidates[k]].second = true;
        flipped.push_back(fleet[candidates[k]].first);
    }
    std::sort(flipped.begin(), flipped.end());
    return flipped;
}

// ---------------------------------------------------------------------------
// Interchange

inline std::vector<CensusTract> load_tracts(const std::filesystem::path& tracts_csv,
                                            const std::filesystem::path& age_by_income_csv) {
    csv::Table ages = csv::Table::read(age_by_income_csv);
    std::size_t yc = ages.col("year"), mc = ages.col("min_income"), ac = ages.col("avg_age");
    // year -> (min_income, age), sorted by min_income
    std::map<int, std::vector<std::pair<double, double>>> age_rows;
    for (std::size_t r = 0; r < ages.size(); ++r)
        age_rows[static_cast<int>(ages.int_at(r, yc))].push_back(
            {ages.num_at(r, mc), ages.num_at(r, ac)});
    for (auto& [year, rows] : age_rows) std::sort(rows.begin(), rows.end());

    auto age_for = [&](int year, double income) {
        auto it = age_rows.find(year);
        if (it == age_rows.end()) return -1.0;
        double age = -1.0;
        for (const auto& [min_income, a] : it->second)
            if (income >= min_income) age = a;
        return age;
    };

    csv::Table t = csv::Table::read(tracts_csv);
    std::size_t id = t.col("id"), hh = t.col("households");
    std::size_t med = t.col("median_income"), mean = t.col("mean_income");
    std::size_t area = t.col("land_area_in_study"), tz = t.col("taz_ids");
    std::vector<CensusTract> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        CensusTract tract;
        tract.id = t.at(r, id);
        tract.households = t.int_at(r, hh);
        tract.median_income = t.num_at(r, med);
        tract.mean_income = t.num_at(r, mean);
        tract.land_area_in_study = t.num_at(r, area);
        for (const std::string& taz : csv::Table::split(t.at(r, tz), ';'))
            if (!taz.empty()) tract.taz_ids.push_back(taz);
        for (const auto& [year, rows] : age_rows) {
            double a = age_for(year, tract.mean_income);
            if (a > 0) tract.avg_vehicle_age_by_year[year] = a;
        }
        out.push_back(std::move(tract));
    }
    return out;
}

inline void save_tracts(const std::vector<CensusTract>& tracts,
                        const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"id", "households", "median_income", "mean_income", "land_area_in_study", "taz_ids"});
    for (const CensusTract& t : tracts) {
        std::string tazs;
        for (std::size_t i = 0; i < t.taz_ids.size(); ++i) {
            if (i) tazs += ';';
            tazs += t.taz_ids[i];
        }
        w.row({t.id, csv::num(t.households), csv::num(t.median_income, 2),
               csv::num(t.mean_income, 2), csv::num(t.land_area_in_study, 4), tazs});
    }
    w.close();
}

inline MarketHistory load_market_history(const std::filesystem::path& ev_share_csv,
                                         const std::filesystem::path& fleet_csv,
                                         const std::filesystem::path& market_csv) {
    MarketHistory h;
    csv::Table shares = csv::Table::read(ev_share_csv);
    for (std::size_t r = 0; r < shares.size(); ++r)
        h.ev_share_by_year[static_cast<int>(shares.int_at(r, shares.col("year")))] =
            shares.num_at(r, shares.col("share"));
    csv::Table fleet = csv::Table::read(fleet_csv);
    for (std::size_t r = 0; r < fleet.size(); ++r)
        h.fleet_total_by_year[static_cast<int>(fleet.int_at(r, fleet.col("year")))] =
            fleet.int_at(r, fleet.col("total"));
    csv::Table market = csv::Table::read(market_csv);
    std::size_t kc = market.col("key"), vc = market.col("value");
    for (std::size_t r = 0; r < market.size(); ++r) {
        const std::string& key = market.at(r, kc);
        if (key == "county_share")
            h.county_share = market.num_at(r, vc);
        else if (key == "seed_year")
            h.seed_year = static_cast<int>(market.int_at(r, vc));
        else if (key == "seed_ev_count")
            h.seed_ev_count = market.int_at(r, vc);
    }
    if (h.county_share <= 0) throw DataError("market table missing county_share");
    return h;
}

inline std::map<std::string, AdoptionCurve> load_curves(const std::filesystem::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t cc = t.col("case"), yc = t.col("year"), pc = t.col("penetration");
    std::map<std::string, AdoptionCurve> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::string& level = t.at(r, cc);
        out[level].level = level;
        out[level].penetration_by_year[static_cast<int>(t.int_at(r, yc))] = t.num_at(r, pc);
    }
    return out;
}

// Heatmap layout: the leading columns are (year, taz_index, fraction) with the
// index taken over sorted TAZ ids, 1-based.
inline void save_profiles(const std::vector<TazEvProfile>& profiles,
                          const std::filesystem::path& path) {
    std::vector<std::string> taz_ids;
    for (const TazEvProfile& p : profiles) taz_ids.push_back(p.taz_id);
    std::sort(taz_ids.begin(), taz_ids.end());
    taz_ids.erase(std::unique(taz_ids.begin(), taz_ids.end()), taz_ids.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < taz_ids.size(); ++i) index[taz_ids[i]] = i + 1;

    std::vector<TazEvProfile> sorted = profiles;
    std::sort(sorted.begin(), sorted.end(), [](const TazEvProfile& a, const TazEvProfile& b) {
        if (a.year != b.year) return a.year < b.year;
        return a.taz_id < b.taz_id;
    });
    csv::Writer w(path);
    w.row({"year", "taz_index", "fraction", "taz_id", "total_vehicles"});
    for (const TazEvProfile& p : sorted)
        w.row({csv::num(p.year), csv::num(index.at(p.taz_id)), csv::num(p.ev_fraction, 6),
               p.taz_id, csv::num(p.total_vehicles)});
    w.close();
}

inline std::vector<TazEvProfile> load_profiles(const std::filesystem::path& path) {
    csv::Table t = csv::Table::read(path);
    std::size_t yc = t.col("year"), fc = t.col("fraction"), ic = t.col("taz_id");
    std::size_t vc = t.col("total_vehicles");
    std::vector<TazEvProfile> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        TazEvProfile p;
        p.year = static_cast<int>(t.int_at(r, yc));
        p.ev_fraction = t.num_at(r, fc);
        p.taz_id = t.at(r, ic);
        p.total_vehicles = t.int_at(r, vc);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace evtc::adoption
