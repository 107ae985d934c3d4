#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "evtc/csv.hpp"
#include "evtc/errors.hpp"
#include "evtc/geometry.hpp"
#include "evtc/jsonio.hpp"

// Mesoscopic link-queue traffic model. Each edge delays a vehicle by its
// free-flow time, then holds it in a FIFO exit queue discharged at the edge's
// saturation rate, subject to storage on the next edge (spillback). Routing is
// shortest path by free-flow travel time on the edge graph.

namespace evtc::traffic {

struct RoadNode {
    std::string id;
    double x = 0, y = 0;
};

struct RoadEdge {
    std::string id;
    std::string from_node;
    std::string to_node;
    double length_m = 0;
    double speed_mps = 0;
    int lanes = 1;
    double saturation_flow = 0.5;  // veh/s/lane
    double jam_density = 0.145;    // veh/m/lane
};

struct RoadNetwork {
    std::vector<RoadNode> nodes;
    std::vector<RoadEdge> edges;

    int edge_index(const std::string& id) const {
        auto it = edge_by_id_.find(id);
        return it == edge_by_id_.end() ? -1 : it->second;
    }
    int node_index(const std::string& id) const {
        auto it = node_by_id_.find(id);
        return it == node_by_id_.end() ? -1 : it->second;
    }

    void build_index() {
        edge_by_id_.clear();
        node_by_id_.clear();
        for (std::size_t i = 0; i < nodes.size(); ++i) node_by_id_[nodes[i].id] = static_cast<int>(i);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (!edge_by_id_.emplace(edges[i].id, static_cast<int>(i)).second)
                throw DataError("duplicate edge id " + edges[i].id);
            const RoadEdge& e = edges[i];
            if (e.length_m <= 0 || e.speed_mps <= 0 || e.saturation_flow <= 0 ||
                e.jam_density <= 0 || e.lanes < 1)
                throw DataError("bad parameters on edge " + e.id);
            if (node_index(e.from_node) < 0 || node_index(e.to_node) < 0)
                throw DataError("edge " + e.id + " references missing node");
        }
        // Successors of e are edges leaving e's to_node, sorted by id so path
        // reconstruction picks the lexicographically smallest optimal route.
        successors_.assign(edges.size(), {});
        predecessors_.assign(edges.size(), {});
        std::unordered_map<std::string, std::vector<int>> out_of_node;
        for (std::size_t i = 0; i < edges.size(); ++i)
            out_of_node[edges[i].from_node].push_back(static_cast<int>(i));
        for (std::size_t i = 0; i < edges.size(); ++i) {
            auto it = out_of_node.find(edges[i].to_node);
            if (it == out_of_node.end()) continue;
            successors_[i] = it->second;
            std::sort(successors_[i].begin(), successors_[i].end(),
                      [this](int a, int b) { return edges[a].id < edges[b].id; });
            for (int s : successors_[i]) predecessors_[s].push_back(static_cast<int>(i));
        }
    }

    const std::vector<int>& successors(int e) const { return successors_[e]; }
    const std::vector<int>& predecessors(int e) const { return predecessors_[e]; }

    double free_flow_time(int e) const { return edges[e].length_m / edges[e].speed_mps; }

private:
    std::unordered_map<std::string, int> edge_by_id_;
    std::unordered_map<std::string, int> node_by_id_;
    std::vector<std::vector<int>> successors_;
    std::vector<std::vector<int>> predecessors_;
};

struct VehicleTrip {
    std::string vehicle_id;
    std::string origin_edge;
    std::string dest_edge;
    double scheduled_departure = 0;
    std::vector<std::string> route; // edge ids, origin first, dest last
    bool is_electric = false;
};

// ---------------------------------------------------------------------------
// Routing

// Cost-to-destination table: one reverse Dijkstra per destination serves every
// origin. cost includes the traversal time of both endpoints.
struct DestTable {
    int dest = -1;
    std::vector<double> cost_to_dest;
    std::vector<int> best_next; // smallest-id successor on an optimal path
};

inline DestTable build_dest_table(const RoadNetwork& net, const std::string& dest_edge) {
    int dest = net.edge_index(dest_edge);
    if (dest < 0) throw DataError("unknown destination edge " + dest_edge);
    const double inf = std::numeric_limits<double>::infinity();
    DestTable t;
    t.dest = dest;
    t.cost_to_dest.assign(net.edges.size(), inf);
    t.best_next.assign(net.edges.size(), -1);

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    t.cost_to_dest[dest] = net.free_flow_time(dest);
    heap.push({t.cost_to_dest[dest], dest});
    while (!heap.empty()) {
        auto [cost, e] = heap.top();
        heap.pop();
        if (cost > t.cost_to_dest[e]) continue;
        for (int pred : net.predecessors(e)) {
            double cand = net.free_flow_time(pred) + cost;
            if (cand < t.cost_to_dest[pred]) {
                t.cost_to_dest[pred] = cand;
                heap.push({cand, pred});
            }
        }
    }

    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        if (t.cost_to_dest[e] == inf || static_cast<int>(e) == dest) continue;
        double remain = t.cost_to_dest[e] - net.free_flow_time(static_cast<int>(e));
        for (int s : net.successors(static_cast<int>(e))) {
            // Exact FP comparison: cost_to_dest was computed by this very
            // expression, so the winning successor reproduces it bit for bit.
            if (t.cost_to_dest[s] == remain) {
                t.best_next[e] = s;
                break;
            }
        }
    }
    return t;
}

inline std::vector<std::string> route_via(const RoadNetwork& net, const DestTable& table,
                                          const std::string& origin_edge) {
    int origin = net.edge_index(origin_edge);
    if (origin < 0) throw DataError("unknown origin edge " + origin_edge);
    if (table.cost_to_dest[origin] == std::numeric_limits<double>::infinity())
        throw UnreachableError("no route from " + origin_edge + " to " +
                               net.edges[table.dest].id);
    std::vector<std::string> route;
    int cur = origin;
    route.push_back(net.edges[cur].id);
    while (cur != table.dest) {
        cur = table.best_next[cur];
        route.push_back(net.edges[cur].id);
    }
    return route;
}

inline std::vector<std::string> route_free_flow(const RoadNetwork& net,
                                                const std::string& origin_edge,
                                                const std::string& dest_edge) {
    DestTable table = build_dest_table(net, dest_edge);
    return route_via(net, table, origin_edge);
}

inline double route_cost(const RoadNetwork& net, const std::vector<std::string>& route) {
    double c = 0;
    for (const std::string& id : route) c += net.free_flow_time(net.edge_index(id));
    return c;
}

// ---------------------------------------------------------------------------
// Simulation

struct VehicleRecord {
    std::string vehicle_id;
    double scheduled_departure = 0;
    double insertion_time = -1; // -1: never inserted
    double arrival_time = -1;   // -1: did not arrive
    double departure_delay = 0;
    double duration = 0;
    double waiting_time = 0;
    double time_loss = 0;
    double route_length = 0;
    bool arrived = false;
};

struct CurvePoint {
    double time_s = 0;
    long cum_departures = 0; // network insertions
    long cum_arrivals = 0;
};

struct TrafficResult {
    std::vector<VehicleRecord> vehicles; // ordered by vehicle_id
    std::vector<CurvePoint> curve;
    long inserted = 0;
    long arrived = 0;
    double last_arrival_time = 0;
    double earliest_scheduled = 0;
    bool hit_max_sim_time = false;
};

struct StepStats {
    long step = 0;
    double time_s = 0;
    long inserted = 0;
    long arrived = 0;
    long on_network = 0;
};

struct SimOptions {
    double dt = 1.0;
    double max_sim_time = 172800; // 48 h
    std::function<void(const StepStats&)> observer;
};

namespace detail {

struct Traveler {
    int veh;
    long entry_step;
    double ready_time;
};

struct Queued {
    int veh;
    double ready_time;
};

} // namespace detail

inline TrafficResult simulate_traffic(const RoadNetwork& net,
                                      const std::vector<VehicleTrip>& trips,
                                      const SimOptions& opts = {}) {
    if (opts.dt <= 0) throw ConfigError("dt must be > 0");

    const std::size_t n_edges = net.edges.size();
    const std::size_t n_veh = trips.size();

    // Resolve and validate routes up front.
    std::vector<std::vector<int>> routes(n_veh);
    for (std::size_t v = 0; v < n_veh; ++v) {
        const VehicleTrip& trip = trips[v];
        if (trip.route.empty()) throw DataError("unrouted trip " + trip.vehicle_id);
        if (trip.route.front() != trip.origin_edge || trip.route.back() != trip.dest_edge)
            throw DataError("route endpoints do not match trip " + trip.vehicle_id);
        routes[v].reserve(trip.route.size());
        int prev = -1;
        for (const std::string& id : trip.route) {
            int e = net.edge_index(id);
            if (e < 0) throw DataError("route of " + trip.vehicle_id + " uses unknown edge " + id);
            if (prev >= 0 && net.edges[prev].to_node != net.edges[e].from_node)
                throw DataError("route of " + trip.vehicle_id + " is not connected at " + id);
            routes[v].push_back(e);
            prev = e;
        }
    }

    // Per-edge queue state. Storage is at least one vehicle so short edges
    // stay traversable; discharge uses a fractional credit capped at one
    // step's quota (never below one vehicle) so sub-unit rates still serve.
    std::vector<long> capacity(n_edges);
    std::vector<double> rate(n_edges), credit(n_edges), cap_credit(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) {
        const RoadEdge& edge = net.edges[e];
        capacity[e] = std::max<long>(1, static_cast<long>(std::floor(
                                            edge.length_m * edge.lanes * edge.jam_density)));
        rate[e] = edge.lanes * edge.saturation_flow * opts.dt;
        cap_credit[e] = std::max(1.0, rate[e]);
        credit[e] = cap_credit[e]; // idle edges start ready to serve
    }

    std::vector<std::deque<detail::Traveler>> traveling(n_edges);
    std::vector<std::deque<detail::Queued>> queued(n_edges);
    std::vector<long> occupancy(n_edges, 0);

    std::vector<int> position(n_veh, 0); // index into route
    std::vector<VehicleRecord> records(n_veh);
    for (std::size_t v = 0; v < n_veh; ++v) {
        records[v].vehicle_id = trips[v].vehicle_id;
        records[v].scheduled_departure = trips[v].scheduled_departure;
        for (int e : routes[v]) records[v].route_length += net.edges[e].length_m;
    }

    // Insertion order: by (scheduled_departure, vehicle_id); blocked vehicles
    // wait in a per-origin-edge FIFO without blocking other edges.
    std::vector<int> order(n_veh);
    for (std::size_t v = 0; v < n_veh; ++v) order[v] = static_cast<int>(v);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (trips[a].scheduled_departure != trips[b].scheduled_departure)
            return trips[a].scheduled_departure < trips[b].scheduled_departure;
        return trips[a].vehicle_id < trips[b].vehicle_id;
    });
    std::size_t next_to_stage = 0;
    std::vector<std::deque<int>> pending(n_edges);
    std::vector<int> edges_with_pending;

    TrafficResult result;
    result.earliest_scheduled = n_veh ? trips[order[0]].scheduled_departure : 0;
    long inserted = 0, arrived = 0;
    double last_arrival = 0;

    auto record_curve = [&](double t) {
        if (!result.curve.empty() && result.curve.back().cum_departures == inserted &&
            result.curve.back().cum_arrivals == arrived)
            return;
        result.curve.push_back({t, inserted, arrived});
    };

    long step = 0;
    const long max_steps = static_cast<long>(std::ceil(opts.max_sim_time / opts.dt));
    std::vector<int> ready_batch;
    while (true) {
        double now = step * opts.dt;

        // 1. Travelers that completed their free-flow time join the exit
        //    queue; on the final route edge they leave the network instead.
        for (std::size_t e = 0; e < n_edges; ++e) {
            auto& trav = traveling[e];
            while (!trav.empty() && trav.front().ready_time <= now) {
                // Same-entry-step vehicles share the same ready_time; order
                // them by vehicle id as the queue tie-break.
                long batch_step = trav.front().entry_step;
                double ready_time = trav.front().ready_time;
                ready_batch.clear();
                while (!trav.empty() && trav.front().entry_step == batch_step &&
                       trav.front().ready_time <= now) {
                    ready_batch.push_back(trav.front().veh);
                    trav.pop_front();
                }
                std::sort(ready_batch.begin(), ready_batch.end(), [&](int a, int b) {
                    return trips[a].vehicle_id < trips[b].vehicle_id;
                });
                for (int v : ready_batch) {
                    if (position[v] + 1 == static_cast<int>(routes[v].size())) {
                        records[v].arrived = true;
                        records[v].arrival_time = ready_time;
                        records[v].duration = ready_time - records[v].insertion_time;
                        ++arrived;
                        last_arrival = std::max(last_arrival, ready_time);
                        --occupancy[e];
                    } else {
                        queued[e].push_back({v, ready_time});
                    }
                }
            }
        }

        // 2. Insertions at step boundaries.
        while (next_to_stage < n_veh &&
               trips[order[next_to_stage]].scheduled_departure <= now) {
            int v = order[next_to_stage++];
            int e = routes[v][0];
            if (pending[e].empty()) edges_with_pending.push_back(e);
            pending[e].push_back(v);
        }
        if (!edges_with_pending.empty()) {
            std::sort(edges_with_pending.begin(), edges_with_pending.end());
            std::vector<int> still_pending;
            for (int e : edges_with_pending) {
                auto& pq = pending[e];
                while (!pq.empty() && occupancy[e] < capacity[e]) {
                    int v = pq.front();
                    pq.pop_front();
                    ++occupancy[e];
                    records[v].insertion_time = now;
                    records[v].departure_delay = now - trips[v].scheduled_departure;
                    traveling[e].push_back({v, step, now + net.free_flow_time(e)});
                    ++inserted;
                }
                if (!pq.empty()) still_pending.push_back(e);
            }
            edges_with_pending = std::move(still_pending);
        }

        // 3. Discharges, edges in index order (ids are unique, index order is
        //    load order and therefore deterministic for a given file).
        for (std::size_t e = 0; e < n_edges; ++e) {
            if (queued[e].empty()) {
                credit[e] = std::min(cap_credit[e], credit[e] + rate[e]);
                continue;
            }
            credit[e] = std::min(cap_credit[e], credit[e] + rate[e]);
            long quota = static_cast<long>(std::floor(credit[e]));
            while (quota > 0 && !queued[e].empty()) {
                const detail::Queued& head = queued[e].front();
                int v = head.veh;
                int next_edge = routes[v][position[v] + 1];
                if (occupancy[next_edge] >= capacity[next_edge]) break; // spillback
                records[v].waiting_time += now - head.ready_time;
                queued[e].pop_front();
                --occupancy[e];
                ++occupancy[next_edge];
                position[v] += 1;
                traveling[next_edge].push_back({v, step, now + net.free_flow_time(next_edge)});
                --quota;
                credit[e] -= 1.0;
            }
        }

        record_curve(now);
        if (opts.observer)
            opts.observer({step, now, inserted, arrived, inserted - arrived});

        bool done = next_to_stage == n_veh && edges_with_pending.empty() &&
                    inserted == arrived;
        if (done) break;
        if (step >= max_steps) {
            result.hit_max_sim_time = true;
            break;
        }
        ++step;
    }

    for (std::size_t v = 0; v < n_veh; ++v) {
        if (records[v].arrived) {
            double ff = 0;
            for (int e : routes[v]) ff += net.free_flow_time(e);
            records[v].time_loss = records[v].duration - ff;
        }
    }
    std::sort(records.begin(), records.end(), [](const VehicleRecord& a, const VehicleRecord& b) {
        return a.vehicle_id < b.vehicle_id;
    });
    result.vehicles = std::move(records);
    result.inserted = inserted;
    result.arrived = arrived;
    result.last_arrival_time = last_arrival;
    return result;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsSummary {
    long vehicles = 0;
    long arrived = 0;
    long unarrived = 0;
    bool complete = false;
    double total_time_to_evacuate = 0; // last arrival - earliest scheduled departure
    std::optional<double> avg_speed;
    std::optional<double> avg_duration;
    std::optional<double> avg_waiting_time;
    std::optional<double> avg_time_loss;
    std::optional<double> avg_departure_delay;
};

inline MetricsSummary traffic_metrics(const TrafficResult& result) {
    if (result.vehicles.empty()) throw DataError("traffic_metrics on empty result");
    MetricsSummary s;
    s.vehicles = static_cast<long>(result.vehicles.size());
    s.arrived = result.arrived;
    s.unarrived = s.vehicles - s.arrived;
    s.complete = s.unarrived == 0;
    if (result.arrived > 0) {
        s.total_time_to_evacuate = result.last_arrival_time - result.earliest_scheduled;
        double speed = 0, dur = 0, wait = 0, loss = 0, delay = 0;
        for (const VehicleRecord& r : result.vehicles) {
            if (!r.arrived) continue;
            speed += r.route_length / r.duration;
            dur += r.duration;
            wait += r.waiting_time;
            loss += r.time_loss;
            delay += r.departure_delay;
        }
        double n = static_cast<double>(result.arrived);
        s.avg_speed = speed / n;
        s.avg_duration = dur / n;
        s.avg_waiting_time = wait / n;
        s.avg_time_loss = loss / n;
        s.avg_departure_delay = delay / n;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Interchange

inline jsonio::json roads_to_json(const RoadNetwork& net) {
    using jsonio::json;
    json j;
    j["format_version"] = 1;
    j["nodes"] = json::array();
    for (const auto& n : net.nodes) j["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
    j["edges"] = json::array();
    for (const auto& e : net.edges)
        j["edges"].push_back({{"id", e.id},
                              {"from_node", e.from_node},
                              {"to_node", e.to_node},
                              {"length", e.length_m},
                              {"speed", e.speed_mps},
                              {"lanes", e.lanes},
                              {"saturation_flow", e.saturation_flow},
                              {"jam_density", e.jam_density}});
    return j;
}

inline RoadNetwork roads_from_json(const jsonio::json& j) {
    RoadNetwork net;
    for (const auto& n : jsonio::require(j, "nodes", "road network"))
        net.nodes.push_back({n.at("id").get<std::string>(), n.at("x").get<double>(),
                             n.at("y").get<double>()});
    for (const auto& e : jsonio::require(j, "edges", "road network")) {
        RoadEdge edge;
        edge.id = e.at("id").get<std::string>();
        edge.from_node = e.at("from_node").get<std::string>();
        edge.to_node = e.at("to_node").get<std::string>();
        edge.length_m = e.at("length").get<double>();
        edge.speed_mps = e.at("speed").get<double>();
        edge.lanes = e.at("lanes").get<int>();
        edge.saturation_flow = e.at("saturation_flow").get<double>();
        edge.jam_density = e.at("jam_density").get<double>();
        net.edges.push_back(std::move(edge));
    }
    net.build_index();
    return net;
}

inline void save_roads(const RoadNetwork& net, const std::filesystem::path& path) {
    jsonio::save(path, roads_to_json(net));
}

inline RoadNetwork load_roads(const std::filesystem::path& path) {
    return roads_from_json(jsonio::load(path));
}

inline void save_curve(const TrafficResult& result, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"time_s", "cumulative_departures", "cumulative_arrivals"});
    for (const CurvePoint& p : result.curve)
        w.row({csv::num(p.time_s, 3), csv::num(p.cum_departures), csv::num(p.cum_arrivals)});
    w.close();
}

inline void save_vehicle_records(const TrafficResult& result, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"vehicle_id", "scheduled_departure", "insertion_time", "arrival_time",
           "departure_delay", "duration", "waiting_time", "time_loss", "route_length",
           "arrived"});
    for (const VehicleRecord& r : result.vehicles) {
        w.row({r.vehicle_id, csv::num(r.scheduled_departure, 3),
               r.insertion_time < 0 ? std::string{} : csv::num(r.insertion_time, 3),
               r.arrived ? csv::num(r.arrival_time, 3) : std::string{},
               csv::num(r.departure_delay, 3),
               r.arrived ? csv::num(r.duration, 3) : std::string{},
               csv::num(r.waiting_time, 3),
               r.arrived ? csv::num(r.time_loss, 3) : std::string{},
               csv::num(r.route_length, 3), r.arrived ? "1" : "0"});
    }
    w.close();
}

} // namespace evtc::traffic
