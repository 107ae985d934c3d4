#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "evtc/errors.hpp"
#include "evtc/grid.hpp"
#include "evtc/phasor.hpp"

// Unbalanced three-phase power flow for radial feeders via forward-backward
// sweep, plus the discrete control loop (regulator taps, switched capacitors)
// and violation detection.
//
// Conventions:
//   - internal arithmetic is per-unit on a common apparent-power base with
//     per-bus voltage bases; reported voltages are L-N volts, currents are
//     downstream-side amps
//   - transformer model: ideal per-phase ratio t (V_down = t * V_up,
//     I_up = t * I_down) followed by the series impedance on the downstream
//     side; lines are the t = 1 case
//   - loads are constant power, capacitors constant admittance

namespace evtc::powerflow {

using grid::FeederTree;

struct SolveOptions {
    double tolerance_pu = 1e-8;
    int max_iterations = 100;
    double s_base_va = 1e6; // three-phase apparent power base
};

struct PowerFlowSolution {
    std::map<std::string, PhaseVec> bus_voltage_v;    // L-N volts per phase
    std::map<std::string, PhaseVec> branch_current_a; // downstream amps per phase
    bool converged = false;
    int iterations = 0;
    double max_mismatch_pu = std::numeric_limits<double>::infinity();
};

namespace detail {

// Per-unit state vectors indexed like the feeder arrays.
struct PuState {
    std::vector<PhaseVec> v;      // bus voltage, pu
    std::vector<PhaseVec> i_br;   // branch current at downstream side, pu
    bool converged = false;
    int iterations = 0;
    double max_mismatch = std::numeric_limits<double>::infinity();
};

struct PuModel {
    std::vector<PhaseMat> z_pu;            // per branch
    std::vector<std::array<double, 3>> tap; // per branch effective ratio
    std::vector<PhaseVec> s_load_pu;       // per bus constant-power load
    std::vector<std::array<double, 3>> b_shunt_pu; // per bus capacitive susceptance (on state)
    std::vector<PhaseMask> phases;         // per bus
    double s_phase_base = 0;               // single-phase VA base
};

inline double effective_tap(const grid::Branch& br, const FeederTree& f, std::size_t branch_idx,
                            int phase) {
    double step = 0.0;
    for (std::size_t r = 0; r < f.regulators.size(); ++r)
        if (f.regulator_branch[r] == static_cast<int>(branch_idx)) {
            step = f.regulators[r].step_size;
            break;
        }
    return br.tap_ratio[phase] * (1.0 + br.tap_pos * step);
}

inline PuModel build_model(const FeederTree& f, const SolveOptions& opts) {
    PuModel m;
    const double s1 = opts.s_base_va / 3.0;
    m.s_phase_base = s1;
    m.phases.reserve(f.buses.size());
    for (const grid::Bus& b : f.buses) m.phases.push_back(b.phases);

    m.z_pu.resize(f.branches.size());
    m.tap.resize(f.branches.size());
    for (std::size_t k = 0; k < f.branches.size(); ++k) {
        const grid::Branch& br = f.branches[k];
        const grid::Bus& child = f.buses[f.branch_child[k]];
        double z_base = child.base_voltage * child.base_voltage / s1;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m.z_pu[k][i][j] = br.z_ohm[i][j] / z_base;
        for (int p = 0; p < 3; ++p)
            m.tap[k][p] = (br.kind == grid::BranchKind::Transformer)
                              ? effective_tap(br, f, k, p)
                              : 1.0;
        if (br.kind == grid::BranchKind::Transformer) {
            for (int p = 0; p < 3; ++p)
                if (has_phase(child.phases, p) && std::abs(m.z_pu[k][p][p]) == 0.0)
                    throw NumericError("singular transformer impedance on branch " + br.id);
        }
    }

    m.s_load_pu.assign(f.buses.size(), {});
    for (std::size_t b = 0; b < f.buses.size(); ++b)
        for (int p = 0; p < 3; ++p) m.s_load_pu[b][p] = f.load_va[b][p] / s1;

    m.b_shunt_pu.assign(f.buses.size(), {0.0, 0.0, 0.0});
    for (std::size_t c = 0; c < f.capacitors.size(); ++c) {
        if (!f.capacitors[c].switched_on) continue;
        int b = f.capacitor_bus[c];
        for (int p = 0; p < 3; ++p)
            if (has_phase(m.phases[b], p))
                m.b_shunt_pu[b][p] += f.capacitors[c].kvar_per_phase * 1000.0 / s1;
    }
    return m;
}

// Node current drawn at bus b for voltage v: constant-power load plus shunt.
inline PhaseVec node_current(const PuModel& m, std::size_t b, const PhaseVec& v) {
    PhaseVec i{};
    for (int p = 0; p < 3; ++p) {
        if (!has_phase(m.phases[b], p)) continue;
        Complex vp = v[p];
        if (std::abs(vp) > 1e-12 && m.s_load_pu[b][p] != Complex{0, 0})
            i[p] += std::conj(m.s_load_pu[b][p] / vp);
        if (m.b_shunt_pu[b][p] != 0.0) i[p] += Complex{0, m.b_shunt_pu[b][p]} * vp;
    }
    return i;
}

inline PuState sweep(const FeederTree& f, const PuModel& m, double source_voltage_pu,
                     const SolveOptions& opts) {
    const std::size_t nbus = f.buses.size();
    const std::size_t nbr = f.branches.size();
    PuState st;
    st.v.assign(nbus, {});
    st.i_br.assign(nbr, {});

    const PhaseVec rot = unit_rotation();
    for (std::size_t b = 0; b < nbus; ++b)
        for (int p = 0; p < 3; ++p)
            if (has_phase(m.phases[b], p)) st.v[b][p] = source_voltage_pu * rot[p];

    // Branches are stored in BFS order: parents precede children, so a reverse
    // pass aggregates currents and a forward pass propagates voltages.
    std::vector<PhaseVec> node_inj(nbus);
    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        for (std::size_t b = 0; b < nbus; ++b) node_inj[b] = node_current(m, b, st.v[b]);

        // Backward: downstream-side branch currents.
        std::vector<PhaseVec> accum = node_inj;
        for (std::size_t k = nbr; k-- > 0;) {
            int child = f.branch_child[k];
            int parent = f.branch_parent[k];
            st.i_br[k] = accum[child];
            for (int p = 0; p < 3; ++p) accum[parent][p] += m.tap[k][p] * st.i_br[k][p];
        }

        // Forward: voltage updates from the fixed root.
        double mismatch = 0.0;
        for (std::size_t k = 0; k < nbr; ++k) {
            int child = f.branch_child[k];
            int parent = f.branch_parent[k];
            PhaseVec v_up;
            for (int p = 0; p < 3; ++p) v_up[p] = m.tap[k][p] * st.v[parent][p];
            PhaseVec drop = mat_vec(m.z_pu[k], st.i_br[k]);
            PhaseVec v_new;
            for (int p = 0; p < 3; ++p) v_new[p] = v_up[p] - drop[p];
            mask_phases(v_new, m.phases[child]);
            for (int p = 0; p < 3; ++p)
                mismatch = std::max(mismatch, std::abs(v_new[p] - st.v[child][p]));
            st.v[child] = v_new;
        }

        st.iterations = iter;
        st.max_mismatch = mismatch;
        if (mismatch <= opts.tolerance_pu) {
            st.converged = true;
            break;
        }
    }

    // Final backward pass so reported currents are consistent with the final
    // voltages (KCL holds on the reported solution).
    for (std::size_t b = 0; b < nbus; ++b) node_inj[b] = node_current(m, b, st.v[b]);
    std::vector<PhaseVec> accum = node_inj;
    for (std::size_t k = nbr; k-- > 0;) {
        int child = f.branch_child[k];
        int parent = f.branch_parent[k];
        st.i_br[k] = accum[child];
        for (int p = 0; p < 3; ++p) accum[parent][p] += m.tap[k][p] * st.i_br[k][p];
    }
    return st;
}

inline PowerFlowSolution to_solution(const FeederTree& f, const PuModel& m, const PuState& st) {
    PowerFlowSolution sol;
    sol.converged = st.converged;
    sol.iterations = st.iterations;
    sol.max_mismatch_pu = st.max_mismatch;
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        PhaseVec volts;
        for (int p = 0; p < 3; ++p) volts[p] = st.v[b][p] * f.buses[b].base_voltage;
        sol.bus_voltage_v[f.buses[b].id] = volts;
    }
    for (std::size_t k = 0; k < f.branches.size(); ++k) {
        const grid::Bus& child = f.buses[f.branch_child[k]];
        double i_base = m.s_phase_base / child.base_voltage;
        PhaseVec amps;
        for (int p = 0; p < 3; ++p) amps[p] = st.i_br[k][p] * i_base;
        sol.branch_current_a[f.branches[k].id] = amps;
    }
    return sol;
}

} // namespace detail

inline PowerFlowSolution solve_feeder(const FeederTree& feeder, double source_voltage_pu,
                                      const SolveOptions& opts = {}) {
    detail::PuModel model = detail::build_model(feeder, opts);
    detail::PuState st = detail::sweep(feeder, model, source_voltage_pu, opts);
    return detail::to_solution(feeder, model, st);
}

// ---------------------------------------------------------------------------
// Discrete controls

struct ControlAction {
    int round = 0;
    std::string device_id;
    std::string action; // tap_up | tap_down | cap_on | cap_off
    double measured_v_pu = 0;
    int tap_pos = 0; // after the action, taps only
};

using ControlLog = std::vector<ControlAction>;

struct ControlOptions {
    int round_cap = 30;
    SolveOptions solve;
};

struct ControlOutcome {
    FeederTree feeder;
    PowerFlowSolution solution;
    ControlLog log;
    bool round_cap_hit = false;
};

namespace detail {

// Devices monitor the minimum live-phase voltage magnitude at their bus.
inline double monitored_v_pu(const FeederTree& f, const PuState& st, int bus) {
    double vmin = std::numeric_limits<double>::infinity();
    for (int p = 0; p < 3; ++p)
        if (has_phase(f.buses[bus].phases, p)) vmin = std::min(vmin, std::abs(st.v[bus][p]));
    return vmin;
}

} // namespace detail

// Alternates a solve with one discrete adjustment round (each regulator may
// move one tap step toward its band, each capacitor may toggle once) until no
// device requests a change or the round cap is hit. Devices act in a fixed
// order: regulators by id, then capacitors by id.
inline ControlOutcome run_discrete_controls(FeederTree feeder, double source_voltage_pu,
                                            const ControlOptions& opts = {}) {
    ControlOutcome out;
    out.feeder = std::move(feeder);
    FeederTree& f = out.feeder;

    std::vector<std::size_t> reg_order(f.regulators.size());
    for (std::size_t i = 0; i < reg_order.size(); ++i) reg_order[i] = i;
    std::sort(reg_order.begin(), reg_order.end(), [&](std::size_t a, std::size_t b) {
        return f.regulators[a].id < f.regulators[b].id;
    });
    std::vector<std::size_t> cap_order(f.capacitors.size());
    for (std::size_t i = 0; i < cap_order.size(); ++i) cap_order[i] = i;
    std::sort(cap_order.begin(), cap_order.end(), [&](std::size_t a, std::size_t b) {
        return f.capacitors[a].id < f.capacitors[b].id;
    });

    detail::PuState st;
    int round = 0;
    while (true) {
        detail::PuModel model = detail::build_model(f, opts.solve);
        st = detail::sweep(f, model, source_voltage_pu, opts.solve);
        if (!st.converged) {
            out.solution = detail::to_solution(f, model, st);
            return out; // caller decides how to treat the unconverged interval
        }
        if (round >= opts.round_cap) {
            out.round_cap_hit = true;
            out.solution = detail::to_solution(f, model, st);
            return out;
        }
        ++round;

        bool changed = false;
        for (std::size_t ri : reg_order) {
            const grid::Regulator& reg = f.regulators[ri];
            grid::Branch& br = f.branches[f.regulator_branch[ri]];
            double v = detail::monitored_v_pu(f, st, f.regulator_bus[ri]);
            if (v < reg.target_pu - reg.band_pu / 2.0 && br.tap_pos < reg.step_count) {
                br.tap_pos += 1;
                out.log.push_back({round, reg.id, "tap_up", v, br.tap_pos});
                changed = true;
            } else if (v > reg.target_pu + reg.band_pu / 2.0 && br.tap_pos > -reg.step_count) {
                br.tap_pos -= 1;
                out.log.push_back({round, reg.id, "tap_down", v, br.tap_pos});
                changed = true;
            }
        }
        for (std::size_t ci : cap_order) {
            grid::Capacitor& cap = f.capacitors[ci];
            double v = detail::monitored_v_pu(f, st, f.capacitor_bus[ci]);
            if (!cap.switched_on && v < cap.v_on_pu) {
                cap.switched_on = true;
                out.log.push_back({round, cap.id, "cap_on", v, 0});
                changed = true;
            } else if (cap.switched_on && v > cap.v_off_pu) {
                cap.switched_on = false;
                out.log.push_back({round, cap.id, "cap_off", v, 0});
                changed = true;
            }
        }
        if (!changed) {
            detail::PuModel model2 = detail::build_model(f, opts.solve);
            out.solution = detail::to_solution(f, model2, st);
            return out;
        }
    }
}

// ---------------------------------------------------------------------------
// Violations

// Severity buckets per the half-open convention: (0, 10%], (10%, 50%],
// (50%, 100%], (100%, inf). Boundary severities land in the lower bucket.
inline int severity_bucket(double severity) {
    if (severity <= 0.10) return 0;
    if (severity <= 0.50) return 1;
    if (severity <= 1.00) return 2;
    return 3;
}

inline const char* bucket_label(int bucket) {
    switch (bucket) {
        case 0: return "0-10%";
        case 1: return "10-50%";
        case 2: return "50-100%";
        case 3: return ">100%";
        default: return "?";
    }
}

struct Overload {
    std::string branch_id;
    int phase = 0;           // worst phase
    double severity = 0;     // |I| / i_rated - 1, > 0
    int bucket = 0;
};

struct Undervoltage {
    std::string bus_id;
    int phase = 0;
    double v_pu = 0;
};

struct ViolationReport {
    int interval_index = 0;
    std::vector<Overload> overloads;
    std::vector<Undervoltage> undervoltages;
};

// Overload iff max-phase current strictly exceeds the rating; undervoltage iff
// any live phase drops below the threshold.
inline ViolationReport detect_violations(const PowerFlowSolution& solution,
                                         const grid::DistributionNetwork& net,
                                         double v_threshold_pu) {
    if (!solution.converged)
        throw NumericError("detect_violations requires a converged solution");

    ViolationReport report;
    std::map<std::string, const grid::Branch*> branch_by_id;
    for (const grid::Branch& br : net.branches) branch_by_id[br.id] = &br;
    std::map<std::string, const grid::Bus*> bus_by_id;
    for (const grid::Bus& b : net.buses) bus_by_id[b.id] = &b;

    for (const auto& [branch_id, amps] : solution.branch_current_a) {
        auto it = branch_by_id.find(branch_id);
        if (it == branch_by_id.end()) continue;
        const grid::Branch& br = *it->second;
        double imax = 0;
        int worst = 0;
        for (int p = 0; p < 3; ++p) {
            double mag = std::abs(amps[p]);
            if (mag > imax) {
                imax = mag;
                worst = p;
            }
        }
        if (imax > br.i_rated_a) {
            double severity = imax / br.i_rated_a - 1.0;
            report.overloads.push_back({branch_id, worst, severity, severity_bucket(severity)});
        }
    }

    for (const auto& [bus_id, volts] : solution.bus_voltage_v) {
        auto it = bus_by_id.find(bus_id);
        if (it == bus_by_id.end()) continue;
        const grid::Bus& bus = *it->second;
        for (int p = 0; p < 3; ++p) {
            if (!has_phase(bus.phases, p)) continue;
            double v_pu = std::abs(volts[p]) / bus.base_voltage;
            if (v_pu < v_threshold_pu) report.undervoltages.push_back({bus_id, p, v_pu});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Solution checks (used by tests and the run report)

struct PowerBalance {
    Complex source_va;
    Complex load_va;   // constant-power loads plus capacitor injection
    Complex loss_va;   // series losses
    double relative_error = 0;
};

namespace detail {

inline PhaseVec v_pu_of(const FeederTree& f, const PowerFlowSolution& sol, int bus) {
    PhaseVec v = sol.bus_voltage_v.at(f.buses[bus].id);
    for (int p = 0; p < 3; ++p) v[p] /= f.buses[bus].base_voltage;
    return v;
}

inline PhaseVec i_pu_of(const FeederTree& f, const PowerFlowSolution& sol, std::size_t k,
                        double s_phase_base) {
    const grid::Bus& child = f.buses[f.branch_child[k]];
    double i_base = s_phase_base / child.base_voltage;
    PhaseVec i = sol.branch_current_a.at(f.branches[k].id);
    for (int p = 0; p < 3; ++p) i[p] /= i_base;
    return i;
}

} // namespace detail

inline PowerBalance power_balance(const FeederTree& f, const PowerFlowSolution& sol,
                                  const SolveOptions& opts = {}) {
    detail::PuModel m = detail::build_model(f, opts);
    const double s1 = m.s_phase_base;
    PowerBalance pb;

    // Source injection: root voltage times conj of total current leaving the
    // root (branch currents referred to the upstream side plus root load).
    PhaseVec v_root = detail::v_pu_of(f, sol, 0);
    PhaseVec i_root = detail::node_current(m, 0, v_root);
    for (std::size_t k = 0; k < f.branches.size(); ++k) {
        if (f.branch_parent[k] != 0) continue;
        PhaseVec i = detail::i_pu_of(f, sol, k, s1);
        for (int p = 0; p < 3; ++p) i_root[p] += m.tap[k][p] * i[p];
    }
    for (int p = 0; p < 3; ++p) pb.source_va += v_root[p] * std::conj(i_root[p]);

    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        PhaseVec v = detail::v_pu_of(f, sol, b);
        for (int p = 0; p < 3; ++p) {
            if (!has_phase(f.buses[b].phases, p)) continue;
            if (std::abs(v[p]) > 1e-12) pb.load_va += m.s_load_pu[b][p];
            // Shunt capacitors draw -j*B*|V|^2.
            if (m.b_shunt_pu[b][p] != 0.0)
                pb.load_va += Complex{0, -m.b_shunt_pu[b][p]} * std::norm(v[p]);
        }
    }

    for (std::size_t k = 0; k < f.branches.size(); ++k) {
        PhaseVec i = detail::i_pu_of(f, sol, k, s1);
        PhaseVec v_up = detail::v_pu_of(f, sol, f.branch_parent[k]);
        PhaseVec v_down = detail::v_pu_of(f, sol, f.branch_child[k]);
        for (int p = 0; p < 3; ++p) {
            Complex v_m = m.tap[k][p] * v_up[p];
            pb.loss_va += (v_m - v_down[p]) * std::conj(i[p]);
        }
    }

    double denom = std::max(1e-9, std::abs(pb.source_va));
    pb.relative_error = std::abs(pb.source_va - (pb.load_va + pb.loss_va)) / denom;
    pb.source_va *= s1;
    pb.load_va *= s1;
    pb.loss_va *= s1;
    return pb;
}

// Max per-unit current residual over non-root buses.
inline double kcl_max_residual_pu(const FeederTree& f, const PowerFlowSolution& sol,
                                  const SolveOptions& opts = {}) {
    detail::PuModel m = detail::build_model(f, opts);
    const double s1 = m.s_phase_base;
    std::vector<PhaseVec> residual(f.buses.size());
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        PhaseVec v = detail::v_pu_of(f, sol, b);
        PhaseVec draw = detail::node_current(m, b, v);
        for (int p = 0; p < 3; ++p) residual[b][p] = -draw[p];
    }
    for (std::size_t k = 0; k < f.branches.size(); ++k) {
        PhaseVec i = detail::i_pu_of(f, sol, k, s1);
        int child = f.branch_child[k];
        int parent = f.branch_parent[k];
        for (int p = 0; p < 3; ++p) {
            residual[child][p] += i[p];                      // inflow at child
            residual[parent][p] -= m.tap[k][p] * i[p];       // outflow at parent
        }
    }
    double worst = 0;
    for (std::size_t b = 1; b < f.buses.size(); ++b)
        for (int p = 0; p < 3; ++p) worst = std::max(worst, std::abs(residual[b][p]));
    return worst;
}

} // namespace evtc::powerflow
