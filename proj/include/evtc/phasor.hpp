#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "evtc/errors.hpp"

// Three-phase phasor arithmetic. Vectors and matrices are always full 3x3 with
// absent phases held at zero; phase masks control which entries are live.

namespace evtc {

using Complex = std::complex<double>;
using PhaseVec = std::array<Complex, 3>;
using PhaseMat = std::array<std::array<Complex, 3>, 3>;

using PhaseMask = unsigned;
inline constexpr PhaseMask kPhaseA = 1u;
inline constexpr PhaseMask kPhaseB = 2u;
inline constexpr PhaseMask kPhaseC = 4u;
inline constexpr PhaseMask kPhaseABC = kPhaseA | kPhaseB | kPhaseC;

inline constexpr bool has_phase(PhaseMask m, int p) { return (m >> p) & 1u; }

inline constexpr int phase_count(PhaseMask m) {
    return static_cast<int>(has_phase(m, 0)) + static_cast<int>(has_phase(m, 1)) +
           static_cast<int>(has_phase(m, 2));
}

inline constexpr char phase_letter(int p) { return static_cast<char>('A' + p); }

inline std::string format_phases(PhaseMask m) {
    std::string s;
    for (int p = 0; p < 3; ++p)
        if (has_phase(m, p)) s += phase_letter(p);
    return s;
}

inline PhaseMask parse_phases(const std::string& s) {
    PhaseMask m = 0;
    for (char c : s) {
        switch (c) {
            case 'A': case 'a': m |= kPhaseA; break;
            case 'B': case 'b': m |= kPhaseB; break;
            case 'C': case 'c': m |= kPhaseC; break;
            default: throw DataError("invalid phase string: " + s);
        }
    }
    return m;
}

// Positive-sequence unit phasors: A at 0 deg, B at -120, C at +120.
inline PhaseVec unit_rotation() {
    const double t = 2.0 * std::numbers::pi / 3.0;
    return {Complex{1.0, 0.0}, std::polar(1.0, -t), std::polar(1.0, t)};
}

inline PhaseVec mat_vec(const PhaseMat& m, const PhaseVec& v) {
    PhaseVec out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i] += m[i][j] * v[j];
    return out;
}

inline PhaseVec& operator+=(PhaseVec& a, const PhaseVec& b) {
    for (int i = 0; i < 3; ++i) a[i] += b[i];
    return a;
}

inline PhaseVec operator-(const PhaseVec& a, const PhaseVec& b) {
    PhaseVec out;
    for (int i = 0; i < 3; ++i) out[i] = a[i] - b[i];
    return out;
}

inline void mask_phases(PhaseVec& v, PhaseMask m) {
    for (int p = 0; p < 3; ++p)
        if (!has_phase(m, p)) v[p] = Complex{0, 0};
}

inline bool mat_symmetric(const PhaseMat& m, double tol = 1e-12) {
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(m[i][j] - m[j][i]) > tol) return false;
    return true;
}

} // namespace evtc
