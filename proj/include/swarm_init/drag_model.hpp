#ifndef SWARM_INIT_DRAG_MODEL_HPP
#define SWARM_INIT_DRAG_MODEL_HPP

// Differential drag on a tumbling cube released with tip-off spin.
//
// The along-track forcing (k_air/2)(a^2/m)(|cos θ| + |sin θ|), θ = νt + φ, is
// expanded as F_DC - Σ F̂_m cos(ν_m t + ψ_m) with ν_m = 4mν, ψ_m = 4mφ. The
// closed-form responses below are written for the scaled along-track input
// u(t) = F_air(t) / c₋ acting on the averaged-J2 in-plane equations. The DC
// term is common to every satellite and drops out of relative quantities, so
// only the harmonics feed the drift-center increments.

#include <cmath>
#include <string>
#include <vector>

#include "swarm_init/errors.hpp"
#include "swarm_init/orbit_core.hpp"

namespace swarm_init::drag {

/// 1 / (16 m^2 - 1), the decay of the m-th harmonic of |cos| + |sin|.
inline double fourier_ratio(int m) { return 1.0 / (16.0 * m * m - 1.0); }

struct Harmonic {
    int order = 0;
    double amplitude = 0.0;  // F̂_m [m/s^2]
    double frequency = 0.0;  // ν_m [rad/s]
    double phase = 0.0;      // ψ_m [rad]
};

struct DragForcing {
    double k_air = 0.0;
    double side_length = 0.0;  // a [m]
    double mass = 0.0;         // [kg]
    double spin_rate = 0.0;    // ν [rad/s]
    double phase = 0.0;        // φ [rad]
    double F_ref = 0.0;        // [m/s^2]
    double F_DC = 0.0;         // [m/s^2]
    std::vector<Harmonic> harmonics;  // m = 1..M_trunc

    int truncation() const { return static_cast<int>(harmonics.size()); }

    /// Truncated series value at time t.
    double series_value(double t) const {
        double f = F_DC;
        for (const auto& h : harmonics) f -= h.amplitude * std::cos(h.frequency * t + h.phase);
        return f;
    }

    /// The untruncated forcing (k_air/2)(a^2/m)(|cos θ| + |sin θ|).
    double exact_value(double t) const {
        const double theta = spin_rate * t + phase;
        return 0.5 * k_air * side_length * side_length / mass *
               (std::abs(std::cos(theta)) + std::abs(std::sin(theta)));
    }
};

inline DragForcing forcing_series(double k_air, double a, double m_sat, double nu, double phi,
                                  int M_trunc) {
    if (!(a >= 0.0)) throw InvalidArgument("side length must be non-negative");
    if (!(m_sat > 0.0)) throw InvalidArgument("satellite mass must be positive");
    if (M_trunc < 1) throw InvalidArgument("M_trunc must be at least 1");
    if (!(k_air >= 0.0)) throw InvalidArgument("k_air must be non-negative");
    if (nu == 0.0) throw ZeroSpinRate("harmonic frequencies 4 m nu vanish");
    if (!std::isfinite(nu) || !std::isfinite(phi)) throw InvalidArgument("non-finite spin state");

    DragForcing f;
    f.k_air = k_air;
    f.side_length = a;
    f.mass = m_sat;
    f.spin_rate = nu;
    f.phase = phi;
    f.F_ref = 8.0 / (M_PI * M_PI) * k_air * a * a / m_sat;
    f.F_DC = M_PI / 4.0 * f.F_ref;
    f.harmonics.reserve(M_trunc);
    for (int m = 1; m <= M_trunc; ++m) {
        f.harmonics.push_back({m, M_PI / 2.0 * f.F_ref * fourier_ratio(m), 4.0 * m * nu,
                               4.0 * m * phi});
    }
    return f;
}

/// k_air = rho C_d v^2 with v the circular orbital speed at r_ref.
inline double k_air_from_atmosphere(double rho, double drag_coefficient,
                                    const orbit::OrbitModel& model) {
    const double v = model.mean_motion * model.r_ref;
    return rho * drag_coefficient * v * v;
}

/// Spin imparted by a release impulse dv whose line of action is offset by
/// d_off from the centre of a cube of edge ell (I = m ell^2 / 6).
inline double tip_off_spin_rate(double dv, double d_off, double ell) {
    if (!(ell > 0.0)) throw InvalidArgument("cube size must be positive");
    return 6.0 * dv * d_off / (ell * ell);
}

struct DragIncrements {
    double C1_air = 0.0;  // [m]
    double C4_air = 0.0;  // [m s]
};

inline constexpr double kDefaultResonanceTol = 1e-3;

inline bool is_resonant(const orbit::OrbitModel& model, double frequency, double tol) {
    return std::abs(frequency - model.omega_xy) < tol * model.omega_xy;
}

/// Secular drift-center increments of the truncated harmonic forcing:
///   C1_air = Σ Γ F̂_m sin ψ_m / (c₋ ν_m),  C4_air = Σ Γ F̂_m cos ψ_m / (c₋ ν_m²).
inline DragIncrements drag_increments(const orbit::OrbitModel& model, const DragForcing& f,
                                      double resonance_tol = kDefaultResonanceTol) {
    DragIncrements inc;
    for (const auto& h : f.harmonics) {
        if (is_resonant(model, std::abs(h.frequency), resonance_tol)) {
            throw ResonantSpin("harmonic " + std::to_string(h.order) + " at " +
                               std::to_string(h.frequency) + " rad/s is within " +
                               std::to_string(resonance_tol) + " of omega_xy");
        }
        const double g = model.gamma_gain * h.amplitude / model.c_minus;
        inc.C1_air += g * std::sin(h.phase) / h.frequency;
        inc.C4_air += g * std::cos(h.phase) / (h.frequency * h.frequency);
    }
    return inc;
}

/// Drift center with drag superposed:
///   C1p' = C1p + C1_air / 2,  C4p' = C4p + (epsilon_2 / 2) C4_air.
inline orbit::DriftCenterState corrected_drift_center(const orbit::OrbitModel& model,
                                                      const orbit::DriftCenterState& base,
                                                      const DragIncrements& inc) {
    return {base.C1p + 0.5 * inc.C1_air, base.C4p + 0.5 * model.epsilon_2 * inc.C4_air};
}

// ----------------------------------------------------------------------------
// Closed-form particular solution (verification oracle)
// ----------------------------------------------------------------------------

struct ForcedResponse {
    std::vector<double> t;
    std::vector<double> x_bar;  // [m]
    std::vector<double> y_bar;  // [m]
    // Coefficients of the averaged-J2 in-plane equations
    //   x'' - 2ω y' - (3ω² + alpha) x - beta_coeff y' = 0,  y'' + 2ω x' = u.
    double alpha = 0.0;       // 4 ω² s_J2 / c₋²  [1/s^2]
    double beta_coeff = 0.0;  // 4 ω s_J2 / c₋²   [1/s]
};

namespace detail {

struct PlanarPoint {
    double x = 0.0, y = 0.0;
};

// Response to u = cos(νt + ψ) from rest, ν ≠ ω.
inline PlanarPoint unit_harmonic(const orbit::OrbitModel& m, double nu, double psi, double t) {
    const double w = m.omega_xy;
    const double G = m.gamma_gain;
    const double K = m.k_eps;
    const double d = w * w - nu * nu;
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double cn = std::cos(nu * t), sn = std::sin(nu * t);
    const double c = std::cos(w * t), s = std::sin(w * t);
    PlanarPoint r;
    r.x = G * (cp * (w * w / (nu * d) * sn - w / d * s) -
               sp * ((1.0 - cn) / nu + nu / d * (c - cn)));
    r.y = cp * (G * G * w * w / d * (cn - c) - K / (nu * nu) * (1.0 - cn)) +
          sp * (G * G * w / d * (nu * s - w * sn) + K / (nu * nu) * (nu * t - sn));
    return r;
}

// Response to u = cos(ωt + ψ) from rest; the ν → ω limit of unit_harmonic.
inline PlanarPoint unit_resonant(const orbit::OrbitModel& m, double psi, double t) {
    const double w = m.omega_xy;
    const double G = m.gamma_gain;
    const double K = m.k_eps;
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double c = std::cos(w * t), s = std::sin(w * t);
    PlanarPoint r;
    r.x = G * (cp * (s / (2.0 * w) - 0.5 * t * c) - sp * ((1.0 - c) / w - 0.5 * t * s));
    r.y = cp * (G * G * 0.5 * w * t * s - K / (w * w) * (1.0 - c)) +
          sp * (G * G * 0.5 * (w * t * c - s) + K / (w * w) * (w * t - s));
    return r;
}

// Response to a constant u = 1 from rest.
inline PlanarPoint unit_constant(const orbit::OrbitModel& m, double t) {
    const double w = m.omega_xy;
    const double G = m.gamma_gain;
    return {G * (t - std::sin(w * t) / w),
            G * G * (1.0 - std::cos(w * t)) - 0.5 * m.k_eps * t * t};
}

}  // namespace detail

/// Superposition of the DC and per-harmonic responses under zero initial
/// conditions, choosing the resonant branch for harmonics within
/// resonance_tol of ω_xy.
inline ForcedResponse forced_particular_solution(const orbit::OrbitModel& model,
                                                 const DragForcing& f,
                                                 const std::vector<double>& t_grid,
                                                 double resonance_tol = kDefaultResonanceTol) {
    ForcedResponse out;
    out.t = t_grid;
    out.x_bar.resize(t_grid.size());
    out.y_bar.resize(t_grid.size());
    const double cm2 = model.c_minus * model.c_minus;
    out.alpha = 4.0 * model.omega_xy * model.omega_xy * model.s_J2 / cm2;
    out.beta_coeff = 4.0 * model.omega_xy * model.s_J2 / cm2;

    const double dc_gain = f.F_DC / model.c_minus;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double t = t_grid[k];
        auto dc = detail::unit_constant(model, t);
        double x = dc_gain * dc.x;
        double y = dc_gain * dc.y;
        for (const auto& h : f.harmonics) {
            // harmonic input is -(F̂_m / c₋) cos(ν_m t + ψ_m)
            const double b = -h.amplitude / model.c_minus;
            const auto r = is_resonant(model, std::abs(h.frequency), resonance_tol)
                               ? detail::unit_resonant(model, h.phase, t)
                               : detail::unit_harmonic(model, h.frequency, h.phase, t);
            x += b * r.x;
            y += b * r.y;
        }
        out.x_bar[k] = x;
        out.y_bar[k] = y;
    }
    return out;
}

}  // namespace swarm_init::drag

#endif  // SWARM_INIT_DRAG_MODEL_HPP
