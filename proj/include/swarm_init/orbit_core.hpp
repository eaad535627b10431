#ifndef SWARM_INIT_ORBIT_CORE_HPP
#define SWARM_INIT_ORBIT_CORE_HPP

// J2-averaged in-plane relative motion about a circular reference orbit:
// coefficients, integration constants and the drift-center transition map.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "swarm_init/errors.hpp"

namespace swarm_init::orbit {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kEarthJ2 = 1.0826e-3;

/// Reference orbit and the J2-averaged coefficients derived from it.
struct OrbitModel {
    double mu_g = 0.0;   // [m^3/s^2]
    double r_ref = 0.0;  // [m]
    double i_ref = 0.0;  // [rad]
    double k_J2 = 0.0;   // [m^5/s^2]

    double s_J2 = 0.0;
    double c_plus = 1.0;
    double c_minus = 1.0;
    double mean_motion = 0.0;  // sqrt(mu/r^3) [rad/s]
    double omega_xy = 0.0;     // [rad/s]
    double epsilon_2 = 0.0;    // [rad/s]
    double k_0 = 0.0;          // 2c+/(omega_xy c-) [s]
    double gamma_gain = 0.0;   // same quantity, named for its role as the drag-response gain [s]
    double k_eps = 0.0;        // (epsilon_2 / 2) * gamma_gain
};

/// k_J2 = (3/2) J2 mu R_e^2, which makes s_J2 equal the Schweighart-Sedwick
/// parameter (3 J2 R_e^2 / 8 r^2)(1 + 3 cos 2i).
inline double k_J2_from_zonal(double j2, double mu_g, double r_earth) {
    return 1.5 * j2 * mu_g * r_earth * r_earth;
}

inline OrbitModel derive_coefficients(double mu_g, double r_ref, double i_ref, double k_J2) {
    if (!(mu_g > 0.0) || !std::isfinite(mu_g)) throw InvalidArgument("mu_g must be positive");
    if (!(r_ref > 0.0) || !std::isfinite(r_ref)) throw InvalidArgument("r_ref must be positive");
    if (!(i_ref >= 0.0 && i_ref <= M_PI)) throw InvalidArgument("i_ref must lie in [0, pi]");
    if (!std::isfinite(k_J2)) throw InvalidArgument("k_J2 must be finite");

    OrbitModel m;
    m.mu_g = mu_g;
    m.r_ref = r_ref;
    m.i_ref = i_ref;
    m.k_J2 = k_J2;
    m.s_J2 = k_J2 * (1.0 + 3.0 * std::cos(2.0 * i_ref)) / (4.0 * mu_g * r_ref * r_ref);
    if (m.s_J2 >= 1.0 || m.s_J2 <= -1.0) {
        throw InvalidRegime("s_J2 = " + std::to_string(m.s_J2) + " outside (-1, 1)");
    }
    m.c_plus = std::sqrt(1.0 + m.s_J2);
    m.c_minus = std::sqrt(1.0 - m.s_J2);
    m.mean_motion = std::sqrt(mu_g / (r_ref * r_ref * r_ref));
    m.omega_xy = m.c_minus * m.mean_motion;
    m.epsilon_2 = (3.0 + 5.0 * m.s_J2) / (m.c_plus * m.c_minus) * m.omega_xy;
    m.k_0 = 2.0 * m.c_plus / (m.omega_xy * m.c_minus);
    m.gamma_gain = m.k_0;
    m.k_eps = 0.5 * m.epsilon_2 * m.gamma_gain;
    return m;
}

/// LVLH curvilinear in-plane state; x radial, y along-track.
struct InPlaneState {
    double x = 0.0, y = 0.0;        // [m]
    double xdot = 0.0, ydot = 0.0;  // [m/s]
};

struct InPlaneElements {
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0;  // [m]
};

/// Drift center r_o(t) = [2 C1p; C4p - epsilon_2 C1p t].
struct DriftCenterState {
    double C1p = 0.0;  // [m]
    double C4p = 0.0;  // [m]

    /// The [2 C1p; C4p] coordinates on which the transition map acts.
    Vec2 vector() const { return {2.0 * C1p, C4p}; }
    static DriftCenterState from_vector(const Vec2& v) { return {0.5 * v(0), v(1)}; }
};

inline InPlaneElements elements_from_state(const OrbitModel& model, const InPlaneState& s) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.xdot) ||
        !std::isfinite(s.ydot)) {
        throw InvalidArgument("non-finite in-plane state");
    }
    const double cp = model.c_plus;
    const double cm = model.c_minus;
    const double w = model.omega_xy;
    const double xb = cp * s.x;
    const double yb = cm * s.y;
    const double xbd = cp * s.xdot;
    const double ybd = cm * s.ydot;

    InPlaneElements e;
    e.C1 = cp / (cm * cm) * (2.0 * xb + ybd / w);
    e.C4 = (yb - 2.0 * xbd / w) / cm;
    e.C2 = (yb - cm * e.C4) / 2.0;
    e.C3 = xb - 2.0 * cp * e.C1;
    return e;
}

inline DriftCenterState drift_center_of(const InPlaneElements& e) { return {e.C1, e.C4}; }

/// Free-drift transition of the [2C1p; C4p] representation over duration t.
inline Mat2 free_drift_transition(const OrbitModel& model, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("free-drift duration must be non-negative");
    Mat2 psi;
    psi << 1.0, 0.0, -0.5 * model.epsilon_2 * t, 1.0;
    return psi;
}

inline Vec2 drift_center_at(const OrbitModel& model, const DriftCenterState& d, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("time must be non-negative");
    return {2.0 * d.C1p, d.C4p - model.epsilon_2 * d.C1p * t};
}

}  // namespace swarm_init::orbit

#endif  // SWARM_INIT_ORBIT_CORE_HPP
