#ifndef SWARM_INIT_NUMERICS_HPP
#define SWARM_INIT_NUMERICS_HPP

// Dense symmetric linear algebra and the probability primitives used by the
// propagation, safety and Monte Carlo layers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "swarm_init/errors.hpp"

namespace swarm_init::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ----------------------------------------------------------------------------
// Symmetric matrices
// ----------------------------------------------------------------------------

/// Real symmetric matrix with finite entries. Construction validates both.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) {
            throw InvalidMatrix("matrix is " + std::to_string(m_.rows()) + "x" +
                                std::to_string(m_.cols()) + ", expected square");
        }
        if (!m_.allFinite()) throw InvalidMatrix("non-finite entry");
        for (Eigen::Index i = 0; i < m_.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < m_.cols(); ++j) {
                const double a = m_(i, j);
                const double b = m_(j, i);
                if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
                    throw InvalidMatrix("asymmetric entry at (" + std::to_string(i) + "," +
                                        std::to_string(j) + ")");
                }
            }
        }
    }

    /// Averages `m` with its transpose first; for results of floating-point
    /// accumulation that are symmetric only up to rounding.
    static SymMatrix symmetrized(const Matrix& m) {
        if (m.rows() != m.cols()) throw InvalidMatrix("symmetrize: non-square matrix");
        return SymMatrix(Matrix(0.5 * (m + m.transpose())));
    }

    static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }
    static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

    const Matrix& matrix() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Matrix m_;
};

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct EigenDecomposition {
    Vector values;
    Matrix vectors;

    Matrix reconstruct() const { return vectors * values.asDiagonal() * vectors.transpose(); }
};

inline EigenDecomposition sym_eigen(const SymMatrix& m) {
    if (m.dim() == 0) return {Vector(0), Matrix(0, 0)};
    // Householder tridiagonalisation + implicit QR; eigenvalues come back ascending.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix(), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw InvalidMatrix("eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Q f(Λ) Qᵀ for an arbitrary scalar function f.
template <class F>
Matrix spectral_apply(const EigenDecomposition& eig, F&& f) {
    Vector fv(eig.values.size());
    for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(eig.values(i));
    return eig.vectors * fv.asDiagonal() * eig.vectors.transpose();
}

inline double spectral_radius(const EigenDecomposition& eig) {
    if (eig.values.size() == 0) return 0.0;
    return std::max(std::abs(eig.values(0)), std::abs(eig.values(eig.values.size() - 1)));
}

/// Moore-Penrose pseudoinverse of a PSD matrix. Eigenvalues below
/// rank_tol * λ_max are treated as zero.
inline SymMatrix pseudo_inverse(const SymMatrix& m, double rank_tol = 1e-10) {
    const auto eig = sym_eigen(m);
    const double scale = spectral_radius(eig);
    if (scale == 0.0) return SymMatrix::zero(m.dim());
    const double cut = rank_tol * scale;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values(i) < -cut) {
            throw NotPSD("eigenvalue " + std::to_string(eig.values(i)) + " below -" +
                         std::to_string(cut));
        }
    }
    return SymMatrix::symmetrized(
        spectral_apply(eig, [cut](double l) { return l > cut ? 1.0 / l : 0.0; }));
}

/// exp(scale * M) via the spectral decomposition of M.
inline SymMatrix sym_expm(const EigenDecomposition& eig, double scale) {
    constexpr double max_exponent = 709.0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (scale * eig.values(i) > max_exponent) {
            throw Overflow("exp(" + std::to_string(scale * eig.values(i)) + ")");
        }
    }
    return SymMatrix::symmetrized(
        spectral_apply(eig, [scale](double l) { return std::exp(scale * l); }));
}

inline SymMatrix sym_expm(const SymMatrix& m, double scale) {
    if (scale == 0.0) return SymMatrix::identity(m.dim());
    return sym_expm(sym_eigen(m), scale);
}

inline double lambda_max(const SymMatrix& m) {
    if (m.dim() == 0) return 0.0;
    if (m.dim() == 2) {
        const double a = m(0, 0), b = m(0, 1), d = m(1, 1);
        const double mean = 0.5 * (a + d);
        const double half_diff = 0.5 * (a - d);
        return mean + std::hypot(half_diff, b);
    }
    return sym_eigen(m).values(m.dim() - 1);
}

// ----------------------------------------------------------------------------
// Incomplete gamma and the chi-square quantile
// ----------------------------------------------------------------------------

namespace detail {

inline double gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by the modified Lentz continued fraction.
inline double gamma_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double regularized_lower_gamma(double a, double x) {
    if (!(a > 0.0)) throw InvalidArgument("incomplete gamma shape must be positive");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_series(a, x);
    return 1.0 - detail::gamma_continued_fraction(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly
/// in the tail so that small upper probabilities keep their relative accuracy.
inline double regularized_upper_gamma(double a, double x) {
    if (!(a > 0.0)) throw InvalidArgument("incomplete gamma shape must be positive");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
    return detail::gamma_continued_fraction(a, x);
}

inline double chi2_cdf(int dof, double q) { return regularized_lower_gamma(0.5 * dof, 0.5 * q); }

inline double chi2_pdf(int dof, double q) {
    if (q <= 0.0) return 0.0;
    const double k = 0.5 * dof;
    return std::exp((k - 1.0) * std::log(q) - 0.5 * q - k * std::log(2.0) - std::lgamma(k));
}

/// Quantile of the chi-square distribution: returns q with CDF(q) = p.
/// Bracketing plus Newton steps that fall back to bisection whenever the
/// Newton iterate leaves the bracket.
inline double chi2_quantile(int dof, double p) {
    if (dof <= 0) throw InvalidArgument("chi-square degrees of freedom must be positive");
    if (!(p > 0.0 && p < 1.0)) throw InvalidProbability("p = " + std::to_string(p));

    // Residual in the better-conditioned tail.
    const bool upper = p > 0.5;
    const double target = upper ? 1.0 - p : p;
    auto residual = [&](double q) {
        return upper ? target - regularized_upper_gamma(0.5 * dof, 0.5 * q)
                     : chi2_cdf(dof, q) - target;
    };

    // Wilson-Hilferty starting point
    const double k = dof;
    const double z = [&] {
        // Abramowitz & Stegun 26.2.23 normal quantile, |error| < 4.5e-4.
        const double t = std::sqrt(-2.0 * std::log(std::min(p, 1.0 - p)));
        const double zz = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                                  (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
        return p < 0.5 ? -zz : zz;
    }();
    const double h = 2.0 / (9.0 * k);
    double q = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3);

    double lo = 0.0;
    double hi = std::max(q, 1.0);
    while (residual(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
    }
    q = std::clamp(q, lo, hi);

    for (int iter = 0; iter < 200; ++iter) {
        const double r = residual(q);
        if (r == 0.0) return q;
        if (r < 0.0) lo = q; else hi = q;
        const double pdf = chi2_pdf(dof, q);
        double next = pdf > 0.0 ? q - r / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - q) <= 1e-15 * std::max(1.0, q) || hi - lo <= 1e-15 * hi) return next;
        q = next;
    }
    return q;
}

// ----------------------------------------------------------------------------
// Random numbers
// ----------------------------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

/// Seed of the `index`-th independent stream under `master`. Injective in
/// `index` for fixed `master`, and stateless.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) + (index + 1) * golden_gamma);
}

/// Counter-based generator: draw i is mix64(key + i * golden_gamma).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * golden_gamma); }

    /// Uniform on (0, 1].
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal by Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Multivariate normal draws through a symmetric square-root factor Q√Λ.
class MvnSampler {
public:
    MvnSampler(Vector mean, const SymMatrix& cov) : mean_(std::move(mean)) {
        if (mean_.size() != cov.dim()) {
            throw DimensionMismatch("mean has " + std::to_string(mean_.size()) +
                                    " entries, covariance is " + std::to_string(cov.dim()));
        }
        const auto eig = sym_eigen(cov);
        const double cut = 1e-10 * std::max(1e-300, spectral_radius(eig));
        Vector root(eig.values.size());
        for (Eigen::Index i = 0; i < root.size(); ++i) {
            const double l = eig.values(i);
            if (l < -cut) throw NotPSD("covariance eigenvalue " + std::to_string(l));
            root(i) = l > 0.0 ? std::sqrt(l) : 0.0;
        }
        factor_ = eig.vectors * root.asDiagonal();
    }

    Eigen::Index dim() const noexcept { return mean_.size(); }

    Vector sample(CounterRng& rng) const {
        Vector z(mean_.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
        return mean_ + factor_ * z;
    }

private:
    Vector mean_;
    Matrix factor_;
};

inline Vector mvn_sample(const Vector& mean, const SymMatrix& cov, std::uint64_t seed) {
    CounterRng rng(seed);
    return MvnSampler(mean, cov).sample(rng);
}

}  // namespace swarm_init::numerics

#endif  // SWARM_INIT_NUMERICS_HPP
