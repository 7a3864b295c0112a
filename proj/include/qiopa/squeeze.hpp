#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>

#include "qiopa/fock.hpp"
#include "qiopa/gain.hpp"

namespace qiopa {

/// Annihilation operator on a d-level truncated Fock space.
inline CMatrix ladder_annihilation(int dim) {
    CMatrix a = CMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

/// exp(G) for anti-Hermitian G, via the spectral decomposition of iG.
/// Exactly unitary on the truncated space up to rounding.
inline CMatrix expm_antihermitian(const CMatrix& g) {
    const CMatrix h = Complex(0.0, 1.0) * g;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    const auto& v = es.eigenvectors();
    Eigen::VectorXcd phases(es.eigenvalues().size());
    for (int i = 0; i < phases.size(); ++i)
        phases(i) = std::polar(1.0, -es.eigenvalues()(i));
    return v * phases.asDiagonal() * v.adjoint();
}

/// Single-mode squeeze operator S(zeta) = exp[(conj(zeta) a^2 - zeta a+^2)/2]
/// as the matrix exponential of the truncated generator.
inline CMatrix squeeze_operator(Complex zeta, int dim) {
    const CMatrix a = ladder_annihilation(dim);
    const CMatrix a2 = a * a;
    const CMatrix g = 0.5 * (std::conj(zeta) * a2 - zeta * a2.adjoint());
    return expm_antihermitian(g);
}

/// Displacement operator D(alpha) = exp(alpha a+ - conj(alpha) a) from the
/// normal-ordered factorization e^{-|a|^2/2} e^{alpha a+} e^{-conj(alpha) a}.
/// The two triangular factors have finite internal sums on the truncated
/// space, so the returned block equals the corresponding block of the exact
/// infinite-dimensional operator.
inline CMatrix displacement_operator(Complex alpha, int dim) {
    const double la = std::abs(alpha) > 0 ? std::log(std::abs(alpha)) : 0.0;
    const double ph = std::arg(alpha);
    CMatrix up = CMatrix::Zero(dim, dim);   // e^{alpha a+}
    CMatrix low = CMatrix::Zero(dim, dim);  // e^{-conj(alpha) a}
    for (int n = 0; n < dim; ++n) {
        for (int m = n; m < dim; ++m) {
            const int k = m - n;
            if (k > 0 && std::abs(alpha) == 0.0) break;
            const double lmag = k * la +
                                0.5 * (detail::log_factorial(m) - detail::log_factorial(n)) -
                                detail::log_factorial(k);
            up(m, n) = std::polar(std::exp(lmag), k * ph);
            // e^{-conj(alpha) a}[n, m] = (-conj(alpha))^k sqrt(m!/n!)/k!
            low(n, m) = std::polar(std::exp(lmag), -k * (ph + kPi));
        }
    }
    return std::exp(-0.5 * std::norm(alpha)) * (up * low);
}

/// Same operator via the generic matrix exponential; used as a cross-check.
inline CMatrix displacement_operator_expm(Complex alpha, int dim) {
    const CMatrix a = ladder_annihilation(dim);
    return expm_antihermitian(alpha * a.adjoint() - std::conj(alpha) * a);
}

/// Smallest per-mode cutoff keeping the tail mass of the amplified one- or
/// zero-photon mode below tol. Follows the squeezed-state photon
/// distributions, whose level-to-level mass ratio approaches Gamma^2.
inline int required_cutoff(const GainParams& gain, double tol, int injected_photons = 1) {
    if (gain.Gamma <= 0.0) return injected_photons;
    const double g2 = gain.Gamma * gain.Gamma;
    // mass at index i, recursively; start from i = 0
    double mass = (injected_photons == 0) ? 1.0 / gain.C
                                          : 1.0 / (gain.C * gain.C * gain.C);
    double remaining = 1.0 - mass;
    long i = 0;
    const long hard_cap = 2'000'000;
    while (remaining > tol && i < hard_cap) {
        const double ratio = (injected_photons == 0)
                                 ? g2 * (2.0 * i + 1.0) / (2.0 * i + 2.0)
                                 : g2 * (2.0 * i + 3.0) / (2.0 * i + 2.0);
        mass *= ratio;
        remaining -= mass;
        ++i;
    }
    return static_cast<int>(2 * i + injected_photons);
}

/// Predicted truncation deficit of the amplified one-photon macro-state at a
/// given per-mode cutoff, from the squeezed-state tail sums. Powers the
/// dry-run cutoff validator.
inline double predicted_macro_deficit(const GainParams& gain, int n_max) {
    if (gain.Gamma <= 0.0) return 0.0;
    const double g2 = gain.Gamma * gain.Gamma;
    double modd = 1.0 / (gain.C * gain.C * gain.C), sodd = 0.0;
    double meven = 1.0 / gain.C, seven = 0.0;
    for (long i = 0; 2 * i + 1 <= n_max; ++i) {
        sodd += modd;
        modd *= g2 * (2.0 * i + 3.0) / (2.0 * i + 2.0);
    }
    for (long j = 0; 2 * j <= n_max; ++j) {
        seven += meven;
        meven *= g2 * (2.0 * j + 1.0) / (2.0 * j + 2.0);
    }
    return 1.0 - sodd * seven;
}

struct AmplifierOptions {
    bool strict = false;          // throw when the projection deficit exceeds strict_tol
    double strict_tol = 1e-6;
    double pad_target = 1e-14;    // tail target for the internal working space
    int max_working_cutoff = 4096;
};

struct AmplifiedState {
    ModeTensor state;
    double projection_deficit = 0.0;  // mass dropped when projecting back to the cutoff
    int working_cutoff = 0;
};

namespace detail {

inline int highest_occupied_level(const ModeTensor& t, double floor = 1e-28) {
    const int d = t.cutoff().dim();
    int top = 0;
    for (int n = 0; n < d; ++n)
        for (int m = 0; m < d; ++m)
            if (std::norm(t.amp(n, m)) > floor) top = std::max({top, n, m});
    return top;
}

} // namespace detail

/// Amplifier unitary of the collinear parametric interaction, evaluated in
/// the equatorial basis {phi, phi_perp}.
///
/// The two-mode Hamiltonian i chi hbar a_H+ a_V+ + h.c. decouples in any
/// equatorial basis into two single-mode squeezers with opposite-sign
/// phases; with chi t = -g (the global pump convention used throughout,
/// fixed so that amplifying |1_phi> reproduces the gamma_ij macro-state
/// table) the squeeze parameters are
///   zeta_phi      = +g e^{-i phi},
///   zeta_phi_perp = -g e^{+i phi}.
/// As an operator the result is independent of phi; the argument selects
/// the basis the computation (and the returned tensor) uses.
///
/// The exponential is evaluated on an enlarged working space so that the
/// truncated-generator reflection at the boundary stays below pad_target;
/// projecting back to the stored cutoff is the only mass loss, reported as
/// projection_deficit.
inline AmplifiedState qiopa_unitary_full(const ModeTensor& input, const GainParams& gain,
                                         double phase, const AmplifierOptions& opts = {}) {
    const ModeTensor in = rotate_basis(input, BasisTag::equatorial(phase));
    const double in_norm2 = in.norm2();
    if (in_norm2 <= 0.0) throw ZeroNorm("qiopa_unitary: zero input state");

    const int n_top = detail::highest_occupied_level(in);
    const int d_store = in.cutoff().dim();

    // working cutoff: amplified spread of the top occupied level plus the
    // squeezed-tail decay margin
    const double spread = (double(n_top) + 1.0) * std::cosh(2.0 * gain.g);
    int margin = 8;
    if (gain.Gamma > 1e-12) {
        const double per_level = -std::log(gain.Gamma);
        margin += static_cast<int>(std::ceil(-std::log(opts.pad_target) / per_level)) + 2;
    }
    int n_work = std::max(in.cutoff().n_max, static_cast<int>(std::ceil(spread)) + margin);

    const Complex zeta1 = gain.g * std::polar(1.0, -phase);
    const Complex zeta2 = -gain.g * std::polar(1.0, phase);

    for (;;) {
        if (n_work > opts.max_working_cutoff)
            throw CutoffOverflow(
                "qiopa_unitary: working cutoff " + std::to_string(n_work) +
                " exceeds the cap; gain " + std::to_string(gain.g) +
                " is beyond desk-scale truncation");
        const int dw = n_work + 1;
        CMatrix work = CMatrix::Zero(dw, dw);
        work.topLeftCorner(d_store, d_store) = in.amps();

        const CMatrix s1 = squeeze_operator(zeta1, dw);
        const CMatrix s2 = squeeze_operator(zeta2, dw);
        work = s1 * work * s2.transpose();

        // convergence guard on the working space
        double top = work.bottomRows(2).squaredNorm() + work.rightCols(2).squaredNorm();
        if (top / in_norm2 > 1e-12 && n_work < opts.max_working_cutoff) {
            n_work = n_work * 3 / 2 + 8;
            continue;
        }

        AmplifiedState out{ModeTensor(in.cutoff(), in.basis()), 0.0, n_work};
        out.state.amps() = work.topLeftCorner(d_store, d_store);
        out.projection_deficit = (work.squaredNorm() - out.state.norm2()) / in_norm2;
        if (opts.strict && out.projection_deficit > opts.strict_tol)
            throw CutoffOverflow("qiopa_unitary: projection deficit " +
                                 std::to_string(out.projection_deficit) +
                                 " exceeds strict tolerance at n_max = " +
                                 std::to_string(in.cutoff().n_max));
        return out;
    }
}

inline ModeTensor qiopa_unitary(const ModeTensor& input, const GainParams& gain,
                                double phase, const AmplifierOptions& opts = {}) {
    return qiopa_unitary_full(input, gain, phase, opts).state;
}

} // namespace qiopa
