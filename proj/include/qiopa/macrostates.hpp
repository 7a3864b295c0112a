#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "qiopa/bipartite.hpp"
#include "qiopa/fock.hpp"
#include "qiopa/gain.hpp"
#include "qiopa/io.hpp"
#include "qiopa/squeeze.hpp"

namespace qiopa {

/// The two macro-qubit branches: the amplified images of |1_phi> and
/// |1_phi_perp>.
enum class MacroBranch { PhiParallel, PhiPerp };

/// gamma_ij = C^-2 (-Gamma/2)^i (Gamma/2)^j sqrt((2i+1)!(2j)!)/(i! j!),
/// evaluated in the log-factorial domain with explicit sign tracking so that
/// i, j up to several hundred stay finite. Real by construction, with sign
/// (-1)^i.
inline double gamma_coeff(int i, int j, const GainParams& gain) {
    if (i < 0 || j < 0) throw ConfigError("gamma_coeff: indices must be non-negative");
    if (gain.Gamma == 0.0) return (i == 0 && j == 0) ? 1.0 : 0.0;
    const double lmag = -2.0 * std::log(gain.C) + (i + j) * std::log(gain.Gamma / 2.0) +
                        0.5 * (detail::log_factorial(2 * i + 1) + detail::log_factorial(2 * j)) -
                        detail::log_factorial(i) - detail::log_factorial(j);
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    return sign * std::exp(lmag);
}

namespace detail {

/// Coefficient of the amplifier image of |1_phi_perp>: same magnitude as
/// gamma_ij with the sign attached to the even-mode index,
/// (-1)^(i+j) gamma_ij. Attaching the minus to the odd-occupied index in
/// both branches (the naive symbol-swap of the parallel form) is not
/// realizable by any single quadratic-Hamiltonian unitary; the amplifier
/// image is what the protocols require.
inline double gamma_perp_coeff(int i, int j, const GainParams& gain) {
    const double s = ((i + j) % 2 == 0) ? 1.0 : -1.0;
    return s * gamma_coeff(i, j, gain);
}

} // namespace detail

/// Table of gamma_ij with adaptive index bounds: rows/columns grow until the
/// mass of the last row and column falls below 1e-12 of the total.
struct GammaTable {
    GainParams gain;
    int i_max = 0;
    int j_max = 0;
    std::vector<std::vector<double>> values;  // values[i][j]

    static GammaTable build(const GainParams& gain) {
        GammaTable t;
        t.gain = gain;

        auto row_mass = [&](int i, int jmax) {
            double s = 0.0;
            for (int j = 0; j <= jmax; ++j) s += std::norm(gamma_coeff(i, j, gain));
            return s;
        };
        auto col_mass = [&](int j, int imax) {
            double s = 0.0;
            for (int i = 0; i <= imax; ++i) s += std::norm(gamma_coeff(i, j, gain));
            return s;
        };

        int im = 4, jm = 4;
        const int cap = 4096;
        for (;;) {
            double total = 0.0;
            for (int i = 0; i <= im; ++i) total += row_mass(i, jm);
            const bool rows_ok = row_mass(im, jm) < 1e-12 * total;
            const bool cols_ok = col_mass(jm, im) < 1e-12 * total;
            if (rows_ok && cols_ok) break;
            if (!rows_ok) im = im * 3 / 2 + 2;
            if (!cols_ok) jm = jm * 3 / 2 + 2;
            if (im > cap || jm > cap)
                throw CutoffOverflow("GammaTable: adaptive bounds exceed cap at g = " +
                                     std::to_string(gain.g));
        }
        t.i_max = im;
        t.j_max = jm;
        t.values.assign(im + 1, std::vector<double>(jm + 1, 0.0));
        for (int i = 0; i <= im; ++i)
            for (int j = 0; j <= jm; ++j) t.values[i][j] = gamma_coeff(i, j, gain);
        return t;
    }

    double total_mass() const {
        double s = 0.0;
        for (const auto& row : values)
            for (double v : row) s += v * v;
        return s;
    }

    /// CSV dump, columns i, j, gamma_value.
    void write_csv(std::ostream& os) const {
        os << "i,j,gamma_value\n";
        for (int i = 0; i <= i_max; ++i)
            for (int j = 0; j <= j_max; ++j)
                os << i << ',' << j << ',' << format_double(values[i][j]) << '\n';
    }
};

/// sum |gamma_ij|^2 with i, j <= bound, by stable recurrences in each index.
/// Equals 1 in the infinite limit (squeeze-operator unitarity); the partial
/// sum is the oracle for the normalization identity.
inline double gamma_mass_partial_sum(const GainParams& gain, int bound = 500) {
    if (gain.Gamma == 0.0) return 1.0;
    const double g2 = gain.Gamma * gain.Gamma;
    // odd-mode factor: m_i = C^-3 (Gamma/2)^(2i) (2i+1)!/(i!)^2
    double modd = 1.0 / (gain.C * gain.C * gain.C), sodd = modd;
    // even-mode factor: m_j = C^-1 (Gamma/2)^(2j) (2j)!/(j!)^2
    double meven = 1.0 / gain.C, seven = meven;
    for (int k = 0; k < bound; ++k) {
        modd *= g2 * (2.0 * k + 3.0) / (2.0 * k + 2.0);
        meven *= g2 * (2.0 * k + 1.0) / (2.0 * k + 2.0);
        sodd += modd;
        seven += meven;
    }
    return sodd * seven;
}

/// Truncation policy for macro-state construction: the default refuses to
/// build a state whose retained mass is below 1 - 1e-6. relaxed() permits
/// any truncation (used by low-cutoff oracle tests, which renormalize).
struct TruncationPolicy {
    double min_retained_mass = 1.0 - 1e-6;
    static TruncationPolicy relaxed() { return TruncationPolicy{0.0}; }
};

/// Macro-qubit |Phi^phi> or |Phi^phi_perp> from the analytic coefficient
/// table, expressed in the equatorial basis phi.
///
/// PhiParallel places gamma_ij e^{i phi (j-i)} at (n_phi, n_perp) = (2i+1, 2j);
/// PhiPerp places (-1)^(i+j) gamma_ij e^{i phi (i-j)} at (2j, 2i+1). The
/// phase decoration is what the fixed physical amplifier produces away from
/// phi = 0 (at phi = 0 the parallel branch is the plain real table); it is
/// required for amplification to commute with basis rotation.
inline ModeTensor build_macro_state(const GainParams& gain, double phase, MacroBranch branch,
                                    FockCutoff cutoff, const TruncationPolicy& policy = {}) {
    ModeTensor t(cutoff, BasisTag::equatorial(phase));
    const int n_max = cutoff.n_max;
    for (int i = 0; 2 * i + 1 <= n_max; ++i) {
        for (int j = 0; 2 * j <= n_max; ++j) {
            if (branch == MacroBranch::PhiParallel) {
                const double c = gamma_coeff(i, j, gain);
                t.set_amp(2 * i + 1, 2 * j, c * std::polar(1.0, phase * (j - i)));
            } else {
                const double c = detail::gamma_perp_coeff(i, j, gain);
                t.set_amp(2 * j, 2 * i + 1, c * std::polar(1.0, phase * (i - j)));
            }
        }
    }
    const double retained = t.norm2();
    if (retained < policy.min_retained_mass) {
        const int suggested = required_cutoff(gain, 1e-9, 1);
        throw CutoffOverflow("build_macro_state: retained mass " + std::to_string(retained) +
                             " below policy at n_max = " + std::to_string(n_max) +
                             "; suggested cutoff " + std::to_string(suggested));
    }
    return t;
}

/// Micro-Macro entangled state
///   |Sigma> = 2^{-1/2} (|Phi^phi>_B |1 phi_perp>_A - |Phi^phi_perp>_B |1 phi>_A),
/// normalized. Site A holds the single photon; site B the macro-qubit.
inline BipartiteState build_micro_macro(const GainParams& gain, double phase, FockCutoff cutoff,
                                        const TruncationPolicy& policy = {}) {
    const double r = 1.0 / std::sqrt(2.0);
    const BasisTag basis = BasisTag::equatorial(phase);
    std::vector<SchmidtTerm> terms;
    terms.push_back({Complex(r, 0.0), fock_state(cutoff, 0, 1, basis),
                     build_macro_state(gain, phase, MacroBranch::PhiParallel, cutoff, policy)});
    terms.push_back({Complex(-r, 0.0), fock_state(cutoff, 1, 0, basis),
                     build_macro_state(gain, phase, MacroBranch::PhiPerp, cutoff, policy)});
    return schmidt_norm_and_normalize(BipartiteState(std::move(terms)));
}

/// Per-mode photon-number expectations of a (normalized) tensor.
inline std::pair<double, double> mean_photon_numbers(const ModeTensor& state) {
    return state.mean_photon_numbers();
}

/// Amplified k-photon injection |k_phi, 0_perp> -> U |k, 0> in the basis phi.
/// For k = 1 this equals build_macro_state(PhiParallel) (the two-route
/// equivalence check); k = 2 feeds the two-photon Wigner comparisons.
inline ModeTensor amplified_injection(const GainParams& gain, int injected_photons,
                                      FockCutoff cutoff, double phase = 0.0,
                                      const AmplifierOptions& opts = {}) {
    if (injected_photons < 0 || injected_photons > cutoff.n_max)
        throw ConfigError("amplified_injection: injection outside cutoff");
    return qiopa_unitary(fock_state(cutoff, injected_photons, 0, BasisTag::equatorial(phase)),
                         gain, phase, opts);
}

/// <n_phi - n_perp>_parallel - <n_phi - n_perp>_perp: the macroscopic
/// separation between the two branch pointer observables. Equals
/// 2 + 4 sinh^2 g, so it is 2 at zero gain and grows with g.
inline double branch_distinguishability(const GainParams& gain, double phase, FockCutoff cutoff,
                                        const TruncationPolicy& policy = {}) {
    const auto par = build_macro_state(gain, phase, MacroBranch::PhiParallel, cutoff, policy);
    const auto perp = build_macro_state(gain, phase, MacroBranch::PhiPerp, cutoff, policy);
    const auto [p1, p2] = par.mean_photon_numbers();
    const auto [q1, q2] = perp.mean_photon_numbers();
    return (p1 - p2) - (q1 - q2);
}

} // namespace qiopa
