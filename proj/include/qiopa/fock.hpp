#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "qiopa/errors.hpp"

namespace qiopa {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

/// Maximum photon number retained per polarization mode.
struct FockCutoff {
    int n_max = 40;

    explicit FockCutoff(int n = 40) : n_max(n) {
        if (n_max < 1) throw ConfigError("cutoff: n_max must be >= 1");
    }
    int dim() const { return n_max + 1; }
    bool operator==(const FockCutoff& o) const { return n_max == o.n_max; }
};

/// Which pair of orthogonal polarization modes the tensor axes index:
/// either {H, V} or an equatorial pair {pi_phi, pi_phi_perp} with
///   a_phi^+      = (a_H^+ + e^{i phi} a_V^+)/sqrt(2)
///   a_phi_perp^+ = (-e^{-i phi} a_H^+ + a_V^+)/sqrt(2).
class BasisTag {
public:
    static BasisTag hv() { return BasisTag(true, 0.0); }
    static BasisTag equatorial(double phi) { return BasisTag(false, wrap(phi)); }

    bool is_hv() const { return hv_; }
    double phase() const { return phase_; }

    /// Mode matrix W: rows express (mode1^+, mode2^+) in terms of (a_H^+, a_V^+).
    Eigen::Matrix2cd mode_matrix() const {
        Eigen::Matrix2cd w;
        if (hv_) {
            w.setIdentity();
        } else {
            const double r = 1.0 / std::sqrt(2.0);
            const Complex e = std::polar(1.0, phase_);
            w << r, r * e,
                -r * std::conj(e), r;
        }
        return w;
    }

    bool operator==(const BasisTag& o) const {
        if (hv_ != o.hv_) return false;
        if (hv_) return true;
        double d = std::fmod(std::abs(phase_ - o.phase_), 2.0 * kPi);
        if (d > kPi) d = 2.0 * kPi - d;
        return d < 1e-14;
    }
    bool operator!=(const BasisTag& o) const { return !(*this == o); }

    std::string str() const {
        return hv_ ? std::string("HV") : "equatorial(" + std::to_string(phase_) + ")";
    }

private:
    BasisTag(bool hv, double phase) : hv_(hv), phase_(phase) {}
    static double wrap(double phi) {
        double p = std::fmod(phi, 2.0 * kPi);
        if (p < 0) p += 2.0 * kPi;
        return p;
    }

    bool hv_;
    double phase_;
};

/// State of one spatial mode with two polarization modes: complex amplitudes
/// over Fock occupations (n1, n2), 0 <= n1, n2 <= n_max, plus the basis tag
/// identifying which modes the two axes refer to. Norm may fall below one
/// through truncation or conditioning, never above.
class ModeTensor {
public:
    ModeTensor(FockCutoff cutoff, BasisTag basis)
        : cutoff_(cutoff), basis_(basis),
          amps_(CMatrix::Zero(cutoff.dim(), cutoff.dim())) {}

    ModeTensor(FockCutoff cutoff, BasisTag basis, CMatrix amps)
        : cutoff_(cutoff), basis_(basis), amps_(std::move(amps)) {
        if (amps_.rows() != cutoff_.dim() || amps_.cols() != cutoff_.dim())
            throw ConfigError("ModeTensor: amplitude array shape does not match cutoff");
    }

    const FockCutoff& cutoff() const { return cutoff_; }
    const BasisTag& basis() const { return basis_; }
    const CMatrix& amps() const { return amps_; }
    CMatrix& amps() { return amps_; }

    Complex amp(int n1, int n2) const { return amps_(n1, n2); }
    void set_amp(int n1, int n2, Complex v) { amps_(n1, n2) = v; }

    double norm2() const { return amps_.squaredNorm(); }
    double norm() const { return std::sqrt(norm2()); }

    /// 1 - norm^2: mass lost to truncation/conditioning for a state that
    /// started normalized.
    double norm_deficit() const { return 1.0 - norm2(); }

    /// Probability mass held in the top two Fock levels of either mode,
    /// relative to the total. The convergence guard: results are trusted
    /// only while this is small.
    double top_band_mass() const {
        const int d = cutoff_.dim();
        if (d < 3) return 1.0;
        double top = amps_.bottomRows(2).squaredNorm() + amps_.rightCols(2).squaredNorm()
                   - amps_.bottomRightCorner(2, 2).squaredNorm();
        double tot = norm2();
        return tot > 0 ? top / tot : 0.0;
    }

    /// Per-mode photon number expectations, normalized by the state's mass.
    std::pair<double, double> mean_photon_numbers() const {
        const int d = cutoff_.dim();
        double n1 = 0.0, n2 = 0.0, tot = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const double p = std::norm(amps_(a, b));
                n1 += p * a;
                n2 += p * b;
                tot += p;
            }
        if (tot <= 0.0) throw ZeroNorm("mean_photon_numbers: zero state");
        return {n1 / tot, n2 / tot};
    }

    ModeTensor scaled(Complex factor) const {
        return ModeTensor(cutoff_, basis_, amps_ * factor);
    }

    ModeTensor normalized() const {
        const double n = norm();
        if (n < 1e-300) throw ZeroNorm("ModeTensor::normalized: zero state");
        return scaled(1.0 / n);
    }

    /// Same state re-indexed under a different cutoff. Shrinking drops the
    /// excess amplitudes (mass loss is the caller's responsibility to audit).
    ModeTensor with_cutoff(FockCutoff c) const {
        ModeTensor out(c, basis_);
        const int d = std::min(c.dim(), cutoff_.dim());
        out.amps_.topLeftCorner(d, d) = amps_.topLeftCorner(d, d);
        return out;
    }

private:
    FockCutoff cutoff_;
    BasisTag basis_;
    CMatrix amps_;
};

/// |0,0> in the given basis.
inline ModeTensor vacuum(FockCutoff cutoff, BasisTag basis = BasisTag::equatorial(0.0)) {
    ModeTensor t(cutoff, basis);
    t.set_amp(0, 0, 1.0);
    return t;
}

/// |n1, n2> in the given basis.
inline ModeTensor fock_state(FockCutoff cutoff, int n1, int n2,
                             BasisTag basis = BasisTag::equatorial(0.0)) {
    if (n1 < 0 || n2 < 0 || n1 > cutoff.n_max || n2 > cutoff.n_max)
        throw CutoffOverflow("fock_state: occupation outside cutoff");
    ModeTensor t(cutoff, basis);
    t.set_amp(n1, n2, 1.0);
    return t;
}

enum class LadderKind { Create, Annihilate };

/// Standard ladder action on one mode axis: sqrt(n+1) / sqrt(n) coefficients.
/// Creating out of the top level drops the amplitude (and is an error in
/// strict mode).
inline ModeTensor apply_ladder(const ModeTensor& state, int mode, LadderKind kind,
                               bool strict = false) {
    if (mode != 1 && mode != 2) throw ConfigError("apply_ladder: mode must be 1 or 2");
    const int d = state.cutoff().dim();
    ModeTensor out(state.cutoff(), state.basis());
    const CMatrix& a = state.amps();
    CMatrix& o = out.amps();
    if (kind == LadderKind::Create) {
        if (strict) {
            const double top = (mode == 1) ? a.row(d - 1).squaredNorm()
                                           : a.col(d - 1).squaredNorm();
            if (top > 0.0)
                throw CutoffOverflow("apply_ladder: creation would exceed n_max = " +
                                     std::to_string(state.cutoff().n_max));
        }
        for (int n = 0; n + 1 < d; ++n) {
            const double c = std::sqrt(double(n + 1));
            if (mode == 1) o.row(n + 1) += c * a.row(n);
            else o.col(n + 1) += c * a.col(n);
        }
    } else {
        for (int n = 1; n < d; ++n) {
            const double c = std::sqrt(double(n));
            if (mode == 1) o.row(n - 1) += c * a.row(n);
            else o.col(n - 1) += c * a.col(n);
        }
    }
    return out;
}

namespace detail {

/// log(n!) table, grown on demand.
inline double log_factorial(int n) {
    static thread_local std::vector<double> table{0.0, 0.0};
    while (static_cast<int>(table.size()) <= n)
        table.push_back(table.back() + std::log(double(table.size())));
    return table[n];
}

} // namespace detail

/// Re-express a state in another polarization basis.
///
/// The passive mode change preserves total photon number, so each total-N
/// sector transforms independently. The expansion is carried out in a
/// working array wide enough to hold every sector completely (per-mode index
/// up to 2 n_max) and then projected back to the cutoff; only amplitudes with
/// n1 + n2 > n_max can lose mass in that projection.
inline ModeTensor rotate_basis(const ModeTensor& state, BasisTag to) {
    if (state.basis() == to) return state;

    // old-mode creation operators in terms of the new ones:
    // a_f,i^+ = sum_j conj(M(j,i)) a_t,j^+   with M = W(to) W(from)^dagger
    const Eigen::Matrix2cd m =
        to.mode_matrix() * state.basis().mode_matrix().adjoint();
    const Complex al = std::conj(m(0, 0)), be = std::conj(m(1, 0));
    const Complex ga = std::conj(m(0, 1)), de = std::conj(m(1, 1));

    const int d = state.cutoff().dim();
    const int wd = 2 * state.cutoff().n_max + 1;
    CMatrix work = CMatrix::Zero(wd, wd);

    // power tables
    std::vector<Complex> alp(d, 1.0), bep(d, 1.0), gap(d, 1.0), dep(d, 1.0);
    for (int k = 1; k < d; ++k) {
        alp[k] = alp[k - 1] * al;
        bep[k] = bep[k - 1] * be;
        gap[k] = gap[k - 1] * ga;
        dep[k] = dep[k - 1] * de;
    }

    for (int n = 0; n < d; ++n) {
        for (int mm = 0; mm < d; ++mm) {
            const Complex a = state.amp(n, mm);
            if (a == Complex(0.0, 0.0)) continue;
            const int N = n + mm;
            const double lnm = 0.5 * (detail::log_factorial(n) + detail::log_factorial(mm));
            // (al b1+ + be b2+)^n (ga b1+ + de b2+)^m expanded over k = r+s
            for (int k = 0; k <= N; ++k) {
                Complex c(0.0, 0.0);
                const int rlo = std::max(0, k - mm), rhi = std::min(n, k);
                for (int r = rlo; r <= rhi; ++r) {
                    const int s = k - r;
                    const double lb = detail::log_factorial(n) - detail::log_factorial(r) -
                                      detail::log_factorial(n - r) +
                                      detail::log_factorial(mm) - detail::log_factorial(s) -
                                      detail::log_factorial(mm - s);
                    c += std::exp(lb) * alp[r] * bep[n - r] * gap[s] * dep[mm - s];
                }
                if (c == Complex(0.0, 0.0)) continue;
                const double lw =
                    0.5 * (detail::log_factorial(k) + detail::log_factorial(N - k)) - lnm;
                work(k, N - k) += a * c * std::exp(lw);
            }
        }
    }

    ModeTensor out(state.cutoff(), to);
    out.amps() = work.topLeftCorner(d, d);
    return out;
}

/// Hermitian inner product <a|b>. Tensors in different bases are rotated to
/// a common one first; different cutoffs are an error.
inline Complex overlap(const ModeTensor& a, const ModeTensor& b) {
    if (!(a.cutoff() == b.cutoff()))
        throw CutoffMismatch("overlap: cutoffs differ (" +
                             std::to_string(a.cutoff().n_max) + " vs " +
                             std::to_string(b.cutoff().n_max) + ")");
    if (a.basis() != b.basis()) {
        const ModeTensor br = rotate_basis(b, a.basis());
        return (a.amps().conjugate().cwiseProduct(br.amps())).sum();
    }
    return (a.amps().conjugate().cwiseProduct(b.amps())).sum();
}

/// |<a|b>|^2 / (|a|^2 |b|^2).
inline double fidelity(const ModeTensor& a, const ModeTensor& b) {
    const double na = a.norm2(), nb = b.norm2();
    if (na <= 0 || nb <= 0) throw ZeroNorm("fidelity: zero state");
    return std::norm(overlap(a, b)) / (na * nb);
}

} // namespace qiopa
