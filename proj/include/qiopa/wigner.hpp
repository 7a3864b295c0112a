#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <utility>

#include "qiopa/fock.hpp"
#include "qiopa/gain.hpp"
#include "qiopa/io.hpp"
#include "qiopa/squeeze.hpp"

namespace qiopa {

/// Phase-space coordinates: alpha for the "+" mode, beta for the "-" mode
/// (the phi = 0 equatorial pair).
struct PhaseSpacePoint {
    Complex alpha{0.0, 0.0};
    Complex beta{0.0, 0.0};
};

/// The squeezing variables of the closed-form Wigner expression,
///   gamma_A+- = (alpha +- conj(beta)) e^-g,  gamma_B+- = (conj(alpha) +- beta) e^-g,
///   Delta_A = (gamma_A+ - i gamma_A-)/sqrt2, Delta_B likewise, X = |Delta_A + Delta_B|.
struct SqueezedCoords {
    Complex gamma_a_plus, gamma_a_minus, gamma_b_plus, gamma_b_minus;
    Complex delta_a, delta_b;
    double x = 0.0;
};

inline SqueezedCoords squeezed_coords(const PhaseSpacePoint& pt, const GainParams& gain) {
    const double damp = std::exp(-gain.g);
    SqueezedCoords c;
    c.gamma_a_plus = (pt.alpha + std::conj(pt.beta)) * damp;
    c.gamma_a_minus = (pt.alpha - std::conj(pt.beta)) * damp;
    c.gamma_b_plus = (std::conj(pt.alpha) + pt.beta) * damp;
    c.gamma_b_minus = (std::conj(pt.alpha) - pt.beta) * damp;
    const Complex i(0.0, 1.0);
    const double r = 1.0 / std::sqrt(2.0);
    c.delta_a = (c.gamma_a_plus - i * c.gamma_a_minus) * r;
    c.delta_b = (c.gamma_b_plus - i * c.gamma_b_minus) * r;
    c.x = std::abs(c.delta_a + c.delta_b);
    return c;
}

/// Interference polynomial F(X): (1 - X^2) for one injected photon,
/// (1 - 2 X^2 + X^4/4) for two.
inline double interference_term(double x, int injected_photons) {
    if (x < 0.0) throw ConfigError("interference_term: x must be >= 0");
    const double x2 = x * x;
    switch (injected_photons) {
        case 1: return 1.0 - x2;
        case 2: return 1.0 - 2.0 * x2 + 0.25 * x2 * x2;
        default:
            throw UnsupportedInjection("interference_term: no closed form for " +
                                       std::to_string(injected_photons) + "-photon injection");
    }
}

/// Closed-form Wigner value
///   W(alpha, beta) = -(2/pi)^2 exp(-|Delta_A|^2 - |Delta_B|^2) F(X),
/// kept in this algebraic form verbatim. Any systematic deviation from the
/// displaced-parity oracle is reported, not corrected.
inline double wigner_closed_form(const PhaseSpacePoint& pt, const GainParams& gain,
                                 int injected_photons) {
    const SqueezedCoords c = squeezed_coords(pt, gain);
    const double w = 2.0 / kPi;
    return -w * w * std::exp(-std::norm(c.delta_a) - std::norm(c.delta_b)) *
           interference_term(c.x, injected_photons);
}

namespace detail {

inline int wigner_working_dim(int state_dim, double max_abs_coord) {
    const double m = std::max(0.0, max_abs_coord);
    return state_dim + static_cast<int>(std::ceil(m * m + 5.0 * m)) + 8;
}

} // namespace detail

/// Symmetric-ordered two-mode characteristic function
///   chi_S(eta, xi) = <psi| D_+(eta) D_-(xi) |psi>,
/// computed by dense displacement-operator action on the truncated tensor
/// (on an enlarged working space; a unitarity deficit above 1e-6 raises
/// CutoffOverflow). Heisenberg-picture arguments eta(t) = eta C - eta* S are
/// the caller's responsibility.
inline Complex characteristic_fn_oracle(const ModeTensor& state, Complex eta, Complex xi) {
    const ModeTensor in = rotate_basis(state, BasisTag::equatorial(0.0));
    const double reach = std::max(std::abs(eta), std::abs(xi));
    const int dw = detail::wigner_working_dim(in.cutoff().dim(), reach);
    CMatrix e = CMatrix::Zero(dw, dw);
    e.topLeftCorner(in.cutoff().dim(), in.cutoff().dim()) = in.amps();

    const CMatrix d1 = displacement_operator(eta, dw);
    const CMatrix d2 = displacement_operator(xi, dw);
    const CMatrix c = d1 * e * d2.transpose();
    const double deficit = std::abs(c.squaredNorm() - e.squaredNorm());
    if (deficit > 1e-6)
        throw CutoffOverflow("characteristic_fn_oracle: unitarity deficit " +
                             std::to_string(deficit) + "; displacement too large for cutoff");
    return (e.conjugate().cwiseProduct(c)).sum();
}

/// Displaced-parity Wigner evaluator: W = (2/pi)^2 <Pi_+ Pi_-> after
/// displacing by (-alpha, -beta). Mathematically the 4-dimensional Fourier
/// transform of chi_S; this is the independent ground truth the closed form
/// is compared against.
///
/// Per-coordinate transforms are cached, so grids whose axes vary alpha and
/// beta separately cost one matrix product per distinct axis value plus one
/// elementwise contraction per node.
class WignerOracle {
public:
    WignerOracle(const ModeTensor& state, double max_abs_coord)
        : dim_(detail::wigner_working_dim(state.cutoff().dim(), max_abs_coord)) {
        const ModeTensor in = rotate_basis(state, BasisTag::equatorial(0.0));
        e_ = CMatrix::Zero(dim_, dim_);
        e_.topLeftCorner(in.cutoff().dim(), in.cutoff().dim()) = in.amps();
        parity_ = Eigen::VectorXd(dim_);
        for (int n = 0; n < dim_; ++n) parity_(n) = (n % 2 == 0) ? 1.0 : -1.0;
        norm2_ = e_.squaredNorm();
    }

    double value(const PhaseSpacePoint& pt) const {
        const CMatrix& m = alpha_side(pt.alpha);
        const CMatrix& n = beta_side(pt.beta);
        const double w = 2.0 / kPi;
        return w * w * std::real((m.cwiseProduct(n)).sum());
    }

    /// |1 - |D(-alpha) psi|^2 / |psi|^2|: how much of the displaced state the
    /// working space failed to hold at the most demanding coordinate.
    double unitarity_deficit(const PhaseSpacePoint& pt) const {
        const CMatrix a = displacement_operator(-pt.alpha, dim_) * e_;
        const CMatrix c = a * displacement_operator(-pt.beta, dim_).transpose();
        return std::abs(c.squaredNorm() - norm2_) / norm2_;
    }

private:
    // caches hold one entry per distinct axis value on separable slices;
    // slices that vary both coordinates of one mode would grow without
    // bound, so they are flushed past this size instead
    static constexpr std::size_t kMaxCacheEntries = 512;

    // M = A^+ P A with A = D(-alpha) E
    const CMatrix& alpha_side(Complex alpha) const {
        const auto key = std::make_pair(alpha.real(), alpha.imag());
        auto it = m_cache_.find(key);
        if (it != m_cache_.end()) return it->second;
        if (m_cache_.size() >= kMaxCacheEntries) m_cache_.clear();
        const CMatrix a = displacement_operator(-alpha, dim_) * e_;
        CMatrix m = a.adjoint() * (parity_.asDiagonal() * a);
        return m_cache_.emplace(key, std::move(m)).first->second;
    }

    // N = B^+ P B with B = D(-beta)
    const CMatrix& beta_side(Complex beta) const {
        const auto key = std::make_pair(beta.real(), beta.imag());
        auto it = n_cache_.find(key);
        if (it != n_cache_.end()) return it->second;
        if (n_cache_.size() >= kMaxCacheEntries) n_cache_.clear();
        const CMatrix b = displacement_operator(-beta, dim_);
        CMatrix n = b.adjoint() * (parity_.asDiagonal() * b);
        return n_cache_.emplace(key, std::move(n)).first->second;
    }

    int dim_;
    CMatrix e_;
    Eigen::VectorXd parity_;
    double norm2_ = 1.0;
    mutable std::map<std::pair<double, double>, CMatrix> m_cache_;
    mutable std::map<std::pair<double, double>, CMatrix> n_cache_;
};

/// Single-point oracle evaluation.
inline double wigner_oracle(const ModeTensor& state, const PhaseSpacePoint& pt) {
    const double reach = std::max(std::abs(pt.alpha), std::abs(pt.beta));
    WignerOracle oracle(state, reach);
    return oracle.value(pt);
}

enum class PhaseAxis { ARe, AIm, BRe, BIm };

inline const char* phase_axis_name(PhaseAxis a) {
    switch (a) {
        case PhaseAxis::ARe: return "a_re";
        case PhaseAxis::AIm: return "a_im";
        case PhaseAxis::BRe: return "b_re";
        case PhaseAxis::BIm: return "b_im";
    }
    return "?";
}

/// A 2-D slice of the 4-D phase space: two varying axes, the other two
/// coordinates fixed.
struct SliceSpec {
    PhaseAxis axis1 = PhaseAxis::ARe;
    PhaseAxis axis2 = PhaseAxis::BRe;
    double min1 = -4.0, max1 = 4.0;
    int n1 = 101;
    double min2 = -4.0, max2 = 4.0;
    int n2 = 101;
    std::array<double, 4> fixed{0.0, 0.0, 0.0, 0.0};  // a_re, a_im, b_re, b_im

    void validate() const {
        if (axis1 == axis2) throw ConfigError("slice: the two axes must differ");
        if (n1 < 2 || n2 < 2) throw ConfigError("slice: need at least 2 nodes per axis");
        if (!(min1 < max1) || !(min2 < max2)) throw ConfigError("slice: empty axis range");
    }

    double coord1(int i) const { return min1 + (max1 - min1) * i / double(n1 - 1); }
    double coord2(int j) const { return min2 + (max2 - min2) * j / double(n2 - 1); }

    PhaseSpacePoint point(int i, int j) const {
        std::array<double, 4> c = fixed;
        c[static_cast<int>(axis1)] = coord1(i);
        c[static_cast<int>(axis2)] = coord2(j);
        return PhaseSpacePoint{Complex(c[0], c[1]), Complex(c[2], c[3])};
    }

    double max_abs_coord() const {
        double m = 0.0;
        for (double v : {min1, max1, min2, max2}) m = std::max(m, std::abs(v));
        for (double v : fixed) m = std::max(m, std::abs(v));
        return m;
    }
};

struct WignerGrid {
    SliceSpec spec;
    GainParams gain;
    int injection = 1;
    Eigen::MatrixXd closed;               // n1 x n2
    std::optional<Eigen::MatrixXd> oracle;
    int oracle_cutoff = 0;
};

/// Evaluates the closed form on every node of the slice and, when a state
/// tensor is supplied, the displaced-parity oracle alongside it.
inline WignerGrid wigner_grid(const GainParams& gain, int injection, const SliceSpec& spec,
                              const ModeTensor* state = nullptr) {
    spec.validate();
    WignerGrid grid{spec, gain, injection, Eigen::MatrixXd(spec.n1, spec.n2), std::nullopt, 0};
    for (int i = 0; i < spec.n1; ++i)
        for (int j = 0; j < spec.n2; ++j)
            grid.closed(i, j) = wigner_closed_form(spec.point(i, j), gain, injection);

    if (state) {
        WignerOracle oracle(*state, spec.max_abs_coord());
        Eigen::MatrixXd vals(spec.n1, spec.n2);
        for (int i = 0; i < spec.n1; ++i)
            for (int j = 0; j < spec.n2; ++j) vals(i, j) = oracle.value(spec.point(i, j));
        grid.oracle = std::move(vals);
        grid.oracle_cutoff = state->cutoff().n_max;
    }
    return grid;
}

struct NegativityReport {
    double min_value = 0.0;
    PhaseSpacePoint min_location;
    double negative_fraction = 0.0;
};

/// Summary statistics of one value layer over the slice.
inline NegativityReport negativity_report(const Eigen::MatrixXd& values, const SliceSpec& spec) {
    if (values.size() == 0) throw EmptyGrid("negativity_report: empty grid");
    NegativityReport rep;
    rep.min_value = values(0, 0);
    long neg = 0;
    int mi = 0, mj = 0;
    for (int i = 0; i < values.rows(); ++i)
        for (int j = 0; j < values.cols(); ++j) {
            if (values(i, j) < rep.min_value) {
                rep.min_value = values(i, j);
                mi = i;
                mj = j;
            }
            if (values(i, j) < 0.0) ++neg;
        }
    rep.min_location = spec.point(mi, mj);
    rep.negative_fraction = double(neg) / double(values.size());
    return rep;
}

/// Oracle layer when present, closed form otherwise.
inline NegativityReport negativity_report(const WignerGrid& grid) {
    return grid.oracle ? negativity_report(*grid.oracle, grid.spec)
                       : negativity_report(grid.closed, grid.spec);
}

/// Grid CSV: a_re,a_im,b_re,b_im,w_closed,w_oracle (w_oracle empty when the
/// oracle layer was not computed).
inline void write_wigner_csv(const WignerGrid& grid, std::ostream& os) {
    os << "a_re,a_im,b_re,b_im,w_closed,w_oracle\n";
    for (int i = 0; i < grid.spec.n1; ++i)
        for (int j = 0; j < grid.spec.n2; ++j) {
            const PhaseSpacePoint pt = grid.spec.point(i, j);
            os << format_double(pt.alpha.real()) << ',' << format_double(pt.alpha.imag()) << ','
               << format_double(pt.beta.real()) << ',' << format_double(pt.beta.imag()) << ','
               << format_double(grid.closed(i, j)) << ',';
            if (grid.oracle) os << format_double((*grid.oracle)(i, j));
            os << '\n';
        }
}

} // namespace qiopa
