#pragma once

#include <cmath>
#include <vector>

#include "qiopa/fock.hpp"

namespace qiopa {

/// Kraus operators of a beamsplitter tap with reflectivity R acting
/// identically on both polarization modes: K_mn removes (m, n) photons into
/// the reflected arm with the binomial loss amplitudes
///   (K_mn psi)[t1, t2] = psi[t1+m, t2+n] sqrt(C(t1+m, m) T^t1 R^m)
///                                        sqrt(C(t2+n, n) T^t2 R^n).
class TapKraus {
public:
    TapKraus(FockCutoff cutoff, double reflectivity) : r_(reflectivity) {
        if (r_ < 0.0 || r_ > 1.0) throw ConfigError("tap: reflectivity must be in [0, 1]");
        const double tt = 1.0 - r_;
        const int d = cutoff.dim();
        b_.resize(d);
        for (int n = 0; n < d; ++n) {
            b_[n].resize(n + 1);
            for (int k = 0; k <= n; ++k) {
                if ((k > 0 && r_ == 0.0) || (n - k > 0 && tt == 0.0)) {
                    b_[n][k] = 0.0;
                    continue;
                }
                double lp = detail::log_factorial(n) - detail::log_factorial(k) -
                            detail::log_factorial(n - k);
                if (n - k > 0) lp += (n - k) * std::log(tt);
                if (k > 0) lp += k * std::log(r_);
                b_[n][k] = std::exp(0.5 * lp);
            }
        }
    }

    double reflectivity() const { return r_; }

    /// K_mn |psi>, unnormalized: the squared norm is the outcome probability.
    ModeTensor apply(const ModeTensor& state, int m, int n) const {
        const int d = state.cutoff().dim();
        ModeTensor cond(state.cutoff(), state.basis());
        for (int t1 = 0; t1 + m < d; ++t1)
            for (int t2 = 0; t2 + n < d; ++t2) {
                const Complex a = state.amp(t1 + m, t2 + n);
                if (a == Complex(0.0, 0.0)) continue;
                cond.set_amp(t1, t2, a * b_[t1 + m][m] * b_[t2 + n][n]);
            }
        return cond;
    }

private:
    double r_;
    std::vector<std::vector<double>> b_;
};

/// One reflected-arm photon-count outcome, with the conditional transmitted
/// state (unnormalized: its squared norm equals `probability`).
struct TapOutcome {
    int m = 0;  // reflected counts, mode 1
    int n = 0;  // reflected counts, mode 2
    double probability = 0.0;
    ModeTensor transmitted;
};

/// Enumerates every reflected-count outcome (m, n). Outcomes with
/// probability at or below prune_floor are dropped; the pruned mass is the
/// difference between the input norm^2 and the summed probabilities.
inline std::vector<TapOutcome> tap_enumerate(const ModeTensor& state, double reflectivity,
                                             double prune_floor = 0.0) {
    const TapKraus kraus(state.cutoff(), reflectivity);
    const int d = state.cutoff().dim();
    std::vector<TapOutcome> out;
    for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) {
            ModeTensor cond = kraus.apply(state, m, n);
            const double p = cond.norm2();
            if (p <= prune_floor || p == 0.0) continue;
            out.push_back(TapOutcome{m, n, p, std::move(cond)});
        }
    return out;
}

struct TapResult {
    Eigen::MatrixXd tapped_distribution;  // P(m, n) over reflected counts
    ModeTensor transmitted;               // conditional on zero tapped counts, normalized
};

/// Beamsplitter tap of reflectivity R: returns the reflected-arm count
/// distribution and the transmitted state conditioned on an empty tap (the
/// identity at R = 0). rho_R = tr_T rho for the counts; the conditional
/// tensor realizes the zero-count branch of rho_T = tr_R rho.
inline TapResult partial_trace_bs_tap(const ModeTensor& state, double reflectivity) {
    const int d = state.cutoff().dim();
    TapResult res{Eigen::MatrixXd::Zero(d, d), ModeTensor(state.cutoff(), state.basis())};
    for (const auto& o : tap_enumerate(state, reflectivity)) {
        res.tapped_distribution(o.m, o.n) = o.probability;
        if (o.m == 0 && o.n == 0 && o.probability > 0.0)
            res.transmitted = o.transmitted.scaled(1.0 / std::sqrt(o.probability));
    }
    return res;
}

} // namespace qiopa
