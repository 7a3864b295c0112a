#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qiopa/bipartite.hpp"
#include "qiopa/macrostates.hpp"
#include "qiopa/rng.hpp"
#include "qiopa/squeeze.hpp"
#include "qiopa/tap.hpp"

namespace qiopa {

enum class BellOutcome { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline const char* bell_outcome_name(BellOutcome o) {
    switch (o) {
        case BellOutcome::PhiPlus: return "phi-plus";
        case BellOutcome::PhiMinus: return "phi-minus";
        case BellOutcome::PsiPlus: return "psi-plus";
        case BellOutcome::PsiMinus: return "psi-minus";
    }
    return "?";
}

inline constexpr std::array<BellOutcome, 4> kBellOutcomes = {
    BellOutcome::PhiPlus, BellOutcome::PhiMinus, BellOutcome::PsiPlus, BellOutcome::PsiMinus};

/// SPDC singlet 2^{-1/2} (|H>_A |V>_B - |V>_A |H>_B).
inline BipartiteState make_singlet(FockCutoff cutoff) {
    const double r = 1.0 / std::sqrt(2.0);
    const BasisTag hv = BasisTag::hv();
    std::vector<SchmidtTerm> terms;
    terms.push_back({Complex(r, 0.0), fock_state(cutoff, 1, 0, hv), fock_state(cutoff, 0, 1, hv)});
    terms.push_back({Complex(-r, 0.0), fock_state(cutoff, 0, 1, hv), fock_state(cutoff, 1, 0, hv)});
    return BipartiteState(std::move(terms));
}

/// Single-particle Bell states in the equatorial basis phi:
///   Phi+- = 2^{-1/2} (|1phi>|1phi> +- |1perp>|1perp>)
///   Psi+- = 2^{-1/2} (|1phi>|1perp> +- |1perp>|1phi>).
inline BipartiteState micro_bell_state(BellOutcome which, double phase, FockCutoff cutoff) {
    const double r = 1.0 / std::sqrt(2.0);
    const BasisTag basis = BasisTag::equatorial(phase);
    const ModeTensor one_par = fock_state(cutoff, 1, 0, basis);
    const ModeTensor one_perp = fock_state(cutoff, 0, 1, basis);
    std::vector<SchmidtTerm> terms;
    switch (which) {
        case BellOutcome::PhiPlus:
            terms = {{Complex(r, 0), one_par, one_par}, {Complex(r, 0), one_perp, one_perp}};
            break;
        case BellOutcome::PhiMinus:
            terms = {{Complex(r, 0), one_par, one_par}, {Complex(-r, 0), one_perp, one_perp}};
            break;
        case BellOutcome::PsiPlus:
            terms = {{Complex(r, 0), one_par, one_perp}, {Complex(r, 0), one_perp, one_par}};
            break;
        case BellOutcome::PsiMinus:
            terms = {{Complex(r, 0), one_par, one_perp}, {Complex(-r, 0), one_perp, one_par}};
            break;
    }
    return BipartiteState(std::move(terms));
}

/// Macro-Macro Bell states: the micro Bell forms with each single-photon ket
/// replaced by the corresponding macro-qubit branch. Normalized.
inline BipartiteState macro_bell_state(const GainParams& gain, double phase, FockCutoff cutoff,
                                       BellOutcome which, const TruncationPolicy& policy = {}) {
    const double r = 1.0 / std::sqrt(2.0);
    const ModeTensor par = build_macro_state(gain, phase, MacroBranch::PhiParallel, cutoff, policy);
    const ModeTensor perp = build_macro_state(gain, phase, MacroBranch::PhiPerp, cutoff, policy);
    std::vector<SchmidtTerm> terms;
    switch (which) {
        case BellOutcome::PhiPlus:
            terms = {{Complex(r, 0), par, par}, {Complex(r, 0), perp, perp}};
            break;
        case BellOutcome::PhiMinus:
            terms = {{Complex(r, 0), par, par}, {Complex(-r, 0), perp, perp}};
            break;
        case BellOutcome::PsiPlus:
            terms = {{Complex(r, 0), par, perp}, {Complex(r, 0), perp, par}};
            break;
        case BellOutcome::PsiMinus:
            terms = {{Complex(r, 0), par, perp}, {Complex(-r, 0), perp, par}};
            break;
    }
    return schmidt_norm_and_normalize(BipartiteState(std::move(terms)));
}

struct SwapResult {
    BellOutcome outcome;
    double probability = 0.0;     // conditional on the normalized input pair
    BipartiteState post_state;    // on the macro modes (k_B, k_B'), normalized
};

/// Entanglement swapping: two identical Micro-Macro pairs
/// |Phi>_AB = |Sigma>_{A,B} (x) |Sigma>_{A',B'}; the micro modes (k_A, k_A')
/// are projected onto one single-particle Bell state and the conditional
/// Macro-Macro state on (k_B, k_B') is returned with its outcome probability.
///
/// physical_bsm restricts the measurement to the pair a beamsplitter
/// Bell-state analyzer can actually resolve (Psi+-).
inline SwapResult entanglement_swap(const GainParams& gain, double phase, FockCutoff cutoff,
                                    BellOutcome outcome, const TruncationPolicy& policy = {},
                                    bool physical_bsm = false) {
    if (physical_bsm &&
        (outcome == BellOutcome::PhiPlus || outcome == BellOutcome::PhiMinus))
        throw ConfigError(std::string("entanglement_swap: outcome ") + bell_outcome_name(outcome) +
                          " is not resolvable by the physical beamsplitter analyzer");

    const BipartiteState sigma = build_micro_macro(gain, phase, cutoff, policy);
    const BipartiteState bell = micro_bell_state(outcome, phase, cutoff);

    // <bell | micro_r (x) micro_s> for every pair of Sigma terms
    std::vector<SchmidtTerm> post;
    for (const auto& tr : sigma.terms()) {
        for (const auto& ts : sigma.terms()) {
            Complex f(0.0, 0.0);
            for (const auto& tb : bell.terms())
                f += std::conj(tb.weight) * overlap(tb.site_a, tr.site_a) *
                     overlap(tb.site_b, ts.site_a);
            post.push_back({tr.weight * ts.weight * f, tr.site_b, ts.site_b});
        }
    }
    BipartiteState projected(std::move(post));
    const double p = projected.norm2();
    if (p < 1e-280)
        throw ZeroNorm("entanglement_swap: outcome has zero probability");
    return SwapResult{outcome, p, projected.scaled(1.0 / std::sqrt(p))};
}

/// All four outcomes; probabilities sum to one.
inline std::array<SwapResult, 4> entanglement_swap_all(const GainParams& gain, double phase,
                                                       FockCutoff cutoff,
                                                       const TruncationPolicy& policy = {}) {
    return {entanglement_swap(gain, phase, cutoff, BellOutcome::PhiPlus, policy),
            entanglement_swap(gain, phase, cutoff, BellOutcome::PhiMinus, policy),
            entanglement_swap(gain, phase, cutoff, BellOutcome::PsiPlus, policy),
            entanglement_swap(gain, phase, cutoff, BellOutcome::PsiMinus, policy)};
}

/// Double amplification: the second amplifier acts on the micro side of
/// |Sigma>, turning it into the Macro-Macro singlet
///   2^{-1/2} (|Phi^phi>_A |Phi^perp>_B - |Phi^perp>_A |Phi^phi>_B)
/// (up to a global sign). Unequal gains are allowed; gain_b is the one
/// already burnt into |Sigma>'s macro side.
inline BipartiteState double_amplify(const GainParams& gain_a, const GainParams& gain_b,
                                     double phase, FockCutoff cutoff,
                                     const TruncationPolicy& policy = {},
                                     const AmplifierOptions& amp = {}) {
    const BipartiteState sigma = build_micro_macro(gain_b, phase, cutoff, policy);
    const BipartiteState amplified = sigma.transformed(Site::A, [&](const ModeTensor& t) {
        return qiopa_unitary(t, gain_a, phase, amp);
    });
    return schmidt_norm_and_normalize(amplified);
}

/// O-Filter: a low-reflectivity tap whose counts drive a prescribed program
/// P deciding whether the main beam passes. The program is a pure function
/// of the tapped counts (m, n) alone -- it has no access to any measurement
/// setting -- and defaults to the orthogonality-filter rule |m - n| >= k.
/// Counts are read in the equatorial basis basis_phase.
struct OFilterConfig {
    double reflectivity = 0.1;
    int threshold = 0;  // k
    double basis_phase = 0.0;
    std::function<bool(int, int)> program;  // overrides the threshold rule if set

    bool accepts(int m, int n) const {
        return program ? program(m, n) : std::abs(m - n) >= threshold;
    }

    void validate() const {
        if (reflectivity < 0.0 || reflectivity >= 1.0)
            throw ConfigError("o_filter: reflectivity must be in [0, 1)");
        if (threshold < 0) throw ConfigError("o_filter: threshold must be >= 0");
    }
};

/// One accepted (or rejected) branch of the filter, in the input basis.
struct FilterBranch {
    int m;
    int n;
    bool accepted;
    double probability;
    ModeTensor post_state;  // unnormalized; norm^2 equals probability
};

struct FilterEnumeration {
    double acceptance_probability = 0.0;
    std::vector<FilterBranch> branches;  // all outcomes above the prune floor
    double pruned_mass = 0.0;
};

/// Exact enumeration of the filter acting on a single-site state.
inline FilterEnumeration o_filter_enumerate(const ModeTensor& state, const OFilterConfig& config,
                                            double prune_floor = 0.0) {
    config.validate();
    const BasisTag fb = BasisTag::equatorial(config.basis_phase);
    const ModeTensor in_fb = rotate_basis(state, fb);
    FilterEnumeration res;
    double seen = 0.0;
    for (auto& o : tap_enumerate(in_fb, config.reflectivity, prune_floor)) {
        const bool accepted = config.accepts(o.m, o.n);
        seen += o.probability;
        if (accepted) res.acceptance_probability += o.probability;
        res.branches.push_back(FilterBranch{o.m, o.n, accepted, o.probability,
                                            rotate_basis(o.transmitted, state.basis())});
    }
    res.pruned_mass = state.norm2() - seen;
    return res;
}

struct FilterSample {
    bool accepted;
    int m;
    int n;
    ModeTensor post_state;            // normalized conditional state
    double acceptance_probability;    // exact, for reference
};

/// Monte Carlo mode: enumerates the branch distribution once, then draws
/// tapped-count outcomes from it.
class OFilterSampler {
public:
    OFilterSampler(const ModeTensor& state, const OFilterConfig& config,
                   double prune_floor = 1e-15)
        : en_(o_filter_enumerate(state, config, prune_floor)) {
        std::vector<double> w(en_.branches.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = en_.branches[i].probability;
        cdf_ = cumulative(w);
    }

    const FilterEnumeration& enumeration() const { return en_; }

    FilterSample draw(CounterRng& rng) const {
        const auto& b = en_.branches[rng.sample_cdf(cdf_)];
        return FilterSample{b.accepted, b.m, b.n,
                            b.post_state.scaled(1.0 / std::sqrt(b.probability)),
                            en_.acceptance_probability};
    }

private:
    FilterEnumeration en_;
    std::vector<double> cdf_;
};

/// One-shot sampling convenience wrapper.
inline FilterSample o_filter_sample(const ModeTensor& state, const OFilterConfig& config,
                                    CounterRng& rng) {
    return OFilterSampler(state, config).draw(rng);
}

} // namespace qiopa
