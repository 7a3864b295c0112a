#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "qiopa/bipartite.hpp"
#include "qiopa/protocols.hpp"
#include "qiopa/rng.hpp"

namespace qiopa {

struct MeasurementSetting {
    Site site;
    double basis_phase = 0.0;
};

enum class EstimationMode { Enumerate, Sample };

/// One sampled joint detection event. Counts are per-site photon numbers in
/// the setting's equatorial basis; the dichotomic outcome is sign(p - q),
/// zero (inconclusive) for ties and filter-vetoed events.
struct MeasurementRecord {
    int p_a = 0, q_a = 0, p_b = 0, q_b = 0;
    int outcome_a = 0, outcome_b = 0;
    bool filter_accepted_a = true, filter_accepted_b = true;
    int tap_m_a = 0, tap_n_a = 0, tap_m_b = 0, tap_n_b = 0;

    bool conclusive() const {
        return filter_accepted_a && filter_accepted_b && outcome_a != 0 && outcome_b != 0;
    }
};

struct CorrelationEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    long n_used = 0;
    long n_discarded = 0;
};

namespace detail {

inline int dichotomize(int p, int q) { return p > q ? +1 : (p < q ? -1 : 0); }

/// Per-site, per-term-pair sums over photon-count classes in a measurement
/// basis, with the site's filter (if any) already folded in:
///   K[c](r, s) = sum_{accepted branches} sum_{(p,q) in c} u_r[p,q] conj(u_s[p,q])
/// where u_r is the filtered, rotated site tensor of term r. The class
/// partition is p > q / p < q / p == q.
struct SiteKernels {
    CMatrix plus, minus, tie;
    CMatrix total;  // all counts, accepted branches only

    const CMatrix& of(int cls) const {  // +1, -1, 0
        return cls > 0 ? plus : (cls < 0 ? minus : tie);
    }
};

/// All tap branches of one site (every outcome, accepted or not), rotated to
/// the measurement basis; used by both the kernel builder and the sampler.
struct SiteBranches {
    struct Branch {
        int m = 0, n = 0;
        bool accepted = true;
        std::vector<ModeTensor> u;  // filtered site tensor per term, measurement basis
        CMatrix gram;               // gram(r,s) = <u_s|u_r> = sum u_r conj(u_s)
    };
    std::vector<Branch> branches;
    CMatrix plain_gram;  // <t_s|t_r> of the unfiltered site tensors
};

inline CMatrix tensor_gram(const std::vector<ModeTensor>& u) {
    const int t = static_cast<int>(u.size());
    CMatrix g(t, t);
    for (int r = 0; r < t; ++r)
        for (int s = 0; s < t; ++s) g(r, s) = overlap(u[s], u[r]);
    return g;
}

inline SiteBranches build_site_branches(const BipartiteState& state, Site site,
                                        double measurement_phase, const OFilterConfig* filter,
                                        double prune_floor) {
    const int t = static_cast<int>(state.size());
    const BasisTag mb = BasisTag::equatorial(measurement_phase);

    std::vector<ModeTensor> raw;
    raw.reserve(t);
    for (int r = 0; r < t; ++r) raw.push_back(state.site(site, r));

    SiteBranches out;
    out.plain_gram = tensor_gram(raw);

    if (!filter) {
        SiteBranches::Branch b;
        for (const auto& tens : raw) b.u.push_back(rotate_basis(tens, mb));
        b.gram = tensor_gram(b.u);
        out.branches.push_back(std::move(b));
        return out;
    }

    filter->validate();
    const BasisTag fb = BasisTag::equatorial(filter->basis_phase);
    std::vector<ModeTensor> in_fb;
    in_fb.reserve(t);
    for (const auto& tens : raw) in_fb.push_back(rotate_basis(tens, fb));

    const FockCutoff cutoff = raw.front().cutoff();
    const TapKraus kraus(cutoff, filter->reflectivity);
    const int d = cutoff.dim();
    for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) {
            std::vector<ModeTensor> v;
            v.reserve(t);
            double bound = 0.0;
            for (const auto& tens : in_fb) {
                v.push_back(kraus.apply(tens, m, n));
                bound += v.back().norm2();
            }
            if (bound <= prune_floor) continue;
            SiteBranches::Branch b;
            b.m = m;
            b.n = n;
            b.accepted = filter->accepts(m, n);
            for (auto& tens : v) b.u.push_back(rotate_basis(tens, mb));
            b.gram = tensor_gram(b.u);
            out.branches.push_back(std::move(b));
        }
    return out;
}

inline SiteKernels build_site_kernels(const SiteBranches& sb, int n_terms, int dim) {
    SiteKernels k;
    k.plus = CMatrix::Zero(n_terms, n_terms);
    k.minus = CMatrix::Zero(n_terms, n_terms);
    k.tie = CMatrix::Zero(n_terms, n_terms);
    for (const auto& b : sb.branches) {
        if (!b.accepted) continue;
        for (int r = 0; r < n_terms; ++r)
            for (int s = 0; s < n_terms; ++s) {
                Complex cp(0, 0), cm(0, 0), ct(0, 0);
                for (int p = 0; p < dim; ++p)
                    for (int q = 0; q < dim; ++q) {
                        const Complex v = b.u[r].amp(p, q) * std::conj(b.u[s].amp(p, q));
                        if (p > q) cp += v;
                        else if (p < q) cm += v;
                        else ct += v;
                    }
                k.plus(r, s) += cp;
                k.minus(r, s) += cm;
                k.tie(r, s) += ct;
            }
    }
    k.total = k.plus + k.minus + k.tie;
    return k;
}

inline double contract(const BipartiteState& state, const CMatrix& ka, const CMatrix& kb) {
    Complex acc(0, 0);
    const int t = static_cast<int>(state.size());
    for (int r = 0; r < t; ++r)
        for (int s = 0; s < t; ++s)
            acc += state.terms()[r].weight * std::conj(state.terms()[s].weight) * ka(r, s) *
                   kb(r, s);
    return std::real(acc);
}

} // namespace detail

/// Exact joint outcome-class probabilities for one settings pair, relative
/// to the (normalized) input state: p[ca][cb] with classes {+1, -1, tie},
/// events vetoed by either filter excluded.
struct ExactJoint {
    double p[3][3] = {};            // index 0:+1, 1:-1, 2:tie
    double p_accepted = 1.0;        // both filters accept, any counts
    double p_conclusive = 0.0;      // accepted and both sites non-tie
    double correlation = 0.0;       // E over conclusive events

    static int idx(int cls) { return cls > 0 ? 0 : (cls < 0 ? 1 : 2); }
};

inline ExactJoint exact_joint(const BipartiteState& state, double phi_a, double phi_b,
                              const OFilterConfig* filter_a = nullptr,
                              const OFilterConfig* filter_b = nullptr,
                              double prune_floor = 1e-16) {
    const int t = static_cast<int>(state.size());
    const int d = state.site(Site::A, 0).cutoff().dim();
    const auto ba = detail::build_site_branches(state, Site::A, phi_a, filter_a, prune_floor);
    const auto bb = detail::build_site_branches(state, Site::B, phi_b, filter_b, prune_floor);
    const auto ka = detail::build_site_kernels(ba, t, d);
    const auto kb = detail::build_site_kernels(bb, t, d);

    ExactJoint j;
    const int classes[3] = {+1, -1, 0};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            j.p[a][b] = detail::contract(state, ka.of(classes[a]), kb.of(classes[b]));
    j.p_accepted = detail::contract(state, ka.total, kb.total);
    j.p_conclusive = j.p[0][0] + j.p[0][1] + j.p[1][0] + j.p[1][1];
    if (j.p_conclusive > 0.0)
        j.correlation = (j.p[0][0] + j.p[1][1] - j.p[0][1] - j.p[1][0]) / j.p_conclusive;
    return j;
}

/// Marginal outcome-class probabilities at one site (raw, both filters
/// applied); independent of the other site's basis phase by construction --
/// the no-signaling check asserts this numerically.
inline std::array<double, 3> exact_site_marginal(const BipartiteState& state, Site site,
                                                 double own_phase, double other_phase,
                                                 const OFilterConfig* filter_own = nullptr,
                                                 const OFilterConfig* filter_other = nullptr) {
    const ExactJoint j = site == Site::A
                             ? exact_joint(state, own_phase, other_phase, filter_own, filter_other)
                             : exact_joint(state, other_phase, own_phase, filter_other, filter_own);
    std::array<double, 3> m{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (site == Site::A) m[a] += j.p[a][b];
            else m[b] += j.p[a][b];
        }
    return m;
}

/// Reusable sampling machinery for one (state, settings, filters) tuple:
/// exact tap-branch probabilities, then exact joint photon-count
/// distributions per branch pair, sampled hierarchically.
class SamplingPlan {
public:
    SamplingPlan(const BipartiteState& state, double phi_a, double phi_b,
                 const OFilterConfig* filter_a = nullptr, const OFilterConfig* filter_b = nullptr,
                 double prune_floor = 1e-16)
        : state_(state),
          ba_(detail::build_site_branches(state, Site::A, phi_a, filter_a, prune_floor)),
          bb_(detail::build_site_branches(state, Site::B, phi_b, filter_b, prune_floor)) {
        const std::size_t na = ba_.branches.size(), nb = bb_.branches.size();
        std::vector<double> w(na * nb);
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t k = 0; k < nb; ++k) {
                const double p =
                    detail::contract(state_, ba_.branches[i].gram, bb_.branches[k].gram);
                w[i * nb + k] = std::max(0.0, p);
            }
        branch_cdf_ = cumulative(w);
    }

    MeasurementRecord sample(CounterRng& rng) {
        const std::size_t nb = bb_.branches.size();
        const std::size_t pick = rng.sample_cdf(branch_cdf_);
        const auto& bra = ba_.branches[pick / nb];
        const auto& brb = bb_.branches[pick % nb];

        MeasurementRecord rec;
        rec.tap_m_a = bra.m;
        rec.tap_n_a = bra.n;
        rec.tap_m_b = brb.m;
        rec.tap_n_b = brb.n;
        rec.filter_accepted_a = bra.accepted;
        rec.filter_accepted_b = brb.accepted;
        if (!bra.accepted || !brb.accepted) return rec;

        // site-A counts from the exact marginal of this branch pair
        const auto& cdf_a = marginal_cdf(pick / nb, pick % nb);
        const int d = state_.site(Site::A, 0).cutoff().dim();
        const std::size_t xa = rng.sample_cdf(cdf_a);
        rec.p_a = static_cast<int>(xa) / d;
        rec.q_a = static_cast<int>(xa) % d;

        // conditional site-B amplitude vector given the site-A counts
        const int t = static_cast<int>(state_.size());
        CMatrix psi_b = CMatrix::Zero(d, d);
        for (int r = 0; r < t; ++r)
            psi_b += state_.terms()[r].weight * bra.u[r].amp(rec.p_a, rec.q_a) * brb.u[r].amps();
        std::vector<double> wb(static_cast<std::size_t>(d) * d);
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q) wb[p * d + q] = std::norm(psi_b(p, q));
        const auto cdf_b = cumulative(wb);
        const std::size_t xb = rng.sample_cdf(cdf_b);
        rec.p_b = static_cast<int>(xb) / d;
        rec.q_b = static_cast<int>(xb) % d;

        rec.outcome_a = detail::dichotomize(rec.p_a, rec.q_a);
        rec.outcome_b = detail::dichotomize(rec.p_b, rec.q_b);
        return rec;
    }

private:
    const std::vector<double>& marginal_cdf(std::size_t ia, std::size_t ib) {
        const auto key = std::make_pair(ia, ib);
        auto it = marginal_cache_.find(key);
        if (it != marginal_cache_.end()) return it->second;
        const auto& bra = ba_.branches[ia];
        const auto& brb = bb_.branches[ib];
        const int t = static_cast<int>(state_.size());
        const int d = state_.site(Site::A, 0).cutoff().dim();
        std::vector<double> w(static_cast<std::size_t>(d) * d, 0.0);
        for (int r = 0; r < t; ++r)
            for (int s = 0; s < t; ++s) {
                const Complex wf = state_.terms()[r].weight *
                                   std::conj(state_.terms()[s].weight) * brb.gram(r, s);
                for (int p = 0; p < d; ++p)
                    for (int q = 0; q < d; ++q)
                        w[p * d + q] += std::real(wf * bra.u[r].amp(p, q) *
                                                  std::conj(bra.u[s].amp(p, q)));
            }
        for (auto& x : w) x = std::max(0.0, x);
        return marginal_cache_.emplace(key, cumulative(w)).first->second;
    }

    BipartiteState state_;
    detail::SiteBranches ba_, bb_;
    std::vector<double> branch_cdf_;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> marginal_cache_;
};

/// One joint detection event (rotates each site into its setting basis,
/// samples from the exact joint photon-count distribution).
inline MeasurementRecord sample_counts(const BipartiteState& state,
                                       const MeasurementSetting& a, const MeasurementSetting& b,
                                       CounterRng& rng, const OFilterConfig* filter_a = nullptr,
                                       const OFilterConfig* filter_b = nullptr) {
    const double phi_a = a.site == Site::A ? a.basis_phase : b.basis_phase;
    const double phi_b = a.site == Site::A ? b.basis_phase : a.basis_phase;
    SamplingPlan plan(state, phi_a, phi_b, filter_a, filter_b);
    return plan.sample(rng);
}

/// E = (N++ + N-- - N+- - N-+)/N_used over conclusive, filter-accepted
/// records. In enumeration mode the value is exact and the counts/stderr
/// are the expectations for the configured sample budget.
inline CorrelationEstimate correlation(const BipartiteState& state, double phi_a, double phi_b,
                                       long n_samples, CounterRng& rng,
                                       EstimationMode mode = EstimationMode::Enumerate,
                                       const OFilterConfig* filter_a = nullptr,
                                       const OFilterConfig* filter_b = nullptr) {
    if (n_samples < 1) throw ConfigError("correlation: n_samples must be >= 1");
    CorrelationEstimate est;
    if (mode == EstimationMode::Enumerate) {
        const ExactJoint j = exact_joint(state, phi_a, phi_b, filter_a, filter_b);
        if (j.p_conclusive <= 0.0)
            throw AllDiscarded("correlation: no conclusive outcomes in enumeration");
        est.value = j.correlation;
        est.n_used = std::lround(j.p_conclusive * double(n_samples));
        est.n_discarded = n_samples - est.n_used;
        const long n_eff = std::max(1L, est.n_used);
        est.standard_error = std::sqrt(std::max(0.0, 1.0 - est.value * est.value) / double(n_eff));
        return est;
    }

    SamplingPlan plan(state, phi_a, phi_b, filter_a, filter_b);
    long n_pp = 0, n_pm = 0, n_mp = 0, n_mm = 0, used = 0;
    for (long i = 0; i < n_samples; ++i) {
        const MeasurementRecord rec = plan.sample(rng);
        if (!rec.conclusive()) continue;
        ++used;
        if (rec.outcome_a > 0 && rec.outcome_b > 0) ++n_pp;
        else if (rec.outcome_a > 0) ++n_pm;
        else if (rec.outcome_b > 0) ++n_mp;
        else ++n_mm;
    }
    if (used == 0) throw AllDiscarded("correlation: every record was discarded");
    est.value = double(n_pp + n_mm - n_pm - n_mp) / double(used);
    est.n_used = used;
    est.n_discarded = n_samples - used;
    est.standard_error = std::sqrt(std::max(0.0, 1.0 - est.value * est.value) / double(used));
    return est;
}

struct FringePoint {
    double phase = 0.0;
    CorrelationEstimate estimate;
};

struct FringeScan {
    std::vector<FringePoint> points;
    double visibility = 0.0;  // (E_max - E_min)/2
};

/// Correlation as a function of the scanned analyzer phase, the other
/// analyzer held fixed.
inline FringeScan fringe_scan(const BipartiteState& state, const MeasurementSetting& fixed,
                              const std::vector<double>& scan_phases, long n_samples,
                              CounterRng& rng, EstimationMode mode = EstimationMode::Enumerate,
                              const OFilterConfig* filter_a = nullptr,
                              const OFilterConfig* filter_b = nullptr) {
    FringeScan scan;
    double emax = -2.0, emin = 2.0;
    for (double phi : scan_phases) {
        const double phi_a = fixed.site == Site::A ? fixed.basis_phase : phi;
        const double phi_b = fixed.site == Site::A ? phi : fixed.basis_phase;
        auto sub = rng.split(static_cast<std::uint64_t>(scan.points.size()));
        const CorrelationEstimate e =
            correlation(state, phi_a, phi_b, n_samples, sub, mode, filter_a, filter_b);
        emax = std::max(emax, e.value);
        emin = std::min(emin, e.value);
        scan.points.push_back({phi, e});
    }
    scan.visibility = 0.5 * (emax - emin);
    return scan;
}

struct ChshResult {
    std::array<std::pair<double, double>, 4> settings;  // (a,b), (a,b'), (a',b), (a',b')
    std::array<CorrelationEstimate, 4> estimates;
    double S = 0.0;
    double standard_error = 0.0;
    bool violation = false;  // S - 2 > 3 stderr
};

/// CHSH combination S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|. The same
/// (settings-blind) filter objects are used for all four pairs.
inline ChshResult chsh(const BipartiteState& state,
                       const std::array<std::pair<double, double>, 4>& settings, long n_samples,
                       CounterRng& rng, EstimationMode mode = EstimationMode::Enumerate,
                       const OFilterConfig* filter_a = nullptr,
                       const OFilterConfig* filter_b = nullptr) {
    ChshResult res;
    res.settings = settings;
    double var = 0.0;
    for (int k = 0; k < 4; ++k) {
        auto sub = rng.split(static_cast<std::uint64_t>(k) + 101);
        res.estimates[k] = correlation(state, settings[k].first, settings[k].second, n_samples,
                                       sub, mode, filter_a, filter_b);
        var += res.estimates[k].standard_error * res.estimates[k].standard_error;
    }
    res.S = std::abs(res.estimates[0].value - res.estimates[1].value + res.estimates[2].value +
                     res.estimates[3].value);
    res.standard_error = std::sqrt(var);
    res.violation = res.S - 2.0 > 3.0 * res.standard_error;
    return res;
}

/// The optimal equatorial settings pattern for the singlet
/// (a, a') = (0, pi/2), (b, b') = (pi/4, 3 pi/4).
inline std::array<std::pair<double, double>, 4> chsh_optimal_settings() {
    const double a = 0.0, ap = kPi / 2, b = kPi / 4, bp = 3 * kPi / 4;
    return {{{a, b}, {a, bp}, {ap, b}, {ap, bp}}};
}

} // namespace qiopa
