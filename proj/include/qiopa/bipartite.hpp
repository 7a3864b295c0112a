#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qiopa/fock.hpp"

namespace qiopa {

enum class Site { A, B };

/// One product term of a Schmidt-form bipartite state.
struct SchmidtTerm {
    Complex weight;
    ModeTensor site_a;
    ModeTensor site_b;
};

/// Bipartite pure state kept as a short sum of product terms
/// sum_r w_r |a_r> (x) |b_r>. Every state this library produces has at most
/// four terms; the dense two-site tensor is never materialized outside test
/// oracles.
class BipartiteState {
public:
    explicit BipartiteState(std::vector<SchmidtTerm> terms) : terms_(std::move(terms)) {
        if (terms_.empty()) throw ConfigError("BipartiteState: needs at least one term");
    }

    const std::vector<SchmidtTerm>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }

    const ModeTensor& site(Site s, std::size_t r) const {
        return s == Site::A ? terms_[r].site_a : terms_[r].site_b;
    }

    double norm2() const;
    double norm() const { return std::sqrt(norm2()); }

    BipartiteState scaled(Complex factor) const {
        std::vector<SchmidtTerm> t = terms_;
        for (auto& term : t) term.weight *= factor;
        return BipartiteState(std::move(t));
    }

    /// Applies a per-tensor map to one site of every term.
    BipartiteState transformed(Site s, const std::function<ModeTensor(const ModeTensor&)>& f) const {
        std::vector<SchmidtTerm> t = terms_;
        for (auto& term : t) {
            if (s == Site::A) term.site_a = f(term.site_a);
            else term.site_b = f(term.site_b);
        }
        return BipartiteState(std::move(t));
    }

private:
    std::vector<SchmidtTerm> terms_;
};

/// <x|y> from pairwise tensor overlaps.
inline Complex overlap(const BipartiteState& x, const BipartiteState& y) {
    Complex acc(0.0, 0.0);
    for (const auto& tr : x.terms())
        for (const auto& ts : y.terms())
            acc += std::conj(tr.weight) * ts.weight *
                   overlap(tr.site_a, ts.site_a) *
                   overlap(tr.site_b, ts.site_b);
    return acc;
}

inline double BipartiteState::norm2() const {
    return std::real(overlap(*this, *this));
}

/// Unit-norm copy; the norm is computed from the cross-term overlaps.
inline BipartiteState schmidt_norm_and_normalize(const BipartiteState& s) {
    const double n2 = s.norm2();
    if (n2 < 1e-280) throw ZeroNorm("schmidt_norm_and_normalize: zero-norm state");
    return s.scaled(1.0 / std::sqrt(n2));
}

inline double fidelity(const BipartiteState& x, const BipartiteState& y) {
    const double nx = x.norm2(), ny = y.norm2();
    if (nx <= 0 || ny <= 0) throw ZeroNorm("fidelity: zero state");
    return std::norm(overlap(x, y)) / (nx * ny);
}

} // namespace qiopa
