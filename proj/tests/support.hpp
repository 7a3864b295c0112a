#pragma once

// Shared test helpers: random-state generators and the dense two-site
// oracle. The oracle flattens a Schmidt-form state into the full
// (n_max+1)^4 joint tensor and evaluates norms/overlaps directly; it is the
// independent route every Schmidt-form computation is checked against at
// small cutoff.

#include <complex>
#include <vector>

#include "qiopa/bipartite.hpp"
#include "qiopa/fock.hpp"
#include "qiopa/rng.hpp"

namespace qiopa_test {

using qiopa::Complex;

inline qiopa::ModeTensor random_tensor(qiopa::FockCutoff cutoff, qiopa::BasisTag basis,
                                       qiopa::CounterRng& rng, int top_level = -1) {
    qiopa::ModeTensor t(cutoff, basis);
    const int lim = top_level < 0 ? cutoff.n_max : top_level;
    for (int n = 0; n <= lim; ++n)
        for (int m = 0; m <= lim; ++m)
            t.set_amp(n, m, Complex(rng.uniform01() - 0.5, rng.uniform01() - 0.5));
    return t.normalized();
}

inline qiopa::BipartiteState random_bipartite(qiopa::FockCutoff cutoff, int n_terms,
                                              qiopa::CounterRng& rng) {
    std::vector<qiopa::SchmidtTerm> terms;
    const auto basis = qiopa::BasisTag::equatorial(0.0);
    for (int r = 0; r < n_terms; ++r)
        terms.push_back({Complex(rng.uniform01() - 0.5, rng.uniform01() - 0.5),
                         random_tensor(cutoff, basis, rng), random_tensor(cutoff, basis, rng)});
    return qiopa::BipartiteState(std::move(terms));
}

/// Dense joint tensor over (a1, a2, b1, b2).
class DenseTwoSite {
public:
    explicit DenseTwoSite(const qiopa::BipartiteState& s) {
        const auto& first = s.site(qiopa::Site::A, 0);
        d_ = first.cutoff().dim();
        basis_ = first.basis();
        v_.assign(static_cast<std::size_t>(d_) * d_ * d_ * d_, Complex(0.0, 0.0));
        for (const auto& term : s.terms()) {
            const auto a = qiopa::rotate_basis(term.site_a, basis_);
            const auto b = qiopa::rotate_basis(term.site_b, basis_);
            for (int a1 = 0; a1 < d_; ++a1)
                for (int a2 = 0; a2 < d_; ++a2)
                    for (int b1 = 0; b1 < d_; ++b1)
                        for (int b2 = 0; b2 < d_; ++b2)
                            at(a1, a2, b1, b2) +=
                                term.weight * a.amp(a1, a2) * b.amp(b1, b2);
        }
    }

    Complex& at(int a1, int a2, int b1, int b2) {
        return v_[((static_cast<std::size_t>(a1) * d_ + a2) * d_ + b1) * d_ + b2];
    }
    const Complex& at(int a1, int a2, int b1, int b2) const {
        return const_cast<DenseTwoSite*>(this)->at(a1, a2, b1, b2);
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& c : v_) s += std::norm(c);
        return s;
    }

    Complex overlap(const DenseTwoSite& other) const {
        Complex s(0.0, 0.0);
        for (std::size_t i = 0; i < v_.size(); ++i) s += std::conj(v_[i]) * other.v_[i];
        return s;
    }

    int dim() const { return d_; }

private:
    int d_ = 0;
    qiopa::BasisTag basis_ = qiopa::BasisTag::equatorial(0.0);
    std::vector<Complex> v_;
};

inline double dense_fidelity(const qiopa::BipartiteState& x, const qiopa::BipartiteState& y) {
    const DenseTwoSite dx(x), dy(y);
    return std::norm(dx.overlap(dy)) / (dx.norm2() * dy.norm2());
}

} // namespace qiopa_test
