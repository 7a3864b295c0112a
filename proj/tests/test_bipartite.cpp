#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qiopa/bipartite.hpp"
#include "qiopa/tap.hpp"
#include "support.hpp"

using namespace qiopa;
using qiopa_test::DenseTwoSite;
using qiopa_test::random_bipartite;

namespace {
const FockCutoff kCut{4};
const BasisTag kEq0 = BasisTag::equatorial(0.0);
}

TEST_CASE("schmidt normalization", "[bipartite]") {
    SECTION("single product term with weight 2 is rescaled to 1") {
        BipartiteState s({{Complex(2.0, 0.0), fock_state(kCut, 1, 0, kEq0),
                           fock_state(kCut, 0, 1, kEq0)}});
        const BipartiteState n = schmidt_norm_and_normalize(s);
        CHECK(std::abs(n.terms()[0].weight - Complex(1.0, 0.0)) < 1e-14);
        CHECK(n.norm2() == Catch::Approx(1.0).epsilon(0.0).margin(1e-14));
    }

    SECTION("two orthogonal terms with weights 1/sqrt(2) are unchanged") {
        const double r = 1.0 / std::sqrt(2.0);
        BipartiteState s({{Complex(r, 0.0), fock_state(kCut, 1, 0, kEq0),
                           fock_state(kCut, 0, 1, kEq0)},
                          {Complex(-r, 0.0), fock_state(kCut, 0, 1, kEq0),
                           fock_state(kCut, 1, 0, kEq0)}});
        const BipartiteState n = schmidt_norm_and_normalize(s);
        CHECK(std::abs(n.terms()[0].weight - Complex(r, 0.0)) < 1e-14);
        CHECK(std::abs(n.terms()[1].weight - Complex(-r, 0.0)) < 1e-14);
    }

    SECTION("random 3-term state: norm matches the dense joint-tensor oracle") {
        CounterRng rng(31);
        for (int trial = 0; trial < 6; ++trial) {
            const BipartiteState s = random_bipartite(kCut, 3, rng);
            const DenseTwoSite dense(s);
            CHECK(s.norm2() == Catch::Approx(dense.norm2()).epsilon(0.0).margin(1e-12));
            const BipartiteState n = schmidt_norm_and_normalize(s);
            CHECK(n.norm2() == Catch::Approx(1.0).epsilon(0.0).margin(1e-12));
            CHECK(DenseTwoSite(n).norm2() == Catch::Approx(1.0).epsilon(0.0).margin(1e-12));
        }
    }

    SECTION("zero-norm state raises") {
        BipartiteState z({{Complex(0.0, 0.0), vacuum(kCut, kEq0), vacuum(kCut, kEq0)}});
        CHECK_THROWS_AS(schmidt_norm_and_normalize(z), ZeroNorm);
    }
}

TEST_CASE("schmidt overlaps equal dense overlaps", "[bipartite]") {
    CounterRng rng(37);
    for (int trial = 0; trial < 6; ++trial) {
        const BipartiteState x = random_bipartite(kCut, 2, rng);
        const BipartiteState y = random_bipartite(kCut, 3, rng);
        const Complex schmidt = overlap(x, y);
        const Complex dense = DenseTwoSite(x).overlap(DenseTwoSite(y));
        CHECK(std::abs(schmidt - dense) < 1e-12);
    }
}

TEST_CASE("beamsplitter tap", "[bipartite]") {
    SECTION("R = 0 transmits everything") {
        CounterRng rng(41);
        const ModeTensor psi = qiopa_test::random_tensor(kCut, kEq0, rng);
        const TapResult r = partial_trace_bs_tap(psi, 0.0);
        CHECK((r.transmitted.amps() - psi.amps()).norm() < 1e-14);
        CHECK(r.tapped_distribution(0, 0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-12));
    }

    SECTION("R = 1 reflects |1,0> into one tapped photon") {
        const TapResult r = partial_trace_bs_tap(fock_state(kCut, 1, 0, kEq0), 1.0);
        CHECK(r.tapped_distribution(1, 0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-14));
    }

    SECTION("R = 0.1 taps the single photon with probability 0.1") {
        const TapResult r = partial_trace_bs_tap(fock_state(kCut, 1, 0, kEq0), 0.1);
        CHECK(r.tapped_distribution(1, 0) == Catch::Approx(0.1).epsilon(0.0).margin(1e-14));
        CHECK(r.tapped_distribution(0, 0) == Catch::Approx(0.9).epsilon(0.0).margin(1e-14));
    }

    SECTION("binomial loss oracle on |3,2>") {
        const double rr = 0.3, tt = 0.7;
        const auto outcomes = tap_enumerate(fock_state(kCut, 3, 2, kEq0), rr);
        auto binom = [](int n, int k) {
            double v = 1.0;
            for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
            return v;
        };
        double total = 0.0;
        for (const auto& o : outcomes) {
            const double expect = binom(3, o.m) * std::pow(rr, o.m) * std::pow(tt, 3 - o.m) *
                                  binom(2, o.n) * std::pow(rr, o.n) * std::pow(tt, 2 - o.n);
            CHECK(o.probability == Catch::Approx(expect).epsilon(0.0).margin(1e-13));
            total += o.probability;
        }
        CHECK(total == Catch::Approx(1.0).epsilon(0.0).margin(1e-12));
    }

    SECTION("tap commutes with superposition (Kraus linearity)") {
        CounterRng rng(43);
        const ModeTensor psi = qiopa_test::random_tensor(kCut, kEq0, rng);
        const TapKraus kraus(kCut, 0.25);
        const ModeTensor k00 = kraus.apply(psi, 0, 0);
        // K_00 acts diagonally with sqrt(T)^(n1+n2)
        for (int n = 0; n < kCut.dim(); ++n)
            for (int m = 0; m < kCut.dim(); ++m)
                CHECK(std::abs(k00.amp(n, m) -
                               psi.amp(n, m) * std::pow(std::sqrt(0.75), n + m)) < 1e-13);
    }
}
