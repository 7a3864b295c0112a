#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qiopa/fock.hpp"
#include "qiopa/rng.hpp"
#include "support.hpp"

using namespace qiopa;
using qiopa_test::random_tensor;

namespace {
const FockCutoff kCut4{4};
const BasisTag kEq0 = BasisTag::equatorial(0.0);

double total_photon_expectation(const ModeTensor& t) {
    const auto [n1, n2] = t.mean_photon_numbers();
    return n1 + n2;
}
} // namespace

TEST_CASE("vacuum state", "[fock]") {
    const ModeTensor v = vacuum(kCut4, kEq0);
    CHECK(v.norm() == Catch::Approx(1.0).epsilon(0.0).margin(1e-15));
    const auto [n1, n2] = v.mean_photon_numbers();
    CHECK(n1 == 0.0);
    CHECK(n2 == 0.0);
    CHECK(std::abs(overlap(v, v) - Complex(1.0, 0.0)) < 1e-15);

    const ModeTensor one = apply_ladder(v, 1, LadderKind::Create);
    CHECK(std::abs(one.amp(1, 0) - Complex(1.0, 0.0)) < 1e-15);
    CHECK(one.norm() == Catch::Approx(1.0).epsilon(0.0).margin(1e-15));
}

TEST_CASE("ladder coefficients", "[fock]") {
    const ModeTensor v = vacuum(kCut4, kEq0);

    SECTION("annihilating the vacuum gives the zero tensor") {
        CHECK(apply_ladder(v, 1, LadderKind::Annihilate).norm() == 0.0);
        CHECK(apply_ladder(v, 2, LadderKind::Annihilate).norm() == 0.0);
    }

    SECTION("double creation carries sqrt(2)") {
        const ModeTensor two =
            apply_ladder(apply_ladder(v, 1, LadderKind::Create), 1, LadderKind::Create);
        CHECK(std::abs(two.amp(2, 0) - Complex(std::sqrt(2.0), 0.0)) < 1e-14);
    }

    SECTION("strict creation at the top level raises CutoffOverflow") {
        const ModeTensor top = fock_state(kCut4, 4, 0, kEq0);
        CHECK_THROWS_AS(apply_ladder(top, 1, LadderKind::Create, true), CutoffOverflow);
        CHECK_NOTHROW(apply_ladder(top, 2, LadderKind::Create, true));
    }

    SECTION("[a, a+] = 1 on the retained subspace") {
        CounterRng rng(7);
        const ModeTensor psi = random_tensor(kCut4, kEq0, rng, 3);  // no support at n_max
        for (int mode : {1, 2}) {
            const ModeTensor lhs =
                apply_ladder(apply_ladder(psi, mode, LadderKind::Create), mode,
                             LadderKind::Annihilate);
            const ModeTensor rhs =
                apply_ladder(apply_ladder(psi, mode, LadderKind::Annihilate), mode,
                             LadderKind::Create);
            CHECK((lhs.amps() - rhs.amps() - psi.amps()).norm() < 1e-13);
        }
    }
}

TEST_CASE("basis rotation", "[fock]") {
    SECTION("|1_H> in the phi = 0 basis has weights +-1/sqrt(2)") {
        const ModeTensor h = fock_state(kCut4, 1, 0, BasisTag::hv());
        const ModeTensor r = rotate_basis(h, kEq0);
        const double s = 1.0 / std::sqrt(2.0);
        CHECK(std::abs(r.amp(1, 0) - Complex(s, 0.0)) < 1e-14);
        CHECK(std::abs(r.amp(0, 1) - Complex(-s, 0.0)) < 1e-14);
        CHECK(r.norm() == Catch::Approx(1.0).epsilon(0.0).margin(1e-12));
    }

    SECTION("rotate there and back is the identity to 1e-10") {
        CounterRng rng(11);
        const FockCutoff cut{6};
        for (int trial = 0; trial < 5; ++trial) {
            const ModeTensor psi = random_tensor(cut, kEq0, rng, 3);
            const double phi = 2.0 * kPi * rng.uniform01();
            const ModeTensor back =
                rotate_basis(rotate_basis(psi, BasisTag::equatorial(phi)), kEq0);
            CHECK((back.amps() - psi.amps()).norm() < 1e-10);
        }
    }

    SECTION("total photon number expectation is preserved (brute force, cutoff 6)") {
        CounterRng rng(13);
        const FockCutoff cut{6};
        const ModeTensor psi = random_tensor(cut, kEq0, rng, 3);
        const double before = total_photon_expectation(psi);
        for (double phi : {0.3, 1.1, 2.9}) {
            const ModeTensor rot = rotate_basis(psi, BasisTag::equatorial(phi));
            CHECK(total_photon_expectation(rot) == Catch::Approx(before).epsilon(0.0).margin(1e-10));
            CHECK(rot.norm() == Catch::Approx(1.0).epsilon(0.0).margin(1e-10));
        }
    }

    SECTION("HV and equatorial tags compose") {
        CounterRng rng(17);
        const ModeTensor psi = random_tensor(kCut4, BasisTag::hv(), rng, 2);
        const ModeTensor via =
            rotate_basis(rotate_basis(psi, BasisTag::equatorial(0.7)), BasisTag::hv());
        CHECK((via.amps() - psi.amps()).norm() < 1e-11);
    }
}

TEST_CASE("overlap contract", "[fock]") {
    SECTION("orthogonal Fock states") {
        CHECK(std::abs(overlap(fock_state(kCut4, 1, 0, kEq0), fock_state(kCut4, 0, 1, kEq0))) ==
              0.0);
    }

    SECTION("conjugate symmetry") {
        CounterRng rng(19);
        const ModeTensor x = random_tensor(kCut4, kEq0, rng);
        const ModeTensor y = random_tensor(kCut4, kEq0, rng);
        CHECK(std::abs(overlap(x, y) - std::conj(overlap(y, x))) < 1e-13);
    }

    SECTION("mismatched cutoffs raise") {
        CHECK_THROWS_AS(overlap(vacuum(FockCutoff{4}), vacuum(FockCutoff{5})), CutoffMismatch);
    }

    SECTION("auto-rotation agrees with explicit rotation") {
        CounterRng rng(23);
        const ModeTensor x = random_tensor(kCut4, kEq0, rng, 2);
        const ModeTensor y_rot =
            rotate_basis(random_tensor(kCut4, kEq0, rng, 2), BasisTag::equatorial(1.3));
        const Complex direct = overlap(x, y_rot);
        const Complex explicit_rot = overlap(x, rotate_basis(y_rot, kEq0));
        CHECK(std::abs(direct - explicit_rot) < 1e-12);
    }
}
