#pragma once

#include <cmath>

#include "qiopa/errors.hpp"

namespace qiopa {

/// Nonlinear gain of the parametric amplifier with its derived quantities
/// C = cosh g, S = sinh g, Gamma = S/C = tanh g.
struct GainParams {
    double g = 0.0;
    double C = 1.0;
    double S = 0.0;
    double Gamma = 0.0;

    static GainParams from_g(double g) {
        if (!(g >= 0.0) || !std::isfinite(g))
            throw ConfigError("gain: g must be a finite non-negative real, got " +
                              std::to_string(g));
        GainParams p;
        p.g = g;
        p.C = std::cosh(g);
        p.S = std::sinh(g);
        p.Gamma = std::tanh(g);
        return p;
    }
};

} // namespace qiopa
