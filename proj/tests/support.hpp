#pragma once

#include <cmath>

#include "mbgw/verify.hpp"

namespace mbgw::test {

inline ModelSpec spec_of(std::vector<double> alpha, std::vector<std::vector<std::pair<Counts, double>>> laws,
                         std::vector<double> xi = {}) {
    ModelSpec s;
    s.d = static_cast<int>(alpha.size());
    s.alpha = std::move(alpha);
    for (auto& law : laws) {
        OffspringLaw L;
        for (auto& [c, p] : law) L.atoms.push_back(Atom{c, p});
        s.offspring.push_back(std::move(L));
    }
    if (xi.empty()) xi.assign(s.d, 1.0 / s.d);
    s.xi = std::move(xi);
    return s;
}

// Binary fission at rate a: closed forms in s with e = e^{-a t}, q = 1 - e.
inline double bf_F(double a, double t, double s) {
    double e = std::exp(-a * t);
    return s * e / (1.0 - s * (1.0 - e));
}
inline double bf_dF(double a, double t, double s) {
    double e = std::exp(-a * t), den = 1.0 - s * (1.0 - e);
    return e / (den * den);
}
inline double bf_d2F(double a, double t, double s) {
    double e = std::exp(-a * t), q = 1.0 - e, den = 1.0 - s * q;
    return 2.0 * e * q / (den * den * den);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace mbgw::test
