#pragma once

#include "crackdet/errors.hpp"

namespace crackdet {

// Two-class Gaussian intensity model: intact pixels ~ N(mu0, sigma^2),
// abnormal pixels ~ N(mu1, sigma^2), shared sigma, prior P(abnormal) = prior1.
struct GaussianClassModel {
    double mu0 = 0.0;
    double mu1 = 1.0;
    double sigma = 1.0;
    double prior1 = 0.5;

    void validate() const {
        if (!(sigma > 0.0)) throw ConfigInvalid("sigma must be positive");
        if (!(prior1 > 0.0 && prior1 < 1.0)) throw ConfigInvalid("prior1 must be in (0,1)");
    }
};

struct LinearExponent {
    double w = 0.0;   // (mu1 - mu0) / sigma^2
    double w0 = 0.0;  // (mu0^2 - mu1^2) / (2 sigma^2) + ln(P1/P0)
};

// Coefficients of the log posterior-odds a(x) = w x + w0.
LinearExponent linear_exponent(const GaussianClassModel& m);

// Bayes posterior P(abnormal | x) from the class densities, evaluated in log
// space (the density ratio underflows for |x - mu| >> sigma otherwise).
double posterior_direct(const GaussianClassModel& m, double x);

// 1 / (1 + exp(-(w x + w0))). Agrees with posterior_direct to ~1e-14; both
// routes carry extended-precision intermediates so the equivalence survives
// sigma down to 1e-3, where the exponents reach ~1e5.
double posterior_via_sigmoid(const GaussianClassModel& m, double x);

}  // namespace crackdet
