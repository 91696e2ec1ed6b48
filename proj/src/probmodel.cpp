#include "crackdet/probmodel.hpp"

#include <cmath>

namespace crackdet {

namespace {

struct CoeffsLd {
    long double w, w0;
};

CoeffsLd coeffs_ld(const GaussianClassModel& m) {
    const long double mu0 = m.mu0, mu1 = m.mu1, s2 = static_cast<long double>(m.sigma) * m.sigma;
    const long double p1 = m.prior1;
    CoeffsLd c;
    c.w = (mu1 - mu0) / s2;
    c.w0 = (mu0 * mu0 - mu1 * mu1) / (2.0L * s2) + std::log(p1 / (1.0L - p1));
    return c;
}

long double sigmoid_ld(long double a) {
    if (a >= 0.0L) return 1.0L / (1.0L + std::exp(-a));
    const long double e = std::exp(a);
    return e / (1.0L + e);
}

}  // namespace

LinearExponent linear_exponent(const GaussianClassModel& m) {
    m.validate();
    const CoeffsLd c = coeffs_ld(m);
    return {static_cast<double>(c.w), static_cast<double>(c.w0)};
}

double posterior_direct(const GaussianClassModel& m, double x) {
    m.validate();
    const long double s2 = static_cast<long double>(m.sigma) * m.sigma;
    const long double d0 = x - static_cast<long double>(m.mu0);
    const long double d1 = x - static_cast<long double>(m.mu1);
    // log of density * prior for each class; the shared 1/(sigma sqrt(2 pi))
    // factor cancels in the ratio
    const long double l0 = -d0 * d0 / (2.0L * s2) + std::log(1.0L - static_cast<long double>(m.prior1));
    const long double l1 = -d1 * d1 / (2.0L * s2) + std::log(static_cast<long double>(m.prior1));
    const long double top = l0 > l1 ? l0 : l1;
    const long double e0 = std::exp(l0 - top);
    const long double e1 = std::exp(l1 - top);
    return static_cast<double>(e1 / (e0 + e1));
}

double posterior_via_sigmoid(const GaussianClassModel& m, double x) {
    m.validate();
    const CoeffsLd c = coeffs_ld(m);
    return static_cast<double>(sigmoid_ld(c.w * x + c.w0));
}

}  // namespace crackdet
