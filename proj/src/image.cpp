#include "crackdet/image.hpp"

#include <cmath>

namespace crackdet {

Histogram build_histogram(const ProbabilityMap& map) {
    Histogram h;
    const auto n = static_cast<Eigen::Index>(map.pixel_count());
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = map.data[i];
        if (!std::isfinite(p)) throw NonFiniteValue("probability map contains non-finite value");
        ++h.bins[histogram_bin(p)];
    }
    h.total = static_cast<std::uint64_t>(n);
    h.lo = 0;
    h.hi = Histogram::kBins - 1;
    return h;
}

Histogram restrict_histogram(const Histogram& h, int lo, int hi) {
    Histogram r = h;
    r.lo = lo;
    r.hi = hi;
    r.total = 0;
    for (int i = lo; i <= hi; ++i) r.total += h.bins[i];
    return r;
}

}  // namespace crackdet
