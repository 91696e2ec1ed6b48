#include "crackdet/thresholding.hpp"

#include <cmath>
#include <cstdint>

namespace crackdet {

namespace {

// Between-class variance score for a split at bin b (classes [lo..b] and
// [b+1..hi]). Counts and the (2i+1)-weighted sums are integers, so the score
// is a pure function of the split with no accumulation-order effects; the
// exhaustive oracle lands on bit-identical values.
double split_score(std::uint64_t n0, std::uint64_t s0, std::uint64_t n1, std::uint64_t s1) {
    if (n0 == 0 || n1 == 0) return -1.0;
    // omega0*omega1*(mu0-mu1)^2 up to a constant factor:
    //   (s0*n1 - s1*n0)^2 / (n0*n1)
    const double d = static_cast<double>(s0) * static_cast<double>(n1) -
                     static_cast<double>(s1) * static_cast<double>(n0);
    return d * d / (static_cast<double>(n0) * static_cast<double>(n1));
}

double mean_of_range(const Histogram& h, int lo, int hi) {
    std::uint64_t n = 0, s = 0;
    for (int i = lo; i <= hi; ++i) {
        n += h.bins[i];
        s += h.bins[i] * static_cast<std::uint64_t>(2 * i + 1);
    }
    if (n == 0) return 0.0;
    // sum of bin midpoints (2i+1)/512 weighted by counts
    return static_cast<double>(s) / (512.0 * static_cast<double>(n));
}

int first_occupied(const Histogram& h, int lo, int hi) {
    for (int i = lo; i <= hi; ++i)
        if (h.bins[i] > 0) return i;
    return -1;
}

}  // namespace

int otsu_split_bin(const Histogram& h) {
    if (h.occupied_bins() < 2)
        throw DegenerateHistogram("otsu needs at least two occupied bins");

    std::uint64_t n_total = 0, s_total = 0;
    for (int i = h.lo; i <= h.hi; ++i) {
        n_total += h.bins[i];
        s_total += h.bins[i] * static_cast<std::uint64_t>(2 * i + 1);
    }

    int best_bin = h.lo;
    double best_score = -1.0;
    std::uint64_t n0 = 0, s0 = 0;
    for (int b = h.lo; b < h.hi; ++b) {
        n0 += h.bins[b];
        s0 += h.bins[b] * static_cast<std::uint64_t>(2 * b + 1);
        const double score = split_score(n0, s0, n_total - n0, s_total - s0);
        if (score > best_score) {
            best_score = score;
            best_bin = b;
        }
    }
    return best_bin;
}

double otsu_threshold(const Histogram& h) {
    return Histogram::bin_edge(otsu_split_bin(h) + 1);
}

CbatResult cbat_threshold(const Histogram& h, const ThresholdConfig& cfg) {
    cfg.validate();
    if (h.occupied_bins() < 2)
        throw DegenerateHistogram("cbat needs at least two occupied bins");

    CbatResult out;
    Histogram roi = h;       // R^{m-1}_ROI
    int prev_split = h.lo - 1;  // band below starts at the ROI's lower edge (T^0)

    for (int m = 1; m <= cfg.max_iterations; ++m) {
        const int split = otsu_split_bin(roi);
        const double threshold = Histogram::bin_edge(split + 1);

        // R^m_ROI = bins above the split, R^m_b = [T^{m-1}, T^m) band
        const double mu_roi = mean_of_range(roi, split + 1, roi.hi);
        const double mu_b = mean_of_range(roi, prev_split + 1, split);
        const double contrast = interclass_contrast(mu_roi, mu_b);

        out.trace.thresholds.push_back(threshold);
        out.trace.contrasts.push_back(contrast);
        out.threshold = threshold;

        if (contrast > cfg.contrast_stop) {
            out.trace.terminated_by = CbatStop::ContrastReached;
            return out;
        }
        if (m == cfg.max_iterations) {
            out.trace.terminated_by = CbatStop::IterationCap;
            return out;
        }

        Histogram next = restrict_histogram(roi, split + 1, roi.hi);
        if (next.occupied_bins() < 2) {
            out.trace.terminated_by = CbatStop::DegenerateRoi;
            return out;
        }
        roi = next;
        prev_split = split;
    }
    // unreachable: the m == max_iterations branch returns
    out.trace.terminated_by = CbatStop::IterationCap;
    return out;
}

double ittt_threshold(const Histogram& h, const ThresholdConfig& cfg) {
    cfg.validate();
    if (h.occupied_bins() < 2)
        throw DegenerateHistogram("ittt needs at least two occupied bins");

    double t = mean_of_range(h, h.lo, h.hi);
    // classes split at bin granularity: midpoints <= t vs > t
    for (int iter = 0; iter < 4 * Histogram::kBins; ++iter) {
        int split = h.lo - 1;
        while (split + 1 <= h.hi && Histogram::bin_midpoint(split + 1) <= t) ++split;
        const double mu_lo = mean_of_range(h, h.lo, split);
        const double mu_hi = mean_of_range(h, split + 1, h.hi);
        const double next = 0.5 * (mu_lo + mu_hi);
        if (std::abs(next - t) < cfg.ittt_epsilon) return next;
        t = next;
    }
    return t;
}

double cat_threshold(const Histogram& h) {
    if (h.occupied_bins() < 2)
        throw DegenerateHistogram("cat needs at least two occupied bins");

    const int lo = first_occupied(h, h.lo, h.hi);
    int hi = h.hi;
    while (h.bins[hi] == 0) --hi;

    // stretch the occupied edge range [a,b] onto [0,1]
    const double a = Histogram::bin_edge(lo);
    const double b = Histogram::bin_edge(hi + 1);

    Histogram stretched;
    for (int i = lo; i <= hi; ++i) {
        if (h.bins[i] == 0) continue;
        const double u = (Histogram::bin_midpoint(i) - a) / (b - a);
        stretched.bins[histogram_bin(u)] += h.bins[i];
        stretched.total += h.bins[i];
    }
    const double stretched_t = otsu_threshold(stretched);
    return a + stretched_t * (b - a);
}

BinaryMap apply_threshold(const ProbabilityMap& map, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ThresholdOutOfRange("threshold must be in (0,1)");
    BinaryMap out;
    out.width = map.width;
    out.height = map.height;
    out.data = (map.data > threshold).cast<double>();
    return out;
}

double interclass_contrast(double mu_roi, double mu_b) {
    if (mu_roi < 0.0 || mu_b < 0.0)
        throw NumericError("interclass contrast needs non-negative means");
    if (mu_roi == 0.0 && mu_b == 0.0)
        throw BothMeansZero("interclass contrast undefined for two zero means");
    return std::abs(mu_roi - mu_b) / (mu_roi + mu_b);
}

}  // namespace crackdet
