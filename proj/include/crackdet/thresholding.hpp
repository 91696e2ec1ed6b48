#pragma once

#include <vector>

#include "crackdet/image.hpp"

namespace crackdet {

struct ThresholdConfig {
    double contrast_stop = 0.90;  // C_s
    int max_iterations = 16;
    double ittt_epsilon = 1e-3;

    void validate() const {
        if (!(contrast_stop > 0.0 && contrast_stop < 1.0))
            throw ConfigInvalid("contrast_stop must be in (0,1)");
        if (max_iterations < 1) throw ConfigInvalid("max_iterations must be >= 1");
        if (!(ittt_epsilon > 0.0)) throw ConfigInvalid("ittt_epsilon must be positive");
    }
};

enum class CbatStop { ContrastReached, IterationCap, DegenerateRoi };

struct CbatTrace {
    std::vector<double> thresholds;  // T^1, T^2, ... strictly increasing
    std::vector<double> contrasts;   // C^1, C^2, ... same length
    CbatStop terminated_by = CbatStop::ContrastReached;
};

struct CbatResult {
    double threshold = 0.0;  // T_u
    CbatTrace trace;
};

// Otsu split over the active bin range: returns (b*+1)/256 where b* in
// [lo, hi-1] maximizes the between-class variance, ties to the smallest b.
double otsu_threshold(const Histogram& h);

// Same search, but also reports the winning split bin.
int otsu_split_bin(const Histogram& h);

// Repeated Otsu on a shrinking region of interest; stops once the interclass
// contrast between the surviving region and the newly split-off band exceeds
// contrast_stop, the iteration cap is hit, or the region degenerates.
CbatResult cbat_threshold(const Histogram& h, const ThresholdConfig& cfg = {});

// Isodata iteration T <- (mean below + mean above)/2 from the global mean,
// stopping when the threshold moves by less than ittt_epsilon.
double ittt_threshold(const Histogram& h, const ThresholdConfig& cfg = {});

// Min-max stretch of the occupied range onto the full bin axis, Otsu on the
// stretched histogram, split mapped back through the inverse affine map.
double cat_threshold(const Histogram& h);

// s = 1 iff p > T (strict); equality goes to background.
BinaryMap apply_threshold(const ProbabilityMap& map, double threshold);

// |mu_roi - mu_b| / (mu_roi + mu_b), in [0,1].
double interclass_contrast(double mu_roi, double mu_b);

}  // namespace crackdet
