#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crackdet/image.hpp"

namespace crackdet {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

// Range of F-measure weights beta^2; both limits in (0,1], strictly ordered.
struct BetaRange {
    double beta2_lo = 0.25;
    double beta2_hi = 0.30;

    void validate() const {
        if (!(beta2_lo > 0.0 && beta2_lo < beta2_hi && beta2_hi <= 1.0))
            throw ConfigInvalid("beta range must satisfy 0 < lo < hi <= 1");
    }
};

ConfusionCounts confusion(const BinaryMap& pred, const GroundTruthMask& gt);

// Precision tp/(tp+fp) and recall tp/(tp+fn). Undefined ratios (empty
// prediction or empty ground truth) are reported as 0 so batch evaluation
// penalizes rather than aborts; callers can flag them via the helpers below.
PrecisionRecall precision_recall(const ConfusionCounts& c);

inline bool precision_defined(const ConfusionCounts& c) { return c.tp + c.fp > 0; }
inline bool recall_defined(const ConfusionCounts& c) { return c.tp + c.fn > 0; }

// (1+beta^2) p r / (beta^2 p + r)
double f_measure(const PrecisionRecall& pr, double beta2);

// Closed-form mean of F over [beta2_lo, beta2_hi]:
//   r + (r/p) (p-r)/(hi-lo) ln((p hi + r)/(p lo + r))
// with the p == 0 and p == r limits handled explicitly.
double average_f_measure(const PrecisionRecall& pr, const BetaRange& range);

// Trapezoidal integration of the F-measure over the same range; exists to
// validate the closed form and is kept independent of it.
double af_numeric_oracle(const PrecisionRecall& pr, const BetaRange& range, int n_points);

double mae(const BinaryMap& pred, const GroundTruthMask& gt);

// (fp+fn)/tp; may exceed 1.
double mape(const BinaryMap& pred, const GroundTruthMask& gt);

std::vector<std::pair<double, double>> beta_sweep(const PrecisionRecall& pr,
                                                  const std::vector<double>& beta2_grid);

}  // namespace crackdet
