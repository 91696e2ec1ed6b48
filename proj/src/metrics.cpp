#include "crackdet/metrics.hpp"

#include <cmath>

namespace crackdet {

namespace {

void check_dims(int pw, int ph, int gw, int gh) {
    if (pw != gw || ph != gh) throw DimensionMismatch("prediction/mask dimensions differ");
}

}  // namespace

ConfusionCounts confusion(const BinaryMap& pred, const GroundTruthMask& gt) {
    check_dims(pred.width, pred.height, gt.width, gt.height);
    ConfusionCounts c;
    for (Eigen::Index i = 0; i < pred.data.size(); ++i) {
        const bool s = pred.data[i] != 0.0;
        const bool y = gt.data[i] != 0.0;
        if (s && y)
            ++c.tp;
        else if (s && !y)
            ++c.fp;
        else if (!s && y)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

PrecisionRecall precision_recall(const ConfusionCounts& c) {
    PrecisionRecall pr;
    pr.precision = precision_defined(c) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    pr.recall = recall_defined(c) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    return pr;
}

double f_measure(const PrecisionRecall& pr, double beta2) {
    if (!(beta2 > 0.0)) throw ConfigInvalid("beta2 must be positive");
    const double p = pr.precision, r = pr.recall;
    if (p == 0.0 && r == 0.0) throw UndefinedMeasure("F undefined for p = r = 0");
    return (1.0 + beta2) * p * r / (beta2 * p + r);
}

double average_f_measure(const PrecisionRecall& pr, const BetaRange& range) {
    range.validate();
    const double p = pr.precision, r = pr.recall;
    if (p == 0.0 && r == 0.0) throw UndefinedMeasure("AF undefined for p = r = 0");
    if (p == 0.0) return 0.0;
    if (p == r) return r;
    const double lo = range.beta2_lo, hi = range.beta2_hi;
    return r + (r / p) * (p - r) / (hi - lo) * std::log((p * hi + r) / (p * lo + r));
}

double af_numeric_oracle(const PrecisionRecall& pr, const BetaRange& range, int n_points) {
    range.validate();
    if (n_points < 2) throw ConfigInvalid("trapezoid rule needs at least 2 points");
    const double p = pr.precision, r = pr.recall;
    if (p == 0.0 && r == 0.0) throw UndefinedMeasure("AF undefined for p = r = 0");
    const double lo = range.beta2_lo, hi = range.beta2_hi;
    const double step = (hi - lo) / (n_points - 1);
    double sum = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const double b2 = lo + step * i;
        const double f = (1.0 + b2) * p * r / (b2 * p + r);
        sum += (i == 0 || i == n_points - 1) ? 0.5 * f : f;
    }
    return sum * step / (hi - lo);
}

double mae(const BinaryMap& pred, const GroundTruthMask& gt) {
    const ConfusionCounts c = confusion(pred, gt);
    return static_cast<double>(c.fp + c.fn) / static_cast<double>(c.total());
}

double mape(const BinaryMap& pred, const GroundTruthMask& gt) {
    const ConfusionCounts c = confusion(pred, gt);
    if (c.tp == 0) throw NoTruePositives("MAPE undefined without true positives");
    return static_cast<double>(c.fp + c.fn) / static_cast<double>(c.tp);
}

std::vector<std::pair<double, double>> beta_sweep(const PrecisionRecall& pr,
                                                  const std::vector<double>& beta2_grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(beta2_grid.size());
    for (double b2 : beta2_grid) out.emplace_back(b2, f_measure(pr, b2));
    return out;
}

}  // namespace crackdet
