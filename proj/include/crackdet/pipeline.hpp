#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crackdet/metrics.hpp"
#include "crackdet/network.hpp"
#include "crackdet/thresholding.hpp"

namespace crackdet {

enum class BinarizeMethod { Fixed, Otsu, Cbat, Ittt, Cat };

std::string method_name(BinarizeMethod m);
BinarizeMethod parse_method(const std::string& name);  // UsageError on unknown names

inline const std::vector<BinarizeMethod>& all_methods() {
    static const std::vector<BinarizeMethod> m{BinarizeMethod::Fixed, BinarizeMethod::Otsu,
                                               BinarizeMethod::Cbat, BinarizeMethod::Ittt,
                                               BinarizeMethod::Cat};
    return m;
}

struct BinarizeOutcome {
    BinaryMap map;
    double threshold = 0.0;
    bool degenerate = false;  // histogram had < 2 occupied bins; map is all background
};

BinarizeOutcome binarize_map(const ProbabilityMap& map, BinarizeMethod method,
                             const ThresholdConfig& cfg, double fixed_t);

// One scored prediction/mask pair.
struct ImageMetricsRow {
    std::string id;
    ConfusionCounts counts;
    double precision = 0.0, recall = 0.0;
    double f025 = 0.0, f03 = 0.0, af = 0.0;
    double mae = 0.0;
    std::optional<double> mape;  // absent when tp == 0
    double threshold = 0.0;
    bool degenerate = false;
    bool undefined_f = false;  // p = r = 0; F and AF reported as 0
};

ImageMetricsRow score_pair(const std::string& id, const BinaryMap& pred, const GroundTruthMask& gt,
                           const BetaRange& range, double threshold, bool degenerate);

struct AggregateMetrics {
    double precision = 0.0, recall = 0.0;
    double f025 = 0.0, f03 = 0.0, af = 0.0;
    double mae = 0.0;
    std::optional<double> mape;
    int images = 0;
};

// Arithmetic mean of the per-image rows (MAPE over the rows where defined).
AggregateMetrics aggregate_mean(const std::vector<ImageMetricsRow>& rows);

// Pools the confusion counts over the whole set, then computes the metrics once.
AggregateMetrics aggregate_pixel_pooled(const std::vector<ImageMetricsRow>& rows, const BetaRange& range);

struct MethodReport {
    std::string method;
    std::vector<ImageMetricsRow> images;  // sorted by id
    AggregateMetrics aggregate;
};

struct EvaluationReport {
    BetaRange range;
    bool pixel_pooled = false;
    std::vector<MethodReport> methods;  // stable order: fixed, otsu, cbat, ittt, cat
};

struct EvaluateOptions {
    std::vector<BinarizeMethod> methods = all_methods();
    ThresholdConfig threshold;
    double fixed_t = 0.5;
    BetaRange range;
    bool pixel_pooled = false;
    int workers = 1;
};

// Probability maps (`<stem>.qpm` / `<stem>.png`) scored against masks
// (`<stem>.mask.png` or `<stem>.png`) for every requested binarizer.
EvaluationReport evaluate_directories(const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& gt_dir, const EvaluateOptions& opts);

EvaluationReport evaluate_maps(const std::vector<std::pair<std::string, ProbabilityMap>>& maps,
                               const std::vector<GroundTruthMask>& masks, const EvaluateOptions& opts);

std::string report_to_json(const EvaluationReport& report);
std::string report_to_csv(const EvaluationReport& report);

struct CalibrationResult {
    double best_contrast_stop = 0.0;
    std::vector<std::pair<double, double>> sweep;  // (C_s, mean AF)
};

// Sweeps the contrast-stop grid and picks the value maximizing mean AF_beta
// under CBAT binarization.
CalibrationResult calibrate_contrast_stop(const std::filesystem::path& pred_dir,
                                          const std::filesystem::path& gt_dir,
                                          const std::vector<double>& grid, const BetaRange& range,
                                          const ThresholdConfig& base_cfg, int workers);

// Per-window eval-mode inference with overlap-averaged stitching. The window
// must be a multiple of 32 and no larger than the image; stride <= window.
ProbabilityMap sliding_window_infer(net::HcnnfpNetwork& net, const GrayImage& image, int window,
                                    int stride);

// Fixed worker pool; results must be written to disjoint slots by index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace crackdet
