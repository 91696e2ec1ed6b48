#include "crackdet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "crackdet/image_io.hpp"

namespace crackdet {

using nlohmann::json;

std::string method_name(BinarizeMethod m) {
    switch (m) {
        case BinarizeMethod::Fixed: return "fixed";
        case BinarizeMethod::Otsu: return "otsu";
        case BinarizeMethod::Cbat: return "cbat";
        case BinarizeMethod::Ittt: return "ittt";
        case BinarizeMethod::Cat: return "cat";
    }
    return "?";
}

BinarizeMethod parse_method(const std::string& name) {
    for (BinarizeMethod m : all_methods())
        if (method_name(m) == name) return m;
    throw UsageError("unknown binarization method: " + name);
}

BinarizeOutcome binarize_map(const ProbabilityMap& map, BinarizeMethod method,
                             const ThresholdConfig& cfg, double fixed_t) {
    BinarizeOutcome out;
    double t = fixed_t;
    if (method != BinarizeMethod::Fixed) {
        const Histogram h = build_histogram(map);
        try {
            switch (method) {
                case BinarizeMethod::Otsu: t = otsu_threshold(h); break;
                case BinarizeMethod::Cbat: t = cbat_threshold(h, cfg).threshold; break;
                case BinarizeMethod::Ittt: t = ittt_threshold(h, cfg); break;
                case BinarizeMethod::Cat: t = cat_threshold(h); break;
                case BinarizeMethod::Fixed: break;
            }
        } catch (const DegenerateHistogram&) {
            // single-class map: report everything as background
            out.degenerate = true;
            out.threshold = 0.0;
            out.map = BinaryMap{map.width, map.height, Eigen::ArrayXd::Zero(map.data.size())};
            return out;
        }
    }
    out.threshold = t;
    out.map = apply_threshold(map, t);
    return out;
}

ImageMetricsRow score_pair(const std::string& id, const BinaryMap& pred, const GroundTruthMask& gt,
                           const BetaRange& range, double threshold, bool degenerate) {
    ImageMetricsRow row;
    row.id = id;
    row.counts = confusion(pred, gt);
    row.threshold = threshold;
    row.degenerate = degenerate;

    const PrecisionRecall pr = precision_recall(row.counts);
    row.precision = pr.precision;
    row.recall = pr.recall;
    row.undefined_f = pr.precision == 0.0 && pr.recall == 0.0;
    if (!row.undefined_f) {
        row.f025 = f_measure(pr, 0.25);
        row.f03 = f_measure(pr, 0.30);
        row.af = average_f_measure(pr, range);
    }
    row.mae = static_cast<double>(row.counts.fp + row.counts.fn) /
              static_cast<double>(row.counts.total());
    if (row.counts.tp > 0)
        row.mape = static_cast<double>(row.counts.fp + row.counts.fn) /
                   static_cast<double>(row.counts.tp);
    return row;
}

AggregateMetrics aggregate_mean(const std::vector<ImageMetricsRow>& rows) {
    AggregateMetrics agg;
    agg.images = static_cast<int>(rows.size());
    if (rows.empty()) return agg;
    double mape_sum = 0.0;
    int mape_n = 0;
    for (const ImageMetricsRow& r : rows) {
        agg.precision += r.precision;
        agg.recall += r.recall;
        agg.f025 += r.f025;
        agg.f03 += r.f03;
        agg.af += r.af;
        agg.mae += r.mae;
        if (r.mape) {
            mape_sum += *r.mape;
            ++mape_n;
        }
    }
    const double n = static_cast<double>(rows.size());
    agg.precision /= n;
    agg.recall /= n;
    agg.f025 /= n;
    agg.f03 /= n;
    agg.af /= n;
    agg.mae /= n;
    if (mape_n > 0) agg.mape = mape_sum / mape_n;
    return agg;
}

AggregateMetrics aggregate_pixel_pooled(const std::vector<ImageMetricsRow>& rows,
                                        const BetaRange& range) {
    AggregateMetrics agg;
    agg.images = static_cast<int>(rows.size());
    ConfusionCounts pooled;
    for (const ImageMetricsRow& r : rows) {
        pooled.tp += r.counts.tp;
        pooled.fp += r.counts.fp;
        pooled.tn += r.counts.tn;
        pooled.fn += r.counts.fn;
    }
    if (pooled.total() == 0) return agg;
    const PrecisionRecall pr = precision_recall(pooled);
    agg.precision = pr.precision;
    agg.recall = pr.recall;
    if (!(pr.precision == 0.0 && pr.recall == 0.0)) {
        agg.f025 = f_measure(pr, 0.25);
        agg.f03 = f_measure(pr, 0.30);
        agg.af = average_f_measure(pr, range);
    }
    agg.mae = static_cast<double>(pooled.fp + pooled.fn) / static_cast<double>(pooled.total());
    if (pooled.tp > 0)
        agg.mape = static_cast<double>(pooled.fp + pooled.fn) / static_cast<double>(pooled.tp);
    return agg;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers < 1) throw UsageError("worker count must be >= 1");
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int count = std::min<std::size_t>(workers, n);
    pool.reserve(count);
    for (int t = 0; t < count; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

EvaluationReport evaluate_maps(const std::vector<std::pair<std::string, ProbabilityMap>>& maps,
                               const std::vector<GroundTruthMask>& masks, const EvaluateOptions& opts) {
    if (maps.size() != masks.size()) throw DimensionMismatch("map/mask count mismatch");
    opts.range.validate();
    opts.threshold.validate();

    EvaluationReport report;
    report.range = opts.range;
    report.pixel_pooled = opts.pixel_pooled;
    for (BinarizeMethod m : opts.methods) {
        MethodReport mr;
        mr.method = method_name(m);
        mr.images.resize(maps.size());
        parallel_for(maps.size(), opts.workers, [&](std::size_t i) {
            const BinarizeOutcome bin = binarize_map(maps[i].second, m, opts.threshold, opts.fixed_t);
            mr.images[i] =
                score_pair(maps[i].first, bin.map, masks[i], opts.range, bin.threshold, bin.degenerate);
        });
        std::sort(mr.images.begin(), mr.images.end(),
                  [](const ImageMetricsRow& a, const ImageMetricsRow& b) { return a.id < b.id; });
        mr.aggregate = opts.pixel_pooled ? aggregate_pixel_pooled(mr.images, opts.range)
                                         : aggregate_mean(mr.images);
        report.methods.push_back(std::move(mr));
    }
    return report;
}

namespace {

std::vector<std::pair<std::string, std::filesystem::path>> map_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoFailure("not a directory: " + dir.string());
    std::vector<std::pair<std::string, std::filesystem::path>> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        const auto name = e.path().filename().string();
        if (name.ends_with(".mask.png")) continue;
        if (ext == ".qpm" || ext == ".png" || ext == ".pgm")
            out.emplace_back(e.path().stem().string(), e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::filesystem::path mask_path_for(const std::filesystem::path& gt_dir, const std::string& stem) {
    const auto masked = gt_dir / (stem + ".mask.png");
    if (std::filesystem::exists(masked)) return masked;
    const auto plain = gt_dir / (stem + ".png");
    if (std::filesystem::exists(plain)) return plain;
    throw DataError("no mask for " + stem + " in " + gt_dir.string());
}

std::pair<std::vector<std::pair<std::string, ProbabilityMap>>, std::vector<GroundTruthMask>>
load_eval_pairs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
    std::vector<std::pair<std::string, ProbabilityMap>> maps;
    std::vector<GroundTruthMask> masks;
    for (const auto& [stem, path] : map_files(pred_dir)) {
        maps.emplace_back(stem, load_probability_map(path));
        masks.push_back(load_mask(mask_path_for(gt_dir, stem)));
    }
    if (maps.empty()) throw EmptySample("no probability maps in " + pred_dir.string());
    return {std::move(maps), std::move(masks)};
}

json row_json(const ImageMetricsRow& r) {
    json j{{"id", r.id},
           {"tp", r.counts.tp},
           {"fp", r.counts.fp},
           {"tn", r.counts.tn},
           {"fn", r.counts.fn},
           {"precision", r.precision},
           {"recall", r.recall},
           {"f_beta@0.25", r.f025},
           {"f_beta@0.3", r.f03},
           {"af_beta", r.af},
           {"mae", r.mae},
           {"mape", r.mape ? json(*r.mape) : json(nullptr)},
           {"threshold", r.threshold}};
    json flags = json::array();
    if (r.degenerate) flags.push_back("degenerate_histogram");
    if (r.undefined_f) flags.push_back("undefined_f");
    if (!r.mape) flags.push_back("no_true_positives");
    j["flags"] = flags;
    return j;
}

json aggregate_json(const AggregateMetrics& a) {
    return json{{"images", a.images},
                {"precision", a.precision},
                {"recall", a.recall},
                {"f_beta@0.25", a.f025},
                {"f_beta@0.3", a.f03},
                {"af_beta", a.af},
                {"mae", a.mae},
                {"mape", a.mape ? json(*a.mape) : json(nullptr)}};
}

}  // namespace

EvaluationReport evaluate_directories(const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& gt_dir,
                                      const EvaluateOptions& opts) {
    auto [maps, masks] = load_eval_pairs(pred_dir, gt_dir);
    return evaluate_maps(maps, masks, opts);
}

std::string report_to_json(const EvaluationReport& report) {
    json j;
    j["beta_range"] = {{"lo", report.range.beta2_lo}, {"hi", report.range.beta2_hi}};
    j["aggregation"] = report.pixel_pooled ? "pixel_pooled" : "mean_per_image";
    j["methods"] = json::array();
    for (const MethodReport& mr : report.methods) {
        json m{{"method", mr.method}, {"aggregate", aggregate_json(mr.aggregate)}};
        m["images"] = json::array();
        for (const ImageMetricsRow& r : mr.images) m["images"].push_back(row_json(r));
        j["methods"].push_back(std::move(m));
    }
    return j.dump(2);
}

std::string report_to_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out.precision(12);
    out << "method,id,tp,fp,tn,fn,precision,recall,f_beta@0.25,f_beta@0.3,af_beta,mae,mape,"
           "threshold,flags\n";
    auto flags_of = [](const ImageMetricsRow& r) {
        std::string f;
        if (r.degenerate) f += "degenerate_histogram;";
        if (r.undefined_f) f += "undefined_f;";
        if (!r.mape) f += "no_true_positives;";
        if (!f.empty()) f.pop_back();
        return f;
    };
    for (const MethodReport& mr : report.methods) {
        for (const ImageMetricsRow& r : mr.images) {
            out << mr.method << ',' << r.id << ',' << r.counts.tp << ',' << r.counts.fp << ','
                << r.counts.tn << ',' << r.counts.fn << ',' << r.precision << ',' << r.recall << ','
                << r.f025 << ',' << r.f03 << ',' << r.af << ',' << r.mae << ',';
            if (r.mape) out << *r.mape;
            out << ',' << r.threshold << ',' << flags_of(r) << '\n';
        }
        const AggregateMetrics& a = mr.aggregate;
        out << mr.method << ",aggregate,,,,," << a.precision << ',' << a.recall << ',' << a.f025
            << ',' << a.f03 << ',' << a.af << ',' << a.mae << ',';
        if (a.mape) out << *a.mape;
        out << ",,\n";
    }
    return out.str();
}

CalibrationResult calibrate_contrast_stop(const std::filesystem::path& pred_dir,
                                          const std::filesystem::path& gt_dir,
                                          const std::vector<double>& grid, const BetaRange& range,
                                          const ThresholdConfig& base_cfg, int workers) {
    if (grid.empty()) throw UsageError("calibration grid is empty");
    auto [maps, masks] = load_eval_pairs(pred_dir, gt_dir);

    CalibrationResult result;
    double best_af = -1.0;
    for (double cs : grid) {
        EvaluateOptions opts;
        opts.methods = {BinarizeMethod::Cbat};
        opts.threshold = base_cfg;
        opts.threshold.contrast_stop = cs;
        opts.range = range;
        opts.workers = workers;
        const EvaluationReport rep = evaluate_maps(maps, masks, opts);
        const double af = rep.methods.front().aggregate.af;
        result.sweep.emplace_back(cs, af);
        if (af > best_af) {
            best_af = af;
            result.best_contrast_stop = cs;
        }
    }
    return result;
}

ProbabilityMap sliding_window_infer(net::HcnnfpNetwork& net, const GrayImage& image, int window,
                                    int stride) {
    if (window < net.config().input_size)
        throw WindowTooSmall("window must be at least the network input size");
    if (window % 32 != 0) throw UsageError("window must be a multiple of 32");
    if (stride < 1 || stride > window) throw UsageError("stride must be in [1, window]");
    if (image.width < window || image.height < window)
        throw WindowTooSmall("image smaller than the window");

    auto positions = [&](int extent) {
        std::vector<int> pos;
        for (int p = 0; p + window <= extent; p += stride) pos.push_back(p);
        if (pos.back() + window < extent) pos.push_back(extent - window);
        return pos;
    };

    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(image.data.size());
    Eigen::ArrayXd weight = Eigen::ArrayXd::Zero(image.data.size());
    for (int y0 : positions(image.height)) {
        for (int x0 : positions(image.width)) {
            GrayImage clip;
            clip.width = window;
            clip.height = window;
            clip.data.resize(static_cast<Eigen::Index>(window) * window);
            for (int y = 0; y < window; ++y)
                for (int x = 0; x < window; ++x)
                    clip.data[y * window + x] = image.data[(y0 + y) * image.width + (x0 + x)];
            const ProbabilityMap part = net.infer(clip);
            for (int y = 0; y < window; ++y)
                for (int x = 0; x < window; ++x) {
                    const Eigen::Index i = static_cast<Eigen::Index>(y0 + y) * image.width + (x0 + x);
                    sum[i] += part.data[y * window + x];
                    weight[i] += 1.0;
                }
        }
    }
    ProbabilityMap out;
    out.width = image.width;
    out.height = image.height;
    out.data = sum / weight;
    return out;
}

}  // namespace crackdet
