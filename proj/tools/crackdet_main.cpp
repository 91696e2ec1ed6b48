// Batch driver: dataset synthesis, training, inference, binarization,
// evaluation, calibration, the Bayes demo, and sliding-window inference.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "crackdet/image_io.hpp"
#include "crackdet/pipeline.hpp"
#include "crackdet/probmodel.hpp"
#include "crackdet/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crackdet;

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 1;
};

// JSON config file; command-line flags win over file values.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config: " + path);
    json j;
    in >> j;
    return j;
}

template <typename T>
void from_config(const json& cfg, const char* key, T& value, const CLI::Option* opt) {
    if (opt->count() == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

ThresholdConfig threshold_from_config(const json& cfg) {
    ThresholdConfig t;
    if (cfg.contains("contrast_stop")) t.contrast_stop = cfg.at("contrast_stop").get<double>();
    if (cfg.contains("max_iterations")) t.max_iterations = cfg.at("max_iterations").get<int>();
    if (cfg.contains("ittt_epsilon")) t.ittt_epsilon = cfg.at("ittt_epsilon").get<double>();
    return t;
}

std::vector<std::pair<std::string, fs::path>> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoFailure("not a directory: " + dir.string());
    std::vector<std::pair<std::string, fs::path>> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (name.ends_with(".mask.png")) continue;
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm" || ext == ".qpm")
            out.emplace_back(e.path().stem().string(), e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw EmptySample("no images in " + dir.string());
    return out;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> grid;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        grid.push_back(std::stod(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    if (grid.empty()) throw UsageError("empty grid");
    return grid;
}

int run(int argc, char** argv) {
    CLI::App app{"crack detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    CommonFlags common;
    app.add_option("--config", common.config_path, "JSON config file; flags override it");
    auto* seed_opt = app.add_option("--seed", common.seed, "deterministic seed");
    auto* workers_opt = app.add_option("--workers", common.workers, "worker threads for batch work");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
    SyntheticSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--count", spec.count, "number of images");
    synth->add_option("--size", spec.size, "square image size");
    synth->add_option("--min-strokes", spec.min_strokes, "min strokes per image");
    synth->add_option("--max-strokes", spec.max_strokes, "max strokes per image");
    synth->add_option("--min-width", spec.min_width, "min stroke width, px");
    synth->add_option("--max-width", spec.max_width, "max stroke width, px");
    synth->add_option("--ratio", spec.crack_ratio_target, "crack pixel ratio target");
    synth->add_option("--min-level", spec.min_stroke_level, "darkest per-image stroke intensity");
    synth->add_option("--max-level", spec.max_stroke_level, "faintest per-image stroke intensity");
    synth->add_option("--texture", spec.texture_amplitude, "background texture amplitude");
    synth->add_option("--noise", spec.noise_sigma, "additive noise sigma");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train the network on a paired dataset");
    std::string train_data, train_out, train_log;
    net::NetworkConfig ncfg;
    net::TrainConfig tcfg;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--log", train_log, "JSON-lines training log path");
    auto* epochs_opt = train->add_option("--epochs", tcfg.max_epochs, "max training epochs");
    auto* batch_opt = train->add_option("--batch", tcfg.batch_size, "batch size");
    auto* lr_opt = train->add_option("--lr", tcfg.lr, "learning rate");
    auto* base_opt = train->add_option("--base-channels", ncfg.base_channels, "channel width");
    auto* size_opt = train->add_option("--input-size", ncfg.input_size, "square input size");
    bool no_fpb = false;
    train->add_flag("--no-fpb", no_fpb, "disable the feature-preserving branch");

    // ---- infer ----
    auto* infer = app.add_subcommand("infer", "write QPM1 probability maps for a directory");
    std::string infer_ckpt, infer_in, infer_out;
    infer->add_option("--checkpoint", infer_ckpt, "HCKP checkpoint")->required();
    infer->add_option("--in", infer_in, "input image directory")->required();
    infer->add_option("--out", infer_out, "output directory")->required();

    // ---- binarize ----
    auto* binarize = app.add_subcommand("binarize", "threshold probability maps into binary PNGs");
    std::string bin_in, bin_out, bin_method = "cbat";
    double fixed_t = 0.5;
    ThresholdConfig thr;
    binarize->add_option("--in", bin_in, "probability map directory")->required();
    binarize->add_option("--out", bin_out, "output directory")->required();
    binarize->add_option("--method", bin_method, "fixed|otsu|cbat|ittt|cat");
    auto* t_opt = binarize->add_option("--t", fixed_t, "threshold for --method fixed");
    auto* cs_opt = binarize->add_option("--contrast-stop", thr.contrast_stop, "CBAT contrast stop");

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score probability maps against masks");
    std::string eval_pred, eval_gt, eval_out, eval_csv, eval_methods;
    BetaRange range;
    bool pixel_pooled = false;
    double eval_fixed_t = 0.5;
    ThresholdConfig eval_thr;
    evaluate->add_option("--pred", eval_pred, "probability map directory")->required();
    evaluate->add_option("--gt", eval_gt, "ground-truth mask directory")->required();
    evaluate->add_option("--out", eval_out, "JSON report path")->required();
    evaluate->add_option("--csv", eval_csv, "optional CSV report path");
    evaluate->add_option("--methods", eval_methods, "comma list; default all five");
    auto* lo_opt = evaluate->add_option("--beta2-lo", range.beta2_lo, "AF beta^2 lower limit");
    auto* hi_opt = evaluate->add_option("--beta2-hi", range.beta2_hi, "AF beta^2 upper limit");
    evaluate->add_flag("--pixel-pooled", pixel_pooled, "pool pixels instead of averaging images");
    evaluate->add_option("--t", eval_fixed_t, "threshold for the fixed method");
    auto* ecs_opt = evaluate->add_option("--contrast-stop", eval_thr.contrast_stop, "CBAT contrast stop");

    // ---- calibrate ----
    auto* calibrate = app.add_subcommand("calibrate", "sweep the CBAT contrast stop on a labeled sample");
    std::string cal_pred, cal_gt, cal_out, cal_grid = "0.5,0.6,0.7,0.8,0.9,0.95";
    BetaRange cal_range;
    calibrate->add_option("--pred", cal_pred, "probability map directory")->required();
    calibrate->add_option("--gt", cal_gt, "mask directory")->required();
    calibrate->add_option("--grid", cal_grid, "comma-separated contrast-stop grid");
    calibrate->add_option("--out", cal_out, "config JSON to write")->required();
    calibrate->add_option("--beta2-lo", cal_range.beta2_lo, "AF beta^2 lower limit");
    calibrate->add_option("--beta2-hi", cal_range.beta2_hi, "AF beta^2 upper limit");

    // ---- demo-bayes ----
    auto* bayes = app.add_subcommand("demo-bayes", "print the Gaussian-Bayes posterior curve as CSV");
    GaussianClassModel model;
    std::string bayes_out;
    double bx0 = -0.25, bx1 = 1.25;
    int bsteps = 101;
    bayes->add_option("--mu0", model.mu0, "intact class mean");
    bayes->add_option("--mu1", model.mu1, "abnormal class mean");
    bayes->add_option("--sigma", model.sigma, "shared standard deviation");
    bayes->add_option("--prior1", model.prior1, "abnormal prior");
    bayes->add_option("--from", bx0, "curve start");
    bayes->add_option("--to", bx1, "curve end");
    bayes->add_option("--steps", bsteps, "sample count");
    bayes->add_option("--out", bayes_out, "CSV path (default stdout)");

    // ---- sliding-window ----
    auto* sliding = app.add_subcommand("sliding-window", "stitched inference over a large image");
    std::string sw_ckpt, sw_in, sw_out;
    int sw_window = 64, sw_stride = 32;
    sliding->add_option("--checkpoint", sw_ckpt, "HCKP checkpoint")->required();
    sliding->add_option("--in", sw_in, "input image")->required();
    sliding->add_option("--window", sw_window, "window size, multiple of 32");
    sliding->add_option("--stride", sw_stride, "window stride");
    sliding->add_option("--out", sw_out, "output QPM1 path")->required();

    app.parse(argc, argv);
    const json cfg = load_config(common.config_path);
    from_config(cfg, "seed", common.seed, seed_opt);
    from_config(cfg, "workers", common.workers, workers_opt);
    if (common.workers < 1) throw UsageError("--workers must be >= 1");

    if (*synth) {
        spec.seed = common.seed;
        spec.validate();
        generate_synthetic_dataset(spec, synth_out);
        std::cout << "wrote " << spec.count << " image/mask pairs to " << synth_out << "\n";
        return 0;
    }

    if (*train) {
        from_config(cfg, "max_epochs", tcfg.max_epochs, epochs_opt);
        from_config(cfg, "batch_size", tcfg.batch_size, batch_opt);
        from_config(cfg, "lr", tcfg.lr, lr_opt);
        from_config(cfg, "base_channels", ncfg.base_channels, base_opt);
        from_config(cfg, "input_size", ncfg.input_size, size_opt);
        ncfg.fpb_enabled = !no_fpb;
        ncfg.seed = common.seed;
        tcfg.seed = common.seed;

        Dataset data = load_dataset(train_data);
        net::HcnnfpNetwork network(ncfg);
        const auto log = net::train_network(network, data, tcfg);
        network.save(train_out);
        if (!train_log.empty()) net::write_training_log(log, train_log);
        std::cout << "trained " << log.size() << " epochs, final loss " << log.back().loss << "\n";
        return 0;
    }

    if (*infer) {
        net::HcnnfpNetwork network = net::HcnnfpNetwork::load(infer_ckpt);
        fs::create_directories(infer_out);
        const auto images = list_images(infer_in);
        std::vector<ProbabilityMap> maps(images.size());
        // each worker runs eval-mode forwards against the shared read-only net
        parallel_for(images.size(), common.workers, [&](std::size_t i) {
            maps[i] = network.infer(load_gray(images[i].second));
        });
        for (std::size_t i = 0; i < images.size(); ++i)
            save_probability_map(maps[i], fs::path(infer_out) / (images[i].first + ".qpm"));
        std::cout << "wrote " << images.size() << " probability maps\n";
        return 0;
    }

    if (*binarize) {
        ThresholdConfig base = threshold_from_config(cfg);
        if (cs_opt->count()) base.contrast_stop = thr.contrast_stop;
        if (t_opt->count() == 0 && cfg.contains("fixed_t")) fixed_t = cfg.at("fixed_t").get<double>();
        base.validate();
        const BinarizeMethod method = parse_method(bin_method);

        fs::create_directories(bin_out);
        const auto images = list_images(bin_in);
        std::vector<BinarizeOutcome> outcomes(images.size());
        parallel_for(images.size(), common.workers, [&](std::size_t i) {
            outcomes[i] = binarize_map(load_probability_map(images[i].second), method, base, fixed_t);
        });
        json sidecar = json::array();
        for (std::size_t i = 0; i < images.size(); ++i) {
            save_binary_map(outcomes[i].map, fs::path(bin_out) / (images[i].first + ".png"));
            sidecar.push_back({{"id", images[i].first},
                               {"threshold", outcomes[i].threshold},
                               {"degenerate", outcomes[i].degenerate}});
        }
        std::ofstream side(fs::path(bin_out) / "thresholds.json");
        side << sidecar.dump(2) << "\n";
        std::cout << "binarized " << images.size() << " maps with " << bin_method << "\n";
        return 0;
    }

    if (*evaluate) {
        EvaluateOptions opts;
        if (!eval_methods.empty()) {
            opts.methods.clear();
            std::size_t pos = 0;
            while (pos < eval_methods.size()) {
                std::size_t next = eval_methods.find(',', pos);
                if (next == std::string::npos) next = eval_methods.size();
                opts.methods.push_back(parse_method(eval_methods.substr(pos, next - pos)));
                pos = next + 1;
            }
        }
        opts.threshold = threshold_from_config(cfg);
        if (ecs_opt->count()) opts.threshold.contrast_stop = eval_thr.contrast_stop;
        from_config(cfg, "beta2_lo", range.beta2_lo, lo_opt);
        from_config(cfg, "beta2_hi", range.beta2_hi, hi_opt);
        opts.range = range;
        opts.fixed_t = eval_fixed_t;
        opts.pixel_pooled = pixel_pooled;
        opts.workers = common.workers;

        const EvaluationReport report = evaluate_directories(eval_pred, eval_gt, opts);
        std::ofstream out(eval_out);
        if (!out) throw IoFailure("cannot write " + eval_out);
        out << report_to_json(report) << "\n";
        if (!eval_csv.empty()) {
            std::ofstream csv(eval_csv);
            if (!csv) throw IoFailure("cannot write " + eval_csv);
            csv << report_to_csv(report);
        }
        for (const MethodReport& mr : report.methods)
            std::cout << mr.method << ": AF=" << mr.aggregate.af << " F@0.3=" << mr.aggregate.f03
                      << " MAE=" << mr.aggregate.mae << "\n";
        return 0;
    }

    if (*calibrate) {
        const CalibrationResult res = calibrate_contrast_stop(
            cal_pred, cal_gt, parse_grid(cal_grid), cal_range, threshold_from_config(cfg),
            common.workers);
        json out{{"contrast_stop", res.best_contrast_stop}};
        out["sweep"] = json::array();
        for (auto& [cs, af] : res.sweep) out["sweep"].push_back({{"contrast_stop", cs}, {"af_beta", af}});
        std::ofstream f(cal_out);
        if (!f) throw IoFailure("cannot write " + cal_out);
        f << out.dump(2) << "\n";
        std::cout << "best contrast_stop " << res.best_contrast_stop << "\n";
        return 0;
    }

    if (*bayes) {
        model.validate();
        if (bsteps < 2) throw UsageError("--steps must be >= 2");
        std::ostringstream csv;
        csv.precision(12);
        csv << "x,posterior_direct,posterior_sigmoid\n";
        for (int i = 0; i < bsteps; ++i) {
            const double x = bx0 + (bx1 - bx0) * i / (bsteps - 1);
            csv << x << ',' << posterior_direct(model, x) << ',' << posterior_via_sigmoid(model, x)
                << '\n';
        }
        if (bayes_out.empty()) {
            std::cout << csv.str();
        } else {
            std::ofstream f(bayes_out);
            if (!f) throw IoFailure("cannot write " + bayes_out);
            f << csv.str();
        }
        return 0;
    }

    if (*sliding) {
        net::HcnnfpNetwork network = net::HcnnfpNetwork::load(sw_ckpt);
        const GrayImage image = load_gray(sw_in);
        const ProbabilityMap map = sliding_window_infer(network, image, sw_window, sw_stride);
        save_probability_map(map, sw_out);
        std::cout << "stitched " << map.width << "x" << map.height << " map to " << sw_out << "\n";
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        CLI::App dummy;
        const int code = dummy.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
