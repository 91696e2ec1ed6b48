#include "crackdet/network.hpp"

#include <cassert>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crackdet/checkpoint.hpp"
#include "crackdet/metrics.hpp"
#include "crackdet/nn.hpp"
#include "crackdet/thresholding.hpp"

namespace crackdet::net {

using ad::Shape;
using ad::Tape;
using ad::Var;

void NetworkConfig::validate() const {
    const int total = std::accumulate(block_conv_counts.begin(), block_conv_counts.end(), 0);
    if (total != 13) throw ConfigInvalid("block conv counts must sum to 13");
    for (int c : block_conv_counts)
        if (c < 1) throw ConfigInvalid("each block needs at least one conv layer");
    if (base_channels < 2 || base_channels % 2 != 0)
        throw ConfigInvalid("base_channels must be even and >= 2");
    if (input_size < 32 || input_size % 32 != 0)
        throw ConfigInvalid("input size must be a positive multiple of 32");
}

namespace {

std::array<int, 5> channel_plan(int base) {
    return {base, 2 * base, 4 * base, 8 * base, 8 * base};
}

double bce_mean_array(const Eigen::ArrayXd& logits, const Eigen::ArrayXd& y) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double f = logits[i];
        sum += std::max(f, 0.0) - f * y[i] + std::log1p(std::exp(-std::abs(f)));
    }
    return sum / static_cast<double>(logits.size());
}

}  // namespace

ad::Parameter* HcnnfpNetwork::add_param(const std::string& name, Shape shape) {
    params_.push_back(std::make_unique<ad::Parameter>(name, shape));
    return params_.back().get();
}

HcnnfpNetwork::Conv HcnnfpNetwork::make_conv(const std::string& name, int out_ch, int in_ch, int k,
                                             int stride) {
    Conv conv;
    conv.w = add_param(name + ".w", Shape{out_ch, in_ch, k, k});
    conv.b = add_param(name + ".b", Shape{1, out_ch, 1, 1});
    conv.stride = stride;
    conv.pad = (k - 1) / 2;
    Rng rng(cfg_.seed ^ hash_name(name));
    he_init(*conv.w, in_ch * k * k, rng);
    return conv;
}

HcnnfpNetwork::ConvBnRelu HcnnfpNetwork::make_conv_bn(const std::string& name, int out_ch, int in_ch,
                                                      int k, int stride) {
    ConvBnRelu layer;
    layer.conv = make_conv(name, out_ch, in_ch, k, stride);
    layer.bn.gamma = add_param(name + ".bn.gamma", Shape{1, out_ch, 1, 1});
    layer.bn.gamma->value.setOnes();
    layer.bn.beta = add_param(name + ".bn.beta", Shape{1, out_ch, 1, 1});
    stats_.push_back(std::make_unique<ad::BnStats>(name + ".bn", out_ch));
    layer.bn.stats = stats_.back().get();
    return layer;
}

HcnnfpNetwork::HcnnfpNetwork(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto ch = channel_plan(cfg_.base_channels);

    for (int k = 0; k < 5; ++k) {
        const int in0 = k == 0 ? 1 : ch[k - 1];
        for (int j = 0; j < cfg_.block_conv_counts[k]; ++j) {
            const std::string name = "enc" + std::to_string(k + 1) + ".conv" + std::to_string(j);
            encoder_[k].push_back(make_conv_bn(name, ch[k], j == 0 ? in0 : ch[k], 3, 1));
        }
    }

    if (cfg_.fpb_enabled) {
        for (int k = 0; k < 4; ++k) {
            const std::string name = "fpb" + std::to_string(k + 1);
            FpbBranch br;
            br.side = make_conv_bn(name + ".side", ch[k] / 2, ch[k], 3, 2);
            br.main = make_conv(name + ".main", ch[k] / 2, ch[k], 1, 1);
            fpb_.push_back(std::move(br));
        }
    }

    // stage k unpools with the indices of encoder pool k and ends on the
    // channel count the next shallower stage expects
    for (int k = 5; k >= 1; --k) {
        const int in_ch = ch[k - 1];
        const int out_ch = k >= 2 ? ch[k - 2] : ch[0];
        const int convs = cfg_.block_conv_counts[k - 1];
        for (int j = 0; j < convs; ++j) {
            const std::string name = "dec" + std::to_string(k) + ".conv" + std::to_string(j);
            const int oc = j == convs - 1 ? out_ch : in_ch;
            decoder_[k - 1].push_back(make_conv_bn(name, oc, in_ch, 3, 1));
        }
    }

    for (int k = 1; k <= 5; ++k) {
        const int in_ch = k >= 2 ? ch[k - 2] : ch[0];
        heads_[k - 1] = make_conv("head" + std::to_string(k), 1, in_ch, 1, 1);
    }
    fused_ = make_conv("fused", 1, 5, 1, 1);
}

Var HcnnfpNetwork::run_conv_bn_relu(Tape& tape, const ConvBnRelu& layer, Var x, bool training) {
    Var c = ad::conv2d(tape, x, tape.leaf(*layer.conv.w), tape.leaf(*layer.conv.b), layer.conv.stride,
                       layer.conv.pad);
    Var n = ad::batchnorm(tape, c, tape.leaf(*layer.bn.gamma), tape.leaf(*layer.bn.beta),
                          *layer.bn.stats, training);
    return ad::relu(tape, n);
}

HcnnfpNetwork::TapeOutputs HcnnfpNetwork::forward_tape(Tape& tape, Var input, bool training) {
    const Shape in_shape = tape.shape(input);
    if (in_shape.c != 1) throw ShapeMismatch("network input must be single-channel");
    if (in_shape.h % 32 != 0 || in_shape.w % 32 != 0 || in_shape.h < 32 || in_shape.w < 32)
        throw ShapeMismatch("network input dims must be positive multiples of 32");

    std::array<ad::PoolIndices, 5> indices;
    Var cur = input;
    for (int k = 0; k < 5; ++k) {
        for (const ConvBnRelu& layer : encoder_[k]) cur = run_conv_bn_relu(tape, layer, cur, training);
        ad::PoolResult pooled = ad::maxpool2d(tape, cur);
        indices[k] = std::move(pooled.indices);
        if (cfg_.fpb_enabled && k < 4) {
            Var side = run_conv_bn_relu(tape, fpb_[k].side, cur, training);
            Var main = ad::conv2d(tape, pooled.out, tape.leaf(*fpb_[k].main.w),
                                  tape.leaf(*fpb_[k].main.b), 1, 0);
            assert(tape.shape(side).c == tape.shape(main).c &&
                   "feature-preserving branch must contribute exactly half the channels");
            cur = ad::concat_channels(tape, {main, side});
        } else {
            cur = pooled.out;
        }
    }

    TapeOutputs out;
    for (int k = 5; k >= 1; --k) {
        cur = ad::max_unpool2d(tape, cur, indices[k - 1]);
        for (const ConvBnRelu& layer : decoder_[k - 1]) cur = run_conv_bn_relu(tape, layer, cur, training);
        const Conv& head = heads_[k - 1];
        Var logit = ad::conv2d(tape, cur, tape.leaf(*head.w), tape.leaf(*head.b), 1, 0);
        out.side[k - 1] = ad::upsample_bilinear(tape, logit, in_shape.h, in_shape.w);
    }

    Var stacked = ad::concat_channels(
        tape, {out.side[0], out.side[1], out.side[2], out.side[3], out.side[4]});
    out.fused = ad::conv2d(tape, stacked, tape.leaf(*fused_.w), tape.leaf(*fused_.b), 1, 0);
    return out;
}

ForwardOutputs HcnnfpNetwork::forward(const GrayImage& image, bool training) {
    Tape tape;
    Var in = tape.constant(ad::Tensor(Shape{1, 1, image.height, image.width}, image.data));
    TapeOutputs vars = forward_tape(tape, in, training);

    ForwardOutputs out;
    const Shape ms{1, 1, image.height, image.width};
    for (int k = 0; k < 5; ++k) out.side_logits[k] = ad::Tensor(ms, tape.value(vars.side[k]));
    out.fused_logits = ad::Tensor(ms, tape.value(vars.fused));
    return out;
}

ProbabilityMap HcnnfpNetwork::infer(const GrayImage& image) {
    ForwardOutputs outs = forward(image, false);
    ProbabilityMap map;
    map.width = image.width;
    map.height = image.height;
    map.data = ad::sigmoid_array(outs.fused_logits.data);
    return map;
}

std::vector<ad::Parameter*> HcnnfpNetwork::parameters() {
    std::vector<ad::Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::size_t HcnnfpNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

// --- checkpointing -------------------------------------------------------------

namespace {

constexpr double kConfigVersion = 1.0;

std::vector<double> config_record(const NetworkConfig& cfg) {
    std::vector<double> v{kConfigVersion,
                          static_cast<double>(cfg.base_channels),
                          static_cast<double>(cfg.input_size),
                          cfg.fpb_enabled ? 1.0 : 0.0,
                          static_cast<double>(cfg.seed >> 32),
                          static_cast<double>(cfg.seed & 0xffffffffULL)};
    for (int c : cfg.block_conv_counts) v.push_back(static_cast<double>(c));
    return v;
}

NetworkConfig config_from_record(const Eigen::ArrayXd& r) {
    if (r.size() != 11 || r[0] != kConfigVersion)
        throw CheckpointMismatch("unrecognized network config record");
    NetworkConfig cfg;
    cfg.base_channels = static_cast<int>(r[1]);
    cfg.input_size = static_cast<int>(r[2]);
    cfg.fpb_enabled = r[3] != 0.0;
    cfg.seed = (static_cast<std::uint64_t>(r[4]) << 32) | static_cast<std::uint64_t>(r[5]);
    for (int i = 0; i < 5; ++i) cfg.block_conv_counts[i] = static_cast<int>(r[6 + i]);
    return cfg;
}

}  // namespace

void HcnnfpNetwork::save(const std::filesystem::path& path) const {
    std::vector<ad::NamedArray> arrays;
    arrays.reserve(params_.size() + 2 * stats_.size() + 1);

    ad::NamedArray meta;
    meta.name = "config";
    auto rec = config_record(cfg_);
    meta.dims = {static_cast<std::uint32_t>(rec.size())};
    meta.data = Eigen::Map<Eigen::ArrayXd>(rec.data(), static_cast<Eigen::Index>(rec.size()));
    arrays.push_back(std::move(meta));

    for (const auto& p : params_) {
        ad::NamedArray a;
        a.name = p->name;
        a.dims = {static_cast<std::uint32_t>(p->shape.n), static_cast<std::uint32_t>(p->shape.c),
                  static_cast<std::uint32_t>(p->shape.h), static_cast<std::uint32_t>(p->shape.w)};
        a.data = p->value;
        arrays.push_back(std::move(a));
    }
    for (const auto& s : stats_) {
        arrays.push_back({s->name + ".mean",
                          {static_cast<std::uint32_t>(s->running_mean.size())},
                          s->running_mean});
        arrays.push_back(
            {s->name + ".var", {static_cast<std::uint32_t>(s->running_var.size())}, s->running_var});
    }
    ad::save_hckp(path, arrays);
}

HcnnfpNetwork HcnnfpNetwork::load(const std::filesystem::path& path) {
    std::vector<ad::NamedArray> arrays = ad::load_hckp(path);
    const ad::NamedArray* config = nullptr;
    for (const auto& a : arrays)
        if (a.name == "config") config = &a;
    if (!config) throw CheckpointMismatch("checkpoint has no config record: " + path.string());

    HcnnfpNetwork net(config_from_record(config->data));

    auto find = [&](const std::string& name) -> const ad::NamedArray& {
        for (const auto& a : arrays)
            if (a.name == name) return a;
        throw CheckpointMismatch("checkpoint missing array: " + name);
    };

    std::size_t used = 1;
    for (auto& p : net.params_) {
        const ad::NamedArray& a = find(p->name);
        if (a.data.size() != p->value.size())
            throw CheckpointMismatch("checkpoint size mismatch for " + p->name);
        p->value = a.data;
        ++used;
    }
    for (auto& s : net.stats_) {
        const ad::NamedArray& mean = find(s->name + ".mean");
        const ad::NamedArray& var = find(s->name + ".var");
        if (mean.data.size() != s->running_mean.size() || var.data.size() != s->running_var.size())
            throw CheckpointMismatch("checkpoint size mismatch for " + s->name);
        s->running_mean = mean.data;
        s->running_var = var.data;
        used += 2;
    }
    if (used != arrays.size()) throw CheckpointMismatch("checkpoint holds arrays this network does not");
    return net;
}

// --- loss ---------------------------------------------------------------------

double total_loss(const ForwardOutputs& outs, const GroundTruthMask& gt) {
    return scaled_loss(outs, gt) * 6.0 * static_cast<double>(gt.pixel_count());
}

double scaled_loss(const ForwardOutputs& outs, const GroundTruthMask& gt) {
    for (const auto& s : outs.side_logits)
        if (s.data.size() != gt.data.size()) throw ShapeMismatch("side map / mask size mismatch");
    if (outs.fused_logits.data.size() != gt.data.size())
        throw ShapeMismatch("fused map / mask size mismatch");
    double sum = bce_mean_array(outs.fused_logits.data, gt.data);
    for (const auto& s : outs.side_logits) sum += bce_mean_array(s.data, gt.data);
    return sum / 6.0;
}

// --- training -------------------------------------------------------------------

std::vector<EpochRecord> train_network(HcnnfpNetwork& net, const Dataset& data, const TrainConfig& cfg) {
    if (data.empty()) throw DatasetEmpty("training dataset is empty");
    const int size = net.config().input_size;
    for (const Sample& s : data.samples)
        if (s.image.width != size || s.image.height != size)
            throw ShapeMismatch("sample " + s.id + " does not match the configured input size");
    if (cfg.batch_size < 1) throw ConfigInvalid("batch size must be >= 1");

    std::vector<ad::Parameter*> params = net.parameters();
    ad::Adam opt(params, {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
    Rng shuffle_rng(cfg.seed);

    const Eigen::Index plane = static_cast<Eigen::Index>(size) * size;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<EpochRecord> log;
    double prev_loss = 0.0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order.data(), order.size());

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const int bn = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - start));
            Eigen::ArrayXd input(bn * plane), target(bn * plane);
            for (int i = 0; i < bn; ++i) {
                const Sample& s = data.samples[order[start + i]];
                input.segment(i * plane, plane) = s.image.data;
                target.segment(i * plane, plane) = s.mask.data;
            }

            Tape tape;
            Var in = tape.constant(ad::Tensor(Shape{bn, 1, size, size}, std::move(input)));
            HcnnfpNetwork::TapeOutputs outs = net.forward_tape(tape, in, true);

            Var loss = ad::bce_with_logits_mean(tape, outs.fused, target);
            for (int k = 0; k < 5; ++k)
                loss = ad::add(tape, loss, ad::bce_with_logits_mean(tape, outs.side[k], target));
            Var objective = ad::scale(tape, loss, 1.0 / 6.0);

            const double batch_loss = tape.value(loss)[0];  // sum of six per-map means
            if (!std::isfinite(batch_loss))
                throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch));

            opt.zero_grad();
            tape.backward(objective);
            opt.step();

            // per-image total (sum-over-pixels convention), accumulated over the batch
            loss_sum += batch_loss * static_cast<double>(plane) * bn;
        }

        const double epoch_loss = loss_sum / static_cast<double>(data.size());
        const auto t1 = std::chrono::steady_clock::now();
        log.push_back({epoch, epoch_loss,
                       std::chrono::duration<double, std::milli>(t1 - t0).count()});

        if (epoch > 1 && (prev_loss - epoch_loss) / prev_loss < cfg.early_stop_rel) break;
        prev_loss = epoch_loss;
    }
    return log;
}

void write_training_log(const std::vector<EpochRecord>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + path.string());
    out.precision(17);
    for (const EpochRecord& r : log)
        out << "{\"epoch\": " << r.epoch << ", \"loss\": " << r.loss << ", \"wall_ms\": " << r.wall_ms
            << "}\n";
}

ProbabilityMap infer_checkpoint(const std::filesystem::path& checkpoint, const GrayImage& image) {
    HcnnfpNetwork net = HcnnfpNetwork::load(checkpoint);
    return net.infer(image);
}

// --- ablation --------------------------------------------------------------------

namespace {

struct EvalMeans {
    double af = 0.0;
    double mape = std::numeric_limits<double>::quiet_NaN();
};

EvalMeans evaluate_cbat(HcnnfpNetwork& net, const Dataset& eval_data) {
    const BetaRange range;
    double af_sum = 0.0, mape_sum = 0.0;
    int mape_n = 0;
    for (const Sample& s : eval_data.samples) {
        ProbabilityMap map = net.infer(s.image);
        BinaryMap pred;
        try {
            const CbatResult r = cbat_threshold(build_histogram(map));
            pred = apply_threshold(map, r.threshold);
        } catch (const DegenerateHistogram&) {
            pred.width = map.width;
            pred.height = map.height;
            pred.data = Eigen::ArrayXd::Zero(map.data.size());
        }
        const ConfusionCounts c = confusion(pred, s.mask);
        const PrecisionRecall pr = precision_recall(c);
        af_sum += (pr.precision == 0.0 && pr.recall == 0.0) ? 0.0 : average_f_measure(pr, range);
        if (c.tp > 0) {
            mape_sum += static_cast<double>(c.fp + c.fn) / static_cast<double>(c.tp);
            ++mape_n;
        }
    }
    EvalMeans m;
    m.af = af_sum / static_cast<double>(eval_data.size());
    if (mape_n > 0) m.mape = mape_sum / mape_n;
    return m;
}

}  // namespace

std::vector<AblationRow> ablate_fpb(const Dataset& train_data, const Dataset& eval_data,
                                    const NetworkConfig& base, const TrainConfig& tcfg,
                                    const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 3) throw ConfigInvalid("ablation needs at least 3 seeds");
    std::vector<AblationRow> rows;
    for (std::uint64_t seed : seeds) {
        for (bool fpb : {true, false}) {
            NetworkConfig cfg = base;
            cfg.seed = seed;
            cfg.fpb_enabled = fpb;
            TrainConfig tc = tcfg;
            tc.seed = seed;  // identical shuffle order for both variants

            HcnnfpNetwork net(cfg);
            train_network(net, train_data, tc);
            const EvalMeans m = evaluate_cbat(net, eval_data);
            rows.push_back({seed, fpb, m.af, m.mape});
        }
    }
    return rows;
}

}  // namespace crackdet::net
