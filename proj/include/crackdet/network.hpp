#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <vector>

#include "crackdet/dataset.hpp"
#include "crackdet/image.hpp"
#include "crackdet/tape.hpp"

namespace crackdet::net {

struct NetworkConfig {
    std::array<int, 5> block_conv_counts{2, 2, 3, 3, 3};  // 13 conv layers
    int base_channels = 8;   // paper scale is 64
    int input_size = 64;     // square inputs; must be divisible by 2^5
    bool fpb_enabled = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// Five side logit maps (scale 1 = full resolution taps the last decoder
// stage) plus the fused map; all at input resolution, one channel.
struct ForwardOutputs {
    std::array<ad::Tensor, 5> side_logits;
    ad::Tensor fused_logits;
};

struct TrainConfig {
    // Desk-scale default. Adam's coherent movement per parameter is bounded by
    // lr * steps, and a 200-image/30-epoch run only has 1500 steps; 1e-5 (the
    // full-scale setting, reachable via config) cannot train anything usably
    // in that budget.
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int max_epochs = 30;
    double early_stop_rel = 1e-4;  // 0.01% epoch-over-epoch loss reduction
    int batch_size = 4;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;  // mean per-image total loss, sum-over-pixels convention
    double wall_ms = 0.0;
};

// Encoder of five conv3x3+BN+ReLU blocks with index-saving 2x2 max-pools,
// an optional feature-preserving branch after blocks 1-4 (strided side conv
// concatenated with a 1x1-projected main path, half the channels each), a
// mirrored index-driven decoder, and per-stage 1x1 side heads feeding a
// fused 1x1 output.
class HcnnfpNetwork {
public:
    explicit HcnnfpNetwork(const NetworkConfig& cfg);

    HcnnfpNetwork(const HcnnfpNetwork&) = delete;
    HcnnfpNetwork& operator=(const HcnnfpNetwork&) = delete;
    HcnnfpNetwork(HcnnfpNetwork&&) = default;
    HcnnfpNetwork& operator=(HcnnfpNetwork&&) = default;

    struct TapeOutputs {
        std::array<ad::Var, 5> side;
        ad::Var fused;
    };

    // Appends the whole forward graph for a (n,1,H,W) input var. H and W may
    // exceed the configured training size as long as they stay divisible by 32.
    TapeOutputs forward_tape(ad::Tape& tape, ad::Var input, bool training);

    ForwardOutputs forward(const GrayImage& image, bool training = false);

    // Eval-mode probability map: sigmoid of the fused logits.
    ProbabilityMap infer(const GrayImage& image);

    std::vector<ad::Parameter*> parameters();
    std::size_t parameter_count() const;
    const NetworkConfig& config() const { return cfg_; }

    void save(const std::filesystem::path& path) const;
    static HcnnfpNetwork load(const std::filesystem::path& path);

private:
    struct Conv {
        ad::Parameter* w = nullptr;
        ad::Parameter* b = nullptr;
        int stride = 1;
        int pad = -1;
    };
    struct Bn {
        ad::Parameter* gamma = nullptr;
        ad::Parameter* beta = nullptr;
        ad::BnStats* stats = nullptr;
    };
    struct ConvBnRelu {
        Conv conv;
        Bn bn;
    };
    struct FpbBranch {
        ConvBnRelu side;  // conv3x3 stride 2, C_k -> C_k/2
        Conv main;        // conv1x1 on the pooled path, C_k -> C_k/2
    };

    ad::Parameter* add_param(const std::string& name, ad::Shape shape);
    Conv make_conv(const std::string& name, int out_ch, int in_ch, int k, int stride);
    ConvBnRelu make_conv_bn(const std::string& name, int out_ch, int in_ch, int k, int stride);
    ad::Var run_conv_bn_relu(ad::Tape& tape, const ConvBnRelu& layer, ad::Var x, bool training);

    NetworkConfig cfg_;
    std::vector<std::unique_ptr<ad::Parameter>> params_;
    std::vector<std::unique_ptr<ad::BnStats>> stats_;

    std::array<std::vector<ConvBnRelu>, 5> encoder_;
    std::vector<FpbBranch> fpb_;                       // blocks 1..4 when enabled
    std::array<std::vector<ConvBnRelu>, 5> decoder_;   // index k-1 = stage for scale k
    std::array<Conv, 5> heads_;
    Conv fused_;
};

// Eq-style per-image total: sum over pixels of the fused-map entropy plus the
// five side-map entropies, computed as six per-map means rescaled by I*J.
double total_loss(const ForwardOutputs& outs, const GroundTruthMask& gt);

// Mean of the six per-map binary cross-entropies (the scaled objective the
// optimizer minimizes; equals total_loss / (6 I J) per image).
double scaled_loss(const ForwardOutputs& outs, const GroundTruthMask& gt);

std::vector<EpochRecord> train_network(HcnnfpNetwork& net, const Dataset& data, const TrainConfig& cfg);

void write_training_log(const std::vector<EpochRecord>& log, const std::filesystem::path& path);

// Loads an HCKP checkpoint and runs eval-mode inference.
ProbabilityMap infer_checkpoint(const std::filesystem::path& checkpoint, const GrayImage& image);

struct AblationRow {
    std::uint64_t seed = 0;
    bool fpb = false;
    double af_beta = 0.0;
    double mape = 0.0;  // NaN when no image had true positives
};

// Trains fpb-on and fpb-off variants per seed on identical data order and
// reports held-out AF_beta / MAPE (CBAT-binarized). Needs >= 3 seeds.
std::vector<AblationRow> ablate_fpb(const Dataset& train_data, const Dataset& eval_data,
                                    const NetworkConfig& base, const TrainConfig& tcfg,
                                    const std::vector<std::uint64_t>& seeds);

}  // namespace crackdet::net
