#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sseg/layers.hpp"
#include "sseg/tensor.hpp"
#include "sseg/volume.hpp"

namespace sseg {

// Encoder-decoder with two pooling/upsampling levels. Channel widths per
// level are base, 2*base, 4*base. Encoder levels are residual conv blocks
// (two 3x3x3 convolutions, each BN + PReLU, plus an input->output addition
// through a 1x1x1 projection when widths differ). Decoder levels upsample
// with a kernel-2 stride-2 transposed convolution (BN + PReLU), concatenate
// the same-resolution encoder output, and fuse with a localization block
// (3x3x3 convolution at full width, then 1x1x1 halving it, each BN + PReLU).
// The head is a zero-initialized 1x1x1 convolution to K classes, so an
// untrained model predicts the uniform distribution.
struct NetworkConfig {
    int num_classes = 3;
    int base_channels = 16;
    int levels = 3;  // input level + 2 poolings; fixed

    void validate() const;
};

struct ConvBlockParam {
    Conv3Param conv_a, conv_b;
    BatchNormParam bn_a, bn_b;
    PReluParam act_a, act_b;
    Conv1Param proj;  // used only when has_proj (input/output widths differ)
    bool has_proj = false;
};

struct UpBlockParam {
    DeconvParam up;
    BatchNormParam bn;
    PReluParam act;
};

struct LocBlockParam {
    Conv3Param conv_a;
    BatchNormParam bn_a;
    PReluParam act_a;
    Conv1Param conv_b;
    BatchNormParam bn_b;
    PReluParam act_b;
};

struct ModelParams {
    ConvBlockParam enc0, enc1, enc2;
    UpBlockParam up1, up0;
    LocBlockParam loc1, loc0;
    Conv1Param head;
};

struct ModelState {
    NetworkConfig config;
    ModelParams params;
    int round = 0;  // self-training round that produced the parameters
};

// Named view over every parameter vector, in a fixed deterministic order.
// Running-statistic buffers are included with learnable=false.
struct ParamView {
    std::string name;
    std::vector<double>* values;
    bool learnable = true;
};

std::vector<ParamView> param_views(ModelParams& p);
size_t count_learnable(const ModelParams& p);
size_t count_buffers(const ModelParams& p);

// Parameter set with the shapes implied by the config and per-layer default
// values (BN scale 1, PReLU slope 0.25, conv weights 0).
ModelParams make_params(const NetworkConfig& config);

// Overwrites every vector (including running stats) with zeros; use for
// gradient accumulators.
void zero_params(ModelParams& p);

// Variance-scaled conv weights, BN scale 1 / shift 0, PReLU slope 0.25,
// zeroed head; deterministic in the seed.
ModelState init_model(const NetworkConfig& config, uint64_t seed);

struct ConvBlockTrace {
    Tensor x;       // block input
    Tensor a1, a2;  // conv outputs (batch-norm inputs)
    Tensor out;     // block output (pool/skip input)
    BatchNormStats s1, s2;
};

struct UpBlockTrace {
    Tensor d;  // transposed-conv output (batch-norm input)
    BatchNormStats s;
};

struct LocBlockTrace {
    Tensor ca, cb;  // conv outputs (batch-norm inputs)
    BatchNormStats sa, sb;
};

// Saved activations for one training forward pass. Batch-norm outputs and
// activations are cheap to rebuild from the saved conv outputs, so only conv
// inputs/outputs and normalization statistics are kept.
struct ForwardTrace {
    ConvBlockTrace enc0, enc1, enc2;
    std::vector<uint8_t> pool0_arg, pool1_arg;
    UpBlockTrace up1, up0;
    LocBlockTrace loc1, loc0;
};

Tensor image_to_tensor(const ScalarVolume& image);

// Logits with the input geometry and K channels. Train mode normalizes with
// batch statistics and fills the trace; eval mode uses running statistics.
// Throws ShapeError unless every axis is divisible by 4, NumericError if the
// logits are not finite.
Tensor forward(const ModelState& model, const Tensor& input, bool train, ForwardTrace* trace);

Tensor softmax(const Tensor& logits);

// Probabilities are clamped to [kProbClamp, 1] inside the log.
constexpr double kProbClamp = 1e-7;

// Voxel-summed multi-class cross entropy of the true-class probabilities.
double cross_entropy_sum(const Tensor& probs, const LabelVolume& labels);

// d(loss)/d(logits) for the summed loss; zero where the clamp was active.
Tensor cross_entropy_backward(const Tensor& probs, const LabelVolume& labels);

// Accumulates parameter gradients; releases trace tensors as it goes.
void backward(const ModelState& model, ForwardTrace& trace, const Tensor& dlogits,
              ModelParams& grad);

// Folds the trace's batch statistics into the running estimates.
void update_batchnorm_running(ModelParams& params, const ForwardTrace& trace);

struct ProbabilityVolume {
    VolumeGeometry geometry;
    Tensor probs;  // num_classes channels
};

ProbabilityVolume predict_probabilities(const ModelState& model, const ScalarVolume& image);

// Ties resolve to the lowest class index.
LabelVolume argmax_labels(const ProbabilityVolume& probs);

}  // namespace sseg
