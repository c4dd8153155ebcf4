#pragma once

#include <string>
#include <vector>

#include "sseg/tensor.hpp"

namespace sseg {

// Learnable layer parameters. Weight layouts are chosen so the forward
// passes are plain GEMM calls:
//   Conv3:  w[cout][cin*27], kernel offsets ordered (dz, dy, dx), each in
//           {-1,0,1}, i.e. row index = cin*27 + (dz+1)*9 + (dy+1)*3 + (dx+1)
//   Conv1:  w[cout][cin]
//   Deconv: kernel 2, stride 2; w[(cout*8 + corner)][cin] with
//           corner = kz*4 + ky*2 + kx over the 2x2x2 output cell
struct Conv3Param {
    int cin = 0, cout = 0;
    std::vector<double> w, b;
    void init_shapes() {
        w.assign(static_cast<size_t>(cout) * cin * 27, 0.0);
        b.assign(cout, 0.0);
    }
};

struct Conv1Param {
    int cin = 0, cout = 0;
    std::vector<double> w, b;
    void init_shapes() {
        w.assign(static_cast<size_t>(cout) * cin, 0.0);
        b.assign(cout, 0.0);
    }
};

struct DeconvParam {
    int cin = 0, cout = 0;
    std::vector<double> w, b;
    void init_shapes() {
        w.assign(static_cast<size_t>(cout) * 8 * cin, 0.0);
        b.assign(cout, 0.0);
    }
};

struct BatchNormParam {
    int channels = 0;
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;  // tracked state, not learned
    void init_shapes() {
        gamma.assign(channels, 1.0);
        beta.assign(channels, 0.0);
        running_mean.assign(channels, 0.0);
        running_var.assign(channels, 1.0);
    }
};

struct PReluParam {
    int channels = 0;
    std::vector<double> slope;
    void init_shapes() { slope.assign(channels, 0.25); }
};

// Per-sample batch statistics captured by a training-mode forward, consumed
// by the backward pass and by the trainer's running-stat update.
struct BatchNormStats {
    std::vector<double> mean, var, inv_std;
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

// ---- forward kernels ----

Tensor conv3_forward(const Conv3Param& p, const Tensor& x);
Tensor conv1_forward(const Conv1Param& p, const Tensor& x);
Tensor deconv_forward(const DeconvParam& p, const Tensor& x);
Tensor maxpool_forward(const Tensor& x, std::vector<uint8_t>* argmax);

// Training mode normalizes with this sample's statistics (batch size is 1)
// and reports them; eval mode uses the tracked running statistics.
Tensor batchnorm_forward(const BatchNormParam& p, const Tensor& x, bool train,
                         BatchNormStats* stats);
Tensor prelu_forward(const PReluParam& p, const Tensor& x);

// ---- backward kernels ----
// Each takes the saved forward input, the upstream gradient, and
// accumulates parameter gradients (+=). Data gradients are returned.

Tensor conv3_backward(const Conv3Param& p, const Tensor& x, const Tensor& dy, Conv3Param& grad);
Tensor conv1_backward(const Conv1Param& p, const Tensor& x, const Tensor& dy, Conv1Param& grad);
Tensor deconv_backward(const DeconvParam& p, const Tensor& x, const Tensor& dy, DeconvParam& grad);
Tensor maxpool_backward(const Tensor& dy, const Vec3i& input_dims, const std::vector<uint8_t>& argmax);
Tensor batchnorm_backward(const BatchNormParam& p, const Tensor& x, const BatchNormStats& stats,
                          const Tensor& dy, BatchNormParam& grad);
Tensor prelu_backward(const PReluParam& p, const Tensor& x, const Tensor& dy, PReluParam& grad);

void update_running_stats(BatchNormParam& p, const BatchNormStats& stats);

}  // namespace sseg
