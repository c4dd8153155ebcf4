#include "sseg/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

#include "sseg/error.hpp"

namespace sseg {

namespace {

// Column-buffer budget for the im2col chunks (doubles). Keeps peak extra
// memory around 32 MB regardless of volume size.
constexpr size_t kColBudget = 4u << 20;

int chunk_z(size_t rows, const Vec3i& d) {
    const size_t per_slice = rows * static_cast<size_t>(d.x) * d.y;
    int zc = per_slice == 0 ? d.z : static_cast<int>(kColBudget / per_slice);
    return std::clamp(zc, 1, d.z);
}

// Gather the 27-neighborhood patches of x for slices [z0, z1) into
// col[rows x n_cols], zero-padded at the borders.
void im2col(const Tensor& x, int z0, int z1, std::vector<double>& col) {
    const Vec3i d = x.dims;
    const size_t nx = d.x, nxy = static_cast<size_t>(d.x) * d.y;
    const size_t n_cols = nxy * (z1 - z0);
    size_t r = 0;
    for (int ci = 0; ci < x.channels; ++ci) {
        const double* src = x.channel(ci);
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx, ++r) {
                    double* dst = col.data() + r * n_cols;
                    for (int z = z0; z < z1; ++z) {
                        const int zz = z + dz;
                        for (int y = 0; y < d.y; ++y, dst += nx) {
                            const int yy = y + dy;
                            if (zz < 0 || zz >= d.z || yy < 0 || yy >= d.y) {
                                std::fill(dst, dst + nx, 0.0);
                                continue;
                            }
                            const double* row = src + nxy * zz + nx * yy;
                            const int lo = std::max(0, -dx);
                            const int hi = std::min(d.x, d.x - dx);
                            for (int xx = 0; xx < lo; ++xx) dst[xx] = 0.0;
                            for (int xx = lo; xx < hi; ++xx) dst[xx] = row[xx + dx];
                            for (int xx = hi; xx < d.x; ++xx) dst[xx] = 0.0;
                        }
                    }
                }
    }
}

// Scatter-add the column gradient back onto dx (exact adjoint of im2col).
void col2im_add(Tensor& dx, int z0, int z1, const std::vector<double>& col) {
    const Vec3i d = dx.dims;
    const size_t nx = d.x, nxy = static_cast<size_t>(d.x) * d.y;
    const size_t n_cols = nxy * (z1 - z0);
    size_t r = 0;
    for (int ci = 0; ci < dx.channels; ++ci) {
        double* dst_c = dx.channel(ci);
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx_off = -1; dx_off <= 1; ++dx_off, ++r) {
                    const double* src = col.data() + r * n_cols;
                    for (int z = z0; z < z1; ++z) {
                        const int zz = z + dz;
                        if (zz < 0 || zz >= d.z) {
                            src += nxy;
                            continue;
                        }
                        for (int y = 0; y < d.y; ++y, src += nx) {
                            const int yy = y + dy;
                            if (yy < 0 || yy >= d.y) continue;
                            double* row = dst_c + nxy * zz + nx * yy;
                            const int lo = std::max(0, -dx_off);
                            const int hi = std::min(d.x, d.x - dx_off);
                            for (int xx = lo; xx < hi; ++xx) row[xx + dx_off] += src[xx];
                        }
                    }
                }
    }
}

void add_bias(Tensor& y, const std::vector<double>& b) {
    for (int c = 0; c < y.channels; ++c) {
        double* p = y.channel(c);
        const double bias = b[c];
        for (size_t i = 0, n = y.voxels(); i < n; ++i) p[i] += bias;
    }
}

void bias_grad(const Tensor& dy, std::vector<double>& db) {
    for (int c = 0; c < dy.channels; ++c) {
        const double* p = dy.channel(c);
        double sum = 0.0;
        for (size_t i = 0, n = dy.voxels(); i < n; ++i) sum += p[i];
        db[c] += sum;
    }
}

}  // namespace

Tensor conv3_forward(const Conv3Param& p, const Tensor& x) {
    if (x.channels != p.cin) throw ShapeError("conv3 input channel mismatch");
    Tensor y(p.cout, x.dims);
    const size_t rows = static_cast<size_t>(p.cin) * 27;
    const size_t nxy = static_cast<size_t>(x.dims.x) * x.dims.y;
    const int zc = chunk_z(rows, x.dims);
    std::vector<double> col(rows * nxy * zc);
    for (int z0 = 0; z0 < x.dims.z; z0 += zc) {
        const int z1 = std::min(x.dims.z, z0 + zc);
        const size_t n_cols = nxy * (z1 - z0);
        im2col(x, z0, z1, col);
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, p.cout, static_cast<int>(n_cols),
                    static_cast<int>(rows), 1.0, p.w.data(), static_cast<int>(rows), col.data(),
                    static_cast<int>(n_cols), 0.0, y.data.data() + nxy * z0,
                    static_cast<int>(y.voxels()));
    }
    add_bias(y, p.b);
    return y;
}

Tensor conv3_backward(const Conv3Param& p, const Tensor& x, const Tensor& dy, Conv3Param& grad) {
    Tensor dx(p.cin, x.dims);
    const size_t rows = static_cast<size_t>(p.cin) * 27;
    const size_t nxy = static_cast<size_t>(x.dims.x) * x.dims.y;
    const int zc = chunk_z(rows, x.dims);
    std::vector<double> col(rows * nxy * zc);
    std::vector<double> dcol(rows * nxy * zc);
    for (int z0 = 0; z0 < x.dims.z; z0 += zc) {
        const int z1 = std::min(x.dims.z, z0 + zc);
        const size_t n_cols = nxy * (z1 - z0);
        // dW += dY_chunk * col^T
        im2col(x, z0, z1, col);
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, p.cout, static_cast<int>(rows),
                    static_cast<int>(n_cols), 1.0, dy.data.data() + nxy * z0,
                    static_cast<int>(dy.voxels()), col.data(), static_cast<int>(n_cols), 1.0,
                    grad.w.data(), static_cast<int>(rows));
        // dcol = W^T * dY_chunk, then scatter back
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(rows),
                    static_cast<int>(n_cols), p.cout, 1.0, p.w.data(), static_cast<int>(rows),
                    dy.data.data() + nxy * z0, static_cast<int>(dy.voxels()), 0.0, dcol.data(),
                    static_cast<int>(n_cols));
        col2im_add(dx, z0, z1, dcol);
    }
    bias_grad(dy, grad.b);
    return dx;
}

Tensor conv1_forward(const Conv1Param& p, const Tensor& x) {
    if (x.channels != p.cin) throw ShapeError("conv1 input channel mismatch");
    Tensor y(p.cout, x.dims);
    const int n = static_cast<int>(x.voxels());
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, p.cout, n, p.cin, 1.0, p.w.data(), p.cin,
                x.data.data(), n, 0.0, y.data.data(), n);
    add_bias(y, p.b);
    return y;
}

Tensor conv1_backward(const Conv1Param& p, const Tensor& x, const Tensor& dy, Conv1Param& grad) {
    Tensor dx(p.cin, x.dims);
    const int n = static_cast<int>(x.voxels());
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, p.cout, p.cin, n, 1.0, dy.data.data(), n,
                x.data.data(), n, 1.0, grad.w.data(), p.cin);
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, p.cin, n, p.cout, 1.0, p.w.data(), p.cin,
                dy.data.data(), n, 0.0, dx.data.data(), n);
    bias_grad(dy, grad.b);
    return dx;
}

namespace {

// The stride-2 kernel-2 transposed convolution writes each input voxel to a
// disjoint 2x2x2 output cell, so it reduces to one GEMM plus an interleaving
// scatter (and the exact reverse for the gradient).
void deconv_scatter(const std::vector<double>& y8, const Vec3i& in_dims, Tensor& out,
                    const std::vector<double>& b) {
    const int mx = in_dims.x, my = in_dims.y, mz = in_dims.z;
    const size_t m = Tensor::volume_size(in_dims);
    const size_t out_nx = 2 * mx, out_nxy = out_nx * 2 * my;
    for (int co = 0; co < out.channels; ++co) {
        double* oc = out.channel(co);
        const double bias = b[co];
        for (int corner = 0; corner < 8; ++corner) {
            const int kz = corner >> 2, ky = (corner >> 1) & 1, kx = corner & 1;
            const double* src = y8.data() + (static_cast<size_t>(co) * 8 + corner) * m;
            for (int z = 0; z < mz; ++z)
                for (int y = 0; y < my; ++y) {
                    const double* s = src + (static_cast<size_t>(z) * my + y) * mx;
                    double* d = oc + out_nxy * (2 * z + kz) + out_nx * (2 * y + ky) + kx;
                    for (int x = 0; x < mx; ++x) d[2 * x] = s[x] + bias;
                }
        }
    }
}

void deconv_gather(const Tensor& dy, const Vec3i& in_dims, std::vector<double>& dy8) {
    const int mx = in_dims.x, my = in_dims.y, mz = in_dims.z;
    const size_t m = Tensor::volume_size(in_dims);
    const size_t out_nx = 2 * mx, out_nxy = out_nx * 2 * my;
    for (int co = 0; co < dy.channels; ++co) {
        const double* oc = dy.channel(co);
        for (int corner = 0; corner < 8; ++corner) {
            const int kz = corner >> 2, ky = (corner >> 1) & 1, kx = corner & 1;
            double* dst = dy8.data() + (static_cast<size_t>(co) * 8 + corner) * m;
            for (int z = 0; z < mz; ++z)
                for (int y = 0; y < my; ++y) {
                    double* d = dst + (static_cast<size_t>(z) * my + y) * mx;
                    const double* s = oc + out_nxy * (2 * z + kz) + out_nx * (2 * y + ky) + kx;
                    for (int x = 0; x < mx; ++x) d[x] = s[2 * x];
                }
        }
    }
}

}  // namespace

Tensor deconv_forward(const DeconvParam& p, const Tensor& x) {
    if (x.channels != p.cin) throw ShapeError("deconv input channel mismatch");
    const Vec3i out_dims{2 * x.dims.x, 2 * x.dims.y, 2 * x.dims.z};
    Tensor y(p.cout, out_dims);
    const int m = static_cast<int>(x.voxels());
    std::vector<double> y8(static_cast<size_t>(p.cout) * 8 * m);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, p.cout * 8, m, p.cin, 1.0, p.w.data(),
                p.cin, x.data.data(), m, 0.0, y8.data(), m);
    deconv_scatter(y8, x.dims, y, p.b);
    return y;
}

Tensor deconv_backward(const DeconvParam& p, const Tensor& x, const Tensor& dy, DeconvParam& grad) {
    Tensor dx(p.cin, x.dims);
    const int m = static_cast<int>(x.voxels());
    std::vector<double> dy8(static_cast<size_t>(p.cout) * 8 * m);
    deconv_gather(dy, x.dims, dy8);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, p.cout * 8, p.cin, m, 1.0, dy8.data(), m,
                x.data.data(), m, 1.0, grad.w.data(), p.cin);
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, p.cin, m, p.cout * 8, 1.0, p.w.data(),
                p.cin, dy8.data(), m, 0.0, dx.data.data(), m);
    bias_grad(dy, grad.b);
    return dx;
}

Tensor maxpool_forward(const Tensor& x, std::vector<uint8_t>* argmax) {
    if (x.dims.x % 2 || x.dims.y % 2 || x.dims.z % 2)
        throw ShapeError("maxpool requires even dims");
    const Vec3i od{x.dims.x / 2, x.dims.y / 2, x.dims.z / 2};
    Tensor y(x.channels, od);
    if (argmax) argmax->assign(y.size(), 0);
    const size_t in_nx = x.dims.x, in_nxy = in_nx * x.dims.y;
    size_t oi = 0;
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        for (int z = 0; z < od.z; ++z)
            for (int y_ = 0; y_ < od.y; ++y_)
                for (int xx = 0; xx < od.x; ++xx, ++oi) {
                    const double* cell = xc + in_nxy * (2 * z) + in_nx * (2 * y_) + 2 * xx;
                    double best = cell[0];
                    int best_k = 0;
                    for (int k = 1; k < 8; ++k) {
                        const int kz = k >> 2, ky = (k >> 1) & 1, kx = k & 1;
                        const double v = cell[in_nxy * kz + in_nx * ky + kx];
                        if (v > best) {
                            best = v;
                            best_k = k;
                        }
                    }
                    y.data[oi] = best;
                    if (argmax) (*argmax)[oi] = static_cast<uint8_t>(best_k);
                }
    }
    return y;
}

Tensor maxpool_backward(const Tensor& dy, const Vec3i& input_dims, const std::vector<uint8_t>& argmax) {
    Tensor dx(dy.channels, input_dims);
    const size_t in_nx = input_dims.x, in_nxy = in_nx * input_dims.y;
    size_t oi = 0;
    for (int c = 0; c < dy.channels; ++c) {
        double* xc = dx.channel(c);
        for (int z = 0; z < dy.dims.z; ++z)
            for (int y_ = 0; y_ < dy.dims.y; ++y_)
                for (int xx = 0; xx < dy.dims.x; ++xx, ++oi) {
                    const int k = argmax[oi];
                    const int kz = k >> 2, ky = (k >> 1) & 1, kx = k & 1;
                    xc[in_nxy * (2 * z + kz) + in_nx * (2 * y_ + ky) + 2 * xx + kx] += dy.data[oi];
                }
    }
    return dx;
}

Tensor batchnorm_forward(const BatchNormParam& p, const Tensor& x, bool train,
                         BatchNormStats* stats) {
    if (x.channels != p.channels) throw ShapeError("batchnorm channel mismatch");
    Tensor y(x.channels, x.dims);
    const size_t n = x.voxels();
    if (train && stats) {
        stats->mean.assign(p.channels, 0.0);
        stats->var.assign(p.channels, 0.0);
        stats->inv_std.assign(p.channels, 0.0);
    }
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        double* yc = y.channel(c);
        double mean, inv_std;
        if (train) {
            double sum = 0.0;
            for (size_t i = 0; i < n; ++i) sum += xc[i];
            mean = sum / static_cast<double>(n);
            double ss = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double d = xc[i] - mean;
                ss += d * d;
            }
            const double var = ss / static_cast<double>(n);
            inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
            if (stats) {
                stats->mean[c] = mean;
                stats->var[c] = var;
                stats->inv_std[c] = inv_std;
            }
        } else {
            mean = p.running_mean[c];
            inv_std = 1.0 / std::sqrt(p.running_var[c] + kBatchNormEps);
        }
        const double g = p.gamma[c] * inv_std;
        const double b = p.beta[c] - mean * g;
        for (size_t i = 0; i < n; ++i) yc[i] = g * xc[i] + b;
    }
    return y;
}

Tensor batchnorm_backward(const BatchNormParam& p, const Tensor& x, const BatchNormStats& stats,
                          const Tensor& dy, BatchNormParam& grad) {
    Tensor dx(x.channels, x.dims);
    const size_t n = x.voxels();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        const double* dyc = dy.channel(c);
        double* dxc = dx.channel(c);
        const double mean = stats.mean[c], inv_std = stats.inv_std[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double xhat = (xc[i] - mean) * inv_std;
            sum_dy += dyc[i];
            sum_dy_xhat += dyc[i] * xhat;
        }
        grad.beta[c] += sum_dy;
        grad.gamma[c] += sum_dy_xhat;
        const double k = p.gamma[c] * inv_std;
        const double mean_dy = sum_dy * inv_n;
        const double mean_dy_xhat = sum_dy_xhat * inv_n;
        for (size_t i = 0; i < n; ++i) {
            const double xhat = (xc[i] - mean) * inv_std;
            dxc[i] = k * (dyc[i] - mean_dy - xhat * mean_dy_xhat);
        }
    }
    return dx;
}

Tensor prelu_forward(const PReluParam& p, const Tensor& x) {
    if (x.channels != p.channels) throw ShapeError("prelu channel mismatch");
    Tensor y(x.channels, x.dims);
    const size_t n = x.voxels();
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        double* yc = y.channel(c);
        const double a = p.slope[c];
        for (size_t i = 0; i < n; ++i) yc[i] = xc[i] > 0.0 ? xc[i] : a * xc[i];
    }
    return y;
}

Tensor prelu_backward(const PReluParam& p, const Tensor& x, const Tensor& dy, PReluParam& grad) {
    Tensor dx(x.channels, x.dims);
    const size_t n = x.voxels();
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        const double* dyc = dy.channel(c);
        double* dxc = dx.channel(c);
        const double a = p.slope[c];
        double da = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (xc[i] > 0.0) {
                dxc[i] = dyc[i];
            } else {
                dxc[i] = a * dyc[i];
                da += dyc[i] * xc[i];
            }
        }
        grad.slope[c] += da;
    }
    return dx;
}

void update_running_stats(BatchNormParam& p, const BatchNormStats& stats) {
    for (int c = 0; c < p.channels; ++c) {
        p.running_mean[c] = (1.0 - kBatchNormMomentum) * p.running_mean[c] + kBatchNormMomentum * stats.mean[c];
        p.running_var[c] = (1.0 - kBatchNormMomentum) * p.running_var[c] + kBatchNormMomentum * stats.var[c];
    }
}

}  // namespace sseg
