#include "sseg/network.hpp"

#include <cmath>
#include <utility>

#include "sseg/error.hpp"
#include "sseg/rng.hpp"

namespace sseg {

void NetworkConfig::validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (levels != 3) throw ConfigError("levels is fixed at 3");
}

namespace {

ConvBlockParam make_block(int cin, int cout) {
    ConvBlockParam p;
    p.conv_a.cin = cin;
    p.conv_a.cout = cout;
    p.conv_a.init_shapes();
    p.bn_a.channels = cout;
    p.bn_a.init_shapes();
    p.act_a.channels = cout;
    p.act_a.init_shapes();
    p.conv_b.cin = cout;
    p.conv_b.cout = cout;
    p.conv_b.init_shapes();
    p.bn_b.channels = cout;
    p.bn_b.init_shapes();
    p.act_b.channels = cout;
    p.act_b.init_shapes();
    p.has_proj = cin != cout;
    if (p.has_proj) {
        p.proj.cin = cin;
        p.proj.cout = cout;
        p.proj.init_shapes();
    }
    return p;
}

UpBlockParam make_up(int cin, int cout) {
    UpBlockParam p;
    p.up.cin = cin;
    p.up.cout = cout;
    p.up.init_shapes();
    p.bn.channels = cout;
    p.bn.init_shapes();
    p.act.channels = cout;
    p.act.init_shapes();
    return p;
}

LocBlockParam make_loc(int cin, int cout) {
    LocBlockParam p;
    p.conv_a.cin = cin;
    p.conv_a.cout = cin;
    p.conv_a.init_shapes();
    p.bn_a.channels = cin;
    p.bn_a.init_shapes();
    p.act_a.channels = cin;
    p.act_a.init_shapes();
    p.conv_b.cin = cin;
    p.conv_b.cout = cout;
    p.conv_b.init_shapes();
    p.bn_b.channels = cout;
    p.bn_b.init_shapes();
    p.act_b.channels = cout;
    p.act_b.init_shapes();
    return p;
}

}  // namespace

ModelParams make_params(const NetworkConfig& config) {
    config.validate();
    const int b = config.base_channels;
    ModelParams p;
    p.enc0 = make_block(1, b);
    p.enc1 = make_block(b, 2 * b);
    p.enc2 = make_block(2 * b, 4 * b);
    p.up1 = make_up(4 * b, 2 * b);
    p.loc1 = make_loc(4 * b, 2 * b);
    p.up0 = make_up(2 * b, b);
    p.loc0 = make_loc(2 * b, b);
    p.head.cin = b;
    p.head.cout = config.num_classes;
    p.head.init_shapes();
    return p;
}

namespace {

void view_conv3(std::vector<ParamView>& out, const std::string& prefix, Conv3Param& c) {
    out.push_back({prefix + ".w", &c.w, true});
    out.push_back({prefix + ".b", &c.b, true});
}

void view_conv1(std::vector<ParamView>& out, const std::string& prefix, Conv1Param& c) {
    out.push_back({prefix + ".w", &c.w, true});
    out.push_back({prefix + ".b", &c.b, true});
}

void view_deconv(std::vector<ParamView>& out, const std::string& prefix, DeconvParam& c) {
    out.push_back({prefix + ".w", &c.w, true});
    out.push_back({prefix + ".b", &c.b, true});
}

void view_bn(std::vector<ParamView>& out, const std::string& prefix, BatchNormParam& c) {
    out.push_back({prefix + ".gamma", &c.gamma, true});
    out.push_back({prefix + ".beta", &c.beta, true});
    out.push_back({prefix + ".running_mean", &c.running_mean, false});
    out.push_back({prefix + ".running_var", &c.running_var, false});
}

void view_act(std::vector<ParamView>& out, const std::string& prefix, PReluParam& c) {
    out.push_back({prefix + ".slope", &c.slope, true});
}

void view_block(std::vector<ParamView>& out, const std::string& prefix, ConvBlockParam& p) {
    view_conv3(out, prefix + ".conv_a", p.conv_a);
    view_bn(out, prefix + ".bn_a", p.bn_a);
    view_act(out, prefix + ".act_a", p.act_a);
    view_conv3(out, prefix + ".conv_b", p.conv_b);
    view_bn(out, prefix + ".bn_b", p.bn_b);
    view_act(out, prefix + ".act_b", p.act_b);
    if (p.has_proj) view_conv1(out, prefix + ".proj", p.proj);
}

void view_up(std::vector<ParamView>& out, const std::string& prefix, UpBlockParam& p) {
    view_deconv(out, prefix + ".up", p.up);
    view_bn(out, prefix + ".bn", p.bn);
    view_act(out, prefix + ".act", p.act);
}

void view_loc(std::vector<ParamView>& out, const std::string& prefix, LocBlockParam& p) {
    view_conv3(out, prefix + ".conv_a", p.conv_a);
    view_bn(out, prefix + ".bn_a", p.bn_a);
    view_act(out, prefix + ".act_a", p.act_a);
    view_conv1(out, prefix + ".conv_b", p.conv_b);
    view_bn(out, prefix + ".bn_b", p.bn_b);
    view_act(out, prefix + ".act_b", p.act_b);
}

}  // namespace

std::vector<ParamView> param_views(ModelParams& p) {
    std::vector<ParamView> out;
    view_block(out, "enc0", p.enc0);
    view_block(out, "enc1", p.enc1);
    view_block(out, "enc2", p.enc2);
    view_up(out, "up1", p.up1);
    view_loc(out, "loc1", p.loc1);
    view_up(out, "up0", p.up0);
    view_loc(out, "loc0", p.loc0);
    view_conv1(out, "head", p.head);
    return out;
}

size_t count_learnable(const ModelParams& p) {
    size_t n = 0;
    for (const auto& v : param_views(const_cast<ModelParams&>(p)))
        if (v.learnable) n += v.values->size();
    return n;
}

size_t count_buffers(const ModelParams& p) {
    size_t n = 0;
    for (const auto& v : param_views(const_cast<ModelParams&>(p)))
        if (!v.learnable) n += v.values->size();
    return n;
}

void zero_params(ModelParams& p) {
    for (auto& v : param_views(p)) std::fill(v.values->begin(), v.values->end(), 0.0);
}

ModelState init_model(const NetworkConfig& config, uint64_t seed) {
    ModelState st;
    st.config = config;
    st.params = make_params(config);
    Rng rng(seed);
    auto fill3 = [&rng](Conv3Param& c) {
        const double s = std::sqrt(2.0 / (static_cast<double>(c.cin) * 27.0));
        for (auto& v : c.w) v = s * rng.normal();
    };
    auto fill1 = [&rng](Conv1Param& c) {
        const double s = std::sqrt(2.0 / static_cast<double>(c.cin));
        for (auto& v : c.w) v = s * rng.normal();
    };
    auto filld = [&rng](DeconvParam& c) {
        const double s = std::sqrt(2.0 / static_cast<double>(c.cin));
        for (auto& v : c.w) v = s * rng.normal();
    };
    auto fill_block = [&](ConvBlockParam& b) {
        fill3(b.conv_a);
        fill3(b.conv_b);
        if (b.has_proj) fill1(b.proj);
    };
    ModelParams& p = st.params;
    fill_block(p.enc0);
    fill_block(p.enc1);
    fill_block(p.enc2);
    filld(p.up1.up);
    fill3(p.loc1.conv_a);
    fill1(p.loc1.conv_b);
    filld(p.up0.up);
    fill3(p.loc0.conv_a);
    fill1(p.loc0.conv_b);
    // head stays zero: the untrained model predicts the uniform distribution
    return st;
}

namespace {

// Affine batch-norm replay from saved statistics; reproduces the training
// forward output bit for bit.
Tensor bn_apply(const BatchNormParam& p, const Tensor& x, const BatchNormStats& s) {
    Tensor y(x.channels, x.dims);
    const size_t n = x.voxels();
    for (int c = 0; c < x.channels; ++c) {
        const double* xc = x.channel(c);
        double* yc = y.channel(c);
        const double g = p.gamma[c] * s.inv_std[c];
        const double b = p.beta[c] - s.mean[c] * g;
        for (size_t i = 0; i < n; ++i) yc[i] = g * xc[i] + b;
    }
    return y;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor y(a.channels + b.channels, a.dims);
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.data.size());
    return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first) {
    Tensor a(first, t.dims), b(t.channels - first, t.dims);
    std::copy(t.data.begin(), t.data.begin() + a.data.size(), a.data.begin());
    std::copy(t.data.begin() + a.data.size(), t.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

void add_inplace(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

Tensor image_to_tensor(const ScalarVolume& image) {
    Tensor t(1, image.geom.dims);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(image.data[i]);
    return t;
}

Tensor forward(const ModelState& model, const Tensor& input, bool train, ForwardTrace* tr) {
    model.config.validate();
    const Vec3i d = input.dims;
    if (d.x % 4 || d.y % 4 || d.z % 4)
        throw ShapeError("network input dims must be divisible by 4 on every axis");
    const ModelParams& P = model.params;

    auto block = [&](const ConvBlockParam& p, Tensor x, ConvBlockTrace* t) -> Tensor {
        Tensor a1 = conv3_forward(p.conv_a, x);
        BatchNormStats s1, s2;
        Tensor r1 = prelu_forward(p.act_a, batchnorm_forward(p.bn_a, a1, train, train ? &s1 : nullptr));
        Tensor a2 = conv3_forward(p.conv_b, r1);
        r1.release();
        Tensor out = prelu_forward(p.act_b, batchnorm_forward(p.bn_b, a2, train, train ? &s2 : nullptr));
        if (p.has_proj) {
            add_inplace(out, conv1_forward(p.proj, x));
        } else {
            add_inplace(out, x);
        }
        if (t) {
            t->x = std::move(x);
            t->a1 = std::move(a1);
            t->a2 = std::move(a2);
            t->s1 = std::move(s1);
            t->s2 = std::move(s2);
        }
        return out;
    };

    // Encoder
    Tensor e0 = block(P.enc0, input, tr ? &tr->enc0 : nullptr);
    Tensor p0 = maxpool_forward(e0, tr ? &tr->pool0_arg : nullptr);
    const Tensor* skip0 = &e0;
    if (tr) {
        tr->enc0.out = std::move(e0);
        skip0 = &tr->enc0.out;
    }
    Tensor e1 = block(P.enc1, std::move(p0), tr ? &tr->enc1 : nullptr);
    Tensor p1 = maxpool_forward(e1, tr ? &tr->pool1_arg : nullptr);
    const Tensor* skip1 = &e1;
    if (tr) {
        tr->enc1.out = std::move(e1);
        skip1 = &tr->enc1.out;
    }
    Tensor e2 = block(P.enc2, std::move(p1), tr ? &tr->enc2 : nullptr);
    const Tensor* bottom = &e2;
    if (tr) {
        tr->enc2.out = std::move(e2);
        bottom = &tr->enc2.out;
    }

    // Decoder level 1
    Tensor d1 = deconv_forward(P.up1.up, *bottom);
    if (!tr) e2.release();
    BatchNormStats su1;
    Tensor u1 = prelu_forward(P.up1.act, batchnorm_forward(P.up1.bn, d1, train, train ? &su1 : nullptr));
    if (tr) {
        tr->up1.d = std::move(d1);
        tr->up1.s = std::move(su1);
    } else {
        d1.release();
    }
    Tensor cat1 = concat(u1, *skip1);
    u1.release();
    if (!tr) e1.release();
    Tensor c1a = conv3_forward(P.loc1.conv_a, cat1);
    cat1.release();
    BatchNormStats sa1, sb1;
    Tensor l1 = prelu_forward(P.loc1.act_a, batchnorm_forward(P.loc1.bn_a, c1a, train, train ? &sa1 : nullptr));
    Tensor c1b = conv1_forward(P.loc1.conv_b, l1);
    l1.release();
    Tensor o1 = prelu_forward(P.loc1.act_b, batchnorm_forward(P.loc1.bn_b, c1b, train, train ? &sb1 : nullptr));
    if (tr) {
        tr->loc1.ca = std::move(c1a);
        tr->loc1.cb = std::move(c1b);
        tr->loc1.sa = std::move(sa1);
        tr->loc1.sb = std::move(sb1);
    }

    // Decoder level 0
    Tensor d0 = deconv_forward(P.up0.up, o1);
    o1.release();
    BatchNormStats su0;
    Tensor u0 = prelu_forward(P.up0.act, batchnorm_forward(P.up0.bn, d0, train, train ? &su0 : nullptr));
    if (tr) {
        tr->up0.d = std::move(d0);
        tr->up0.s = std::move(su0);
    } else {
        d0.release();
    }
    Tensor cat0 = concat(u0, *skip0);
    u0.release();
    if (!tr) e0.release();
    Tensor c0a = conv3_forward(P.loc0.conv_a, cat0);
    cat0.release();
    BatchNormStats sa0, sb0;
    Tensor l0 = prelu_forward(P.loc0.act_a, batchnorm_forward(P.loc0.bn_a, c0a, train, train ? &sa0 : nullptr));
    Tensor c0b = conv1_forward(P.loc0.conv_b, l0);
    l0.release();
    Tensor o0 = prelu_forward(P.loc0.act_b, batchnorm_forward(P.loc0.bn_b, c0b, train, train ? &sb0 : nullptr));
    if (tr) {
        tr->loc0.ca = std::move(c0a);
        tr->loc0.cb = std::move(c0b);
        tr->loc0.sa = std::move(sa0);
        tr->loc0.sb = std::move(sb0);
    }

    Tensor logits = conv1_forward(P.head, o0);
    for (double v : logits.data)
        if (!std::isfinite(v)) throw NumericError("non-finite network output");
    return logits;
}

Tensor softmax(const Tensor& logits) {
    Tensor p(logits.channels, logits.dims);
    const size_t n = logits.voxels();
    const int k = logits.channels;
    for (size_t i = 0; i < n; ++i) {
        double m = logits.data[i];
        for (int c = 1; c < k; ++c) m = std::max(m, logits.data[c * n + i]);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            const double e = std::exp(logits.data[c * n + i] - m);
            p.data[c * n + i] = e;
            sum += e;
        }
        for (int c = 0; c < k; ++c) p.data[c * n + i] /= sum;
    }
    return p;
}

double cross_entropy_sum(const Tensor& probs, const LabelVolume& labels) {
    const size_t n = probs.voxels();
    if (labels.data.size() != n) throw ShapeError("labels do not match probability grid");
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const int l = labels.data[i];
        if (l >= probs.channels) throw ShapeError("label exceeds class count");
        const double p = std::max(kProbClamp, probs.data[static_cast<size_t>(l) * n + i]);
        loss -= std::log(p);
    }
    return loss;
}

Tensor cross_entropy_backward(const Tensor& probs, const LabelVolume& labels) {
    const size_t n = probs.voxels();
    if (labels.data.size() != n) throw ShapeError("labels do not match probability grid");
    Tensor d(probs.channels, probs.dims);
    for (size_t i = 0; i < n; ++i) {
        const int l = labels.data[i];
        if (l >= probs.channels) throw ShapeError("label exceeds class count");
        if (probs.data[static_cast<size_t>(l) * n + i] <= kProbClamp) continue;  // clamp active
        for (int c = 0; c < probs.channels; ++c)
            d.data[c * n + i] = probs.data[c * n + i] - (c == l ? 1.0 : 0.0);
    }
    return d;
}

void backward(const ModelState& model, ForwardTrace& tr, const Tensor& dlogits,
              ModelParams& grad) {
    const ModelParams& P = model.params;

    // Gradient through PReLU + BN given the saved conv output; releases it.
    auto act_bn_backward = [](const BatchNormParam& bn, const PReluParam& act,
                              BatchNormParam& gbn, PReluParam& gact, Tensor& conv_out,
                              const BatchNormStats& s, const Tensor& dout) -> Tensor {
        Tensor bn_out = bn_apply(bn, conv_out, s);
        Tensor d_bn = prelu_backward(act, bn_out, dout, gact);
        bn_out.release();
        Tensor d_conv = batchnorm_backward(bn, conv_out, s, d_bn, gbn);
        conv_out.release();
        return d_conv;
    };

    // Head: input is the loc0 output, rebuilt from the saved conv output.
    Tensor h_in = prelu_forward(P.loc0.act_b, bn_apply(P.loc0.bn_b, tr.loc0.cb, tr.loc0.sb));
    Tensor dh_in = conv1_backward(P.head, h_in, dlogits, grad.head);
    h_in.release();

    // loc0
    Tensor dc0b = act_bn_backward(P.loc0.bn_b, P.loc0.act_b, grad.loc0.bn_b, grad.loc0.act_b,
                                  tr.loc0.cb, tr.loc0.sb, dh_in);
    dh_in.release();
    Tensor l0a = prelu_forward(P.loc0.act_a, bn_apply(P.loc0.bn_a, tr.loc0.ca, tr.loc0.sa));
    Tensor dl0a = conv1_backward(P.loc0.conv_b, l0a, dc0b, grad.loc0.conv_b);
    l0a.release();
    dc0b.release();
    Tensor dc0a = act_bn_backward(P.loc0.bn_a, P.loc0.act_a, grad.loc0.bn_a, grad.loc0.act_a,
                                  tr.loc0.ca, tr.loc0.sa, dl0a);
    dl0a.release();
    Tensor u0 = prelu_forward(P.up0.act, bn_apply(P.up0.bn, tr.up0.d, tr.up0.s));
    Tensor cat0 = concat(u0, tr.enc0.out);
    u0.release();
    tr.enc0.out.release();
    Tensor dcat0 = conv3_backward(P.loc0.conv_a, cat0, dc0a, grad.loc0.conv_a);
    cat0.release();
    dc0a.release();
    auto [du0, dskip0] = split_channels(dcat0, P.up0.up.cout);
    dcat0.release();

    // up0
    Tensor dd0 = act_bn_backward(P.up0.bn, P.up0.act, grad.up0.bn, grad.up0.act, tr.up0.d,
                                 tr.up0.s, du0);
    du0.release();
    Tensor l1_out = prelu_forward(P.loc1.act_b, bn_apply(P.loc1.bn_b, tr.loc1.cb, tr.loc1.sb));
    Tensor do1 = deconv_backward(P.up0.up, l1_out, dd0, grad.up0.up);
    l1_out.release();
    dd0.release();

    // loc1
    Tensor dc1b = act_bn_backward(P.loc1.bn_b, P.loc1.act_b, grad.loc1.bn_b, grad.loc1.act_b,
                                  tr.loc1.cb, tr.loc1.sb, do1);
    do1.release();
    Tensor l1a = prelu_forward(P.loc1.act_a, bn_apply(P.loc1.bn_a, tr.loc1.ca, tr.loc1.sa));
    Tensor dl1a = conv1_backward(P.loc1.conv_b, l1a, dc1b, grad.loc1.conv_b);
    l1a.release();
    dc1b.release();
    Tensor dc1a = act_bn_backward(P.loc1.bn_a, P.loc1.act_a, grad.loc1.bn_a, grad.loc1.act_a,
                                  tr.loc1.ca, tr.loc1.sa, dl1a);
    dl1a.release();
    Tensor u1 = prelu_forward(P.up1.act, bn_apply(P.up1.bn, tr.up1.d, tr.up1.s));
    const Vec3i enc1_dims = tr.enc1.out.dims;
    Tensor cat1 = concat(u1, tr.enc1.out);
    u1.release();
    tr.enc1.out.release();
    Tensor dcat1 = conv3_backward(P.loc1.conv_a, cat1, dc1a, grad.loc1.conv_a);
    cat1.release();
    dc1a.release();
    auto [du1, dskip1] = split_channels(dcat1, P.up1.up.cout);
    dcat1.release();

    // up1
    Tensor dd1 = act_bn_backward(P.up1.bn, P.up1.act, grad.up1.bn, grad.up1.act, tr.up1.d,
                                 tr.up1.s, du1);
    du1.release();
    Tensor de2 = deconv_backward(P.up1.up, tr.enc2.out, dd1, grad.up1.up);
    tr.enc2.out.release();
    dd1.release();

    // Encoder blocks, unwound bottom-up.
    auto block_backward = [&](const ConvBlockParam& p, ConvBlockParam& g, ConvBlockTrace& t,
                              const Tensor& dout) -> Tensor {
        Tensor da2 = act_bn_backward(p.bn_b, p.act_b, g.bn_b, g.act_b, t.a2, t.s2, dout);
        Tensor r1 = prelu_forward(p.act_a, bn_apply(p.bn_a, t.a1, t.s1));
        Tensor dr1 = conv3_backward(p.conv_b, r1, da2, g.conv_b);
        r1.release();
        da2.release();
        Tensor da1 = act_bn_backward(p.bn_a, p.act_a, g.bn_a, g.act_a, t.a1, t.s1, dr1);
        dr1.release();
        Tensor dx = conv3_backward(p.conv_a, t.x, da1, g.conv_a);
        da1.release();
        if (p.has_proj) {
            add_inplace(dx, conv1_backward(p.proj, t.x, dout, g.proj));
        } else {
            add_inplace(dx, dout);
        }
        t.x.release();
        return dx;
    };

    Tensor dp1 = block_backward(P.enc2, grad.enc2, tr.enc2, de2);
    de2.release();
    Tensor de1 = maxpool_backward(dp1, enc1_dims, tr.pool1_arg);
    dp1.release();
    add_inplace(de1, dskip1);
    dskip1.release();

    const Vec3i enc0_dims{enc1_dims.x * 2, enc1_dims.y * 2, enc1_dims.z * 2};
    Tensor dp0 = block_backward(P.enc1, grad.enc1, tr.enc1, de1);
    de1.release();
    Tensor de0 = maxpool_backward(dp0, enc0_dims, tr.pool0_arg);
    dp0.release();
    add_inplace(de0, dskip0);
    dskip0.release();

    block_backward(P.enc0, grad.enc0, tr.enc0, de0);
}

void update_batchnorm_running(ModelParams& params, const ForwardTrace& tr) {
    update_running_stats(params.enc0.bn_a, tr.enc0.s1);
    update_running_stats(params.enc0.bn_b, tr.enc0.s2);
    update_running_stats(params.enc1.bn_a, tr.enc1.s1);
    update_running_stats(params.enc1.bn_b, tr.enc1.s2);
    update_running_stats(params.enc2.bn_a, tr.enc2.s1);
    update_running_stats(params.enc2.bn_b, tr.enc2.s2);
    update_running_stats(params.up1.bn, tr.up1.s);
    update_running_stats(params.loc1.bn_a, tr.loc1.sa);
    update_running_stats(params.loc1.bn_b, tr.loc1.sb);
    update_running_stats(params.up0.bn, tr.up0.s);
    update_running_stats(params.loc0.bn_a, tr.loc0.sa);
    update_running_stats(params.loc0.bn_b, tr.loc0.sb);
}

ProbabilityVolume predict_probabilities(const ModelState& model, const ScalarVolume& image) {
    image.geom.validate();
    Tensor input = image_to_tensor(image);
    Tensor logits = forward(model, input, false, nullptr);
    input.release();
    return {image.geom, softmax(logits)};
}

LabelVolume argmax_labels(const ProbabilityVolume& p) {
    LabelVolume out(p.geometry);
    const size_t n = p.probs.voxels();
    for (size_t i = 0; i < n; ++i) {
        int best = 0;
        double bv = p.probs.data[i];
        for (int c = 1; c < p.probs.channels; ++c) {
            const double v = p.probs.data[c * n + i];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out.data[i] = static_cast<uint8_t>(best);
    }
    return out;
}

}  // namespace sseg
