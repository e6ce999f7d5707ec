#include "stcd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stcd {

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Conv2d& p) {
    if (x.rank() != 4) throw DimensionError("conv2d: expected NCHW input");
    const Tensor& w = p.weight;
    if (w.rank() != 4) throw DimensionError("conv2d: expected 4-D weight");
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), cin_g = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int groups = p.groups;
    if (groups < 1 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g)
        throw DimensionError("conv2d: channel/group mismatch (Cin=" + std::to_string(cin) +
                             ", groups=" + std::to_string(groups) + ", weight Cin/g=" + std::to_string(cin_g) + ")");
    if (p.bias.defined() && (p.bias.rank() != 1 || p.bias.dim(0) != cout))
        throw DimensionError("conv2d: bad bias shape");
    const int oh = conv_out_extent(h, kh, p.stride, p.pad);
    const int ow = conv_out_extent(wd, kw, p.stride, p.pad);
    if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: kernel larger than padded input");

    const int cout_g = cout / groups;
    const auto& xv = x.data();
    const auto& wv = w.data();
    std::vector<double> out(static_cast<size_t>(n) * cout * oh * ow, 0.0);

    const int stride = p.stride, pad = p.pad;
    const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0 && groups == 1;
    if (pointwise) {
        // 1x1 convs dominate this architecture; contiguous row kernels keep
        // the same per-pixel accumulation order (bias, then ic ascending) as
        // the general path
        const int64_t plane = static_cast<int64_t>(h) * wd;
        for (int b = 0; b < n; ++b)
            for (int oc = 0; oc < cout; ++oc) {
                double* orow = &out[(static_cast<size_t>(b) * cout + oc) * plane];
                if (p.bias.defined()) {
                    const double bv = p.bias.data()[static_cast<size_t>(oc)];
                    for (int64_t i = 0; i < plane; ++i) orow[i] = bv;
                }
                const double* wr = &wv[static_cast<size_t>(oc) * cin];
                for (int ic = 0; ic < cin; ++ic) {
                    const double wk = wr[ic];
                    const double* xrow = &xv[(static_cast<size_t>(b) * cin + ic) * plane];
                    for (int64_t i = 0; i < plane; ++i) orow[i] += wk * xrow[i];
                }
            }
        Tensor weight1 = p.weight, bias1 = p.bias;
        return make_op("conv2d", {n, cout, h, wd}, std::move(out), {x, weight1, bias1},
                       [x, weight1, bias1, n, cin, cout, plane](TensorNode& nd) {
                           const auto& xv = x.data();
                           const auto& wv = weight1.data();
                           if (x.requires_grad()) {
                               x.node()->ensure_grad();
                               auto& gx = x.node()->grad;
                               for (int b = 0; b < n; ++b)
                                   for (int oc = 0; oc < cout; ++oc) {
                                       const double* grow = &nd.grad[(static_cast<size_t>(b) * cout + oc) * plane];
                                       const double* wr = &wv[static_cast<size_t>(oc) * cin];
                                       for (int ic = 0; ic < cin; ++ic) {
                                           const double wk = wr[ic];
                                           double* gxr = &gx[(static_cast<size_t>(b) * cin + ic) * plane];
                                           for (int64_t i = 0; i < plane; ++i) gxr[i] += wk * grow[i];
                                       }
                                   }
                           }
                           if (weight1.requires_grad()) {
                               weight1.node()->ensure_grad();
                               auto& gw = weight1.node()->grad;
                               for (int b = 0; b < n; ++b)
                                   for (int oc = 0; oc < cout; ++oc) {
                                       const double* grow = &nd.grad[(static_cast<size_t>(b) * cout + oc) * plane];
                                       for (int ic = 0; ic < cin; ++ic) {
                                           const double* xrow = &xv[(static_cast<size_t>(b) * cin + ic) * plane];
                                           double acc = 0.0;
                                           for (int64_t i = 0; i < plane; ++i) acc += grow[i] * xrow[i];
                                           gw[static_cast<size_t>(oc) * cin + ic] += acc;
                                       }
                                   }
                           }
                           if (bias1.defined() && bias1.requires_grad()) {
                               bias1.node()->ensure_grad();
                               auto& gb = bias1.node()->grad;
                               for (int b = 0; b < n; ++b)
                                   for (int oc = 0; oc < cout; ++oc) {
                                       const double* grow = &nd.grad[(static_cast<size_t>(b) * cout + oc) * plane];
                                       double acc = 0.0;
                                       for (int64_t i = 0; i < plane; ++i) acc += grow[i];
                                       gb[static_cast<size_t>(oc)] += acc;
                                   }
                           }
                       });
    }
    for (int b = 0; b < n; ++b)
        for (int oc = 0; oc < cout; ++oc) {
            const int g = oc / cout_g;
            const double bias = p.bias.defined() ? p.bias.data()[static_cast<size_t>(oc)] : 0.0;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias;
                    for (int ic = 0; ic < cin_g; ++ic) {
                        const size_t xbase = ((static_cast<size_t>(b) * cin) + g * cin_g + ic) * h * wd;
                        const size_t wbase = ((static_cast<size_t>(oc) * cin_g) + ic) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                acc += xv[xbase + static_cast<size_t>(iy) * wd + ix] * wv[wbase + static_cast<size_t>(ky) * kw + kx];
                            }
                        }
                    }
                    out[((static_cast<size_t>(b) * cout + oc) * oh + oy) * ow + ox] = acc;
                }
        }

    Tensor weight = p.weight, bias = p.bias;
    return make_op("conv2d", {n, cout, oh, ow}, std::move(out), {x, weight, bias},
                   [x, weight, bias, n, cin, h, wd, cout, cin_g, cout_g, kh, kw, oh, ow, stride, pad](TensorNode& nd) {
                       const auto& xv = x.data();
                       const auto& wv = weight.data();
                       const bool gx_on = x.requires_grad();
                       const bool gw_on = weight.requires_grad();
                       if (gx_on) x.node()->ensure_grad();
                       if (gw_on) weight.node()->ensure_grad();
                       for (int b = 0; b < n; ++b)
                           for (int oc = 0; oc < cout; ++oc) {
                               const int g = oc / cout_g;
                               for (int oy = 0; oy < oh; ++oy)
                                   for (int ox = 0; ox < ow; ++ox) {
                                       const double go = nd.grad[((static_cast<size_t>(b) * cout + oc) * oh + oy) * ow + ox];
                                       if (go == 0.0) continue;
                                       for (int ic = 0; ic < cin_g; ++ic) {
                                           const size_t xbase = ((static_cast<size_t>(b) * cin) + g * cin_g + ic) * h * wd;
                                           const size_t wbase = ((static_cast<size_t>(oc) * cin_g) + ic) * kh * kw;
                                           for (int ky = 0; ky < kh; ++ky) {
                                               const int iy = oy * stride - pad + ky;
                                               if (iy < 0 || iy >= h) continue;
                                               for (int kx = 0; kx < kw; ++kx) {
                                                   const int ix = ox * stride - pad + kx;
                                                   if (ix < 0 || ix >= wd) continue;
                                                   const size_t xi = xbase + static_cast<size_t>(iy) * wd + ix;
                                                   const size_t wi = wbase + static_cast<size_t>(ky) * kw + kx;
                                                   if (gx_on) x.node()->grad[xi] += go * wv[wi];
                                                   if (gw_on) weight.node()->grad[wi] += go * xv[xi];
                                               }
                                           }
                                       }
                                   }
                           }
                       if (bias.defined() && bias.requires_grad()) {
                           bias.node()->ensure_grad();
                           auto& gb = bias.node()->grad;
                           for (int b = 0; b < n; ++b)
                               for (int oc = 0; oc < cout; ++oc) {
                                   double acc = 0.0;
                                   const size_t base = (static_cast<size_t>(b) * cout + oc) * oh * ow;
                                   for (int i = 0; i < oh * ow; ++i) acc += nd.grad[base + i];
                                   gb[static_cast<size_t>(oc)] += acc;
                               }
                       }
                   });
}

Tensor dsconv(const Tensor& x, const DsConv& p) {
    Tensor y = x;
    if (p.depthwise.weight.defined()) y = conv2d(y, p.depthwise);
    return conv2d(y, p.pointwise);
}

Tensor cbam_channel_mask(const Tensor& x, const CbamParams& p) {
    Tensor avg = global_avg_pool(x);  // (N, C)
    Tensor mx = global_max_pool(x);
    // shared MLP on both branches
    auto mlp = [&](const Tensor& v) { return linear(relu(linear(v, p.mlp_w1)), p.mlp_w2); };
    return sigmoid(add(mlp(avg), mlp(mx)));
}

Tensor cbam_spatial_mask(const Tensor& x, const CbamParams& p) {
    Tensor planes = concat({channel_avg_pool(x), channel_max_pool(x)}, 1);  // (N, 2, H, W)
    return sigmoid(conv2d(planes, p.spatial));
}

Tensor cbam(const Tensor& x, const CbamParams& p) {
    const int c = x.dim(1);
    if (p.mlp_w1.dim(1) != c || p.mlp_w2.dim(0) != c)
        throw DimensionError("cbam: channel count mismatch");
    Tensor mc = cbam_channel_mask(x, p);
    Tensor refined = scale_channels(x, mc);
    Tensor ms = cbam_spatial_mask(x, p);
    return scale_spatial(refined, ms);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 4) throw DimensionError("layer_norm: expected NCHW input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.size() != c || beta.size() != c) throw DimensionError("layer_norm: bad affine shape");
    if (eps <= 0) throw DomainError("layer_norm: eps must be positive");
    const int64_t hw = static_cast<int64_t>(h) * w;
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    std::vector<double> out(static_cast<size_t>(x.size()));
    // cache per-position mean and inverse stddev for backward
    auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * hw * 2);
    for (int b = 0; b < n; ++b)
        for (int64_t ppos = 0; ppos < hw; ++ppos) {
            double m = 0.0;
            for (int ch = 0; ch < c; ++ch) m += xv[(static_cast<size_t>(b) * c + ch) * hw + ppos];
            m /= c;
            double var = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double d = xv[(static_cast<size_t>(b) * c + ch) * hw + ppos] - m;
                var += d * d;
            }
            var /= c;
            const double inv = 1.0 / std::sqrt(var + eps);
            (*stats)[(static_cast<size_t>(b) * hw + ppos) * 2] = m;
            (*stats)[(static_cast<size_t>(b) * hw + ppos) * 2 + 1] = inv;
            for (int ch = 0; ch < c; ++ch) {
                const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + ppos;
                out[xi] = (xv[xi] - m) * inv * gv[static_cast<size_t>(ch)] + bv[static_cast<size_t>(ch)];
            }
        }
    return make_op("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                   [x, gamma, beta, stats, n, c, hw](TensorNode& nd) {
                       const auto& xv = x.data();
                       const auto& gv = gamma.data();
                       for (int b = 0; b < n; ++b)
                           for (int64_t ppos = 0; ppos < hw; ++ppos) {
                               const double m = (*stats)[(static_cast<size_t>(b) * hw + ppos) * 2];
                               const double inv = (*stats)[(static_cast<size_t>(b) * hw + ppos) * 2 + 1];
                               // gy through the affine, then standard layernorm backward
                               double sum_gy = 0.0, sum_gy_xhat = 0.0;
                               for (int ch = 0; ch < c; ++ch) {
                                   const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + ppos;
                                   const double xhat = (xv[xi] - m) * inv;
                                   const double gy = nd.grad[xi] * gv[static_cast<size_t>(ch)];
                                   sum_gy += gy;
                                   sum_gy_xhat += gy * xhat;
                               }
                               if (x.requires_grad()) {
                                   x.node()->ensure_grad();
                                   auto& gx = x.node()->grad;
                                   for (int ch = 0; ch < c; ++ch) {
                                       const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + ppos;
                                       const double xhat = (xv[xi] - m) * inv;
                                       const double gy = nd.grad[xi] * gv[static_cast<size_t>(ch)];
                                       gx[xi] += inv * (gy - sum_gy / c - xhat * sum_gy_xhat / c);
                                   }
                               }
                               if (gamma.requires_grad()) {
                                   gamma.node()->ensure_grad();
                                   auto& gg = gamma.node()->grad;
                                   for (int ch = 0; ch < c; ++ch) {
                                       const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + ppos;
                                       const double xhat = (xv[xi] - m) * inv;
                                       gg[static_cast<size_t>(ch)] += nd.grad[xi] * xhat;
                                   }
                               }
                               if (beta.requires_grad()) {
                                   beta.node()->ensure_grad();
                                   auto& gb = beta.node()->grad;
                                   for (int ch = 0; ch < c; ++ch)
                                       gb[static_cast<size_t>(ch)] += nd.grad[(static_cast<size_t>(b) * c + ch) * hw + ppos];
                               }
                           }
                   });
}

namespace {
void require_spatial(const Tensor& x, const char* op) {
    if (x.rank() != 4) throw DimensionError(std::string(op) + ": expected NCHW input");
    if (x.dim(2) <= 0 || x.dim(3) <= 0) throw DimensionError(std::string(op) + ": empty spatial extent");
}
}  // namespace

Tensor global_avg_pool(const Tensor& x) {
    require_spatial(x, "global_avg_pool");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    std::vector<double> out(static_cast<size_t>(n) * c);
    const auto& xv = x.data();
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += xv[static_cast<size_t>(nc * hw + i)];
        out[static_cast<size_t>(nc)] = s / static_cast<double>(hw);
    }
    return make_op("global_avg_pool", {n, c}, std::move(out), {x}, [x, n, c, hw](TensorNode& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
            const double g = nd.grad[static_cast<size_t>(nc)] / static_cast<double>(hw);
            for (int64_t i = 0; i < hw; ++i) gx[static_cast<size_t>(nc * hw + i)] += g;
        }
    });
}

Tensor global_max_pool(const Tensor& x) {
    require_spatial(x, "global_max_pool");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    std::vector<double> out(static_cast<size_t>(n) * c);
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n) * c);
    const auto& xv = x.data();
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t bi = 0;
        for (int64_t i = 0; i < hw; ++i) {
            const double v = xv[static_cast<size_t>(nc * hw + i)];
            if (v > best) {  // first argmax wins ties
                best = v;
                bi = i;
            }
        }
        out[static_cast<size_t>(nc)] = best;
        (*argmax)[static_cast<size_t>(nc)] = nc * hw + bi;
    }
    return make_op("global_max_pool", {n, c}, std::move(out), {x}, [x, argmax](TensorNode& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (size_t nc = 0; nc < argmax->size(); ++nc) gx[static_cast<size_t>((*argmax)[nc])] += nd.grad[nc];
    });
}

Tensor channel_avg_pool(const Tensor& x) {
    require_spatial(x, "channel_avg_pool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> out(static_cast<size_t>(n) * hw);
    const auto& xv = x.data();
    for (int b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            double s = 0.0;
            for (int ch = 0; ch < c; ++ch) s += xv[(static_cast<size_t>(b) * c + ch) * hw + i];
            out[static_cast<size_t>(b) * hw + i] = s / c;
        }
    return make_op("channel_avg_pool", {n, 1, h, w}, std::move(out), {x}, [x, n, c, hw](TensorNode& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (int b = 0; b < n; ++b)
            for (int64_t i = 0; i < hw; ++i) {
                const double g = nd.grad[static_cast<size_t>(b) * hw + i] / c;
                for (int ch = 0; ch < c; ++ch) gx[(static_cast<size_t>(b) * c + ch) * hw + i] += g;
            }
    });
}

Tensor channel_max_pool(const Tensor& x) {
    require_spatial(x, "channel_max_pool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> out(static_cast<size_t>(n) * hw);
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n) * hw);
    const auto& xv = x.data();
    for (int b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            int64_t bi = 0;
            for (int ch = 0; ch < c; ++ch) {
                const double v = xv[(static_cast<size_t>(b) * c + ch) * hw + i];
                if (v > best) {
                    best = v;
                    bi = (static_cast<int64_t>(b) * c + ch) * hw + i;
                }
            }
            out[static_cast<size_t>(b) * hw + i] = best;
            (*argmax)[static_cast<size_t>(b) * hw + i] = bi;
        }
    return make_op("channel_max_pool", {n, 1, h, w}, std::move(out), {x}, [x, argmax](TensorNode& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (size_t i = 0; i < argmax->size(); ++i) gx[static_cast<size_t>((*argmax)[i])] += nd.grad[i];
    });
}

Tensor upsample_nearest2x(const Tensor& x) {
    require_spatial(x, "upsample_nearest2x");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = 2 * h, ow = 2 * w;
    std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
    const auto& xv = x.data();
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out[(static_cast<size_t>(nc) * oh + oy) * ow + ox] =
                    xv[(static_cast<size_t>(nc) * h + oy / 2) * w + ox / 2];
    return make_op("upsample_nearest2x", {n, c, oh, ow}, std::move(out), {x}, [x, n, c, h, w, oh, ow](TensorNode& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        auto& gx = x.node()->grad;
        for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    gx[(static_cast<size_t>(nc) * h + oy / 2) * w + ox / 2] +=
                        nd.grad[(static_cast<size_t>(nc) * oh + oy) * ow + ox];
    });
}

Tensor upsample_bilinear(const Tensor& x, int scale) {
    require_spatial(x, "upsample_bilinear");
    if (scale < 1) throw DimensionError("upsample_bilinear: scale must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = scale * h, ow = scale * w;
    // per-output interpolation stencil (y0, y1, wy) x (x0, x1, wx)
    struct Stencil {
        int i0, i1;
        double t;
    };
    auto make_axis = [scale](int in, int out) {
        std::vector<Stencil> st(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o) {
            double pos = (o + 0.5) / scale - 0.5;
            pos = std::max(0.0, std::min(pos, static_cast<double>(in - 1)));
            const int i0 = static_cast<int>(std::floor(pos));
            const int i1 = std::min(i0 + 1, in - 1);
            st[static_cast<size_t>(o)] = {i0, i1, pos - i0};
        }
        return st;
    };
    auto ys = std::make_shared<std::vector<Stencil>>(make_axis(h, oh));
    auto xs = std::make_shared<std::vector<Stencil>>(make_axis(w, ow));
    std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
    const auto& xv = x.data();
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        const double* plane = &xv[static_cast<size_t>(nc) * h * w];
        for (int oy = 0; oy < oh; ++oy) {
            const auto& sy = (*ys)[static_cast<size_t>(oy)];
            for (int ox = 0; ox < ow; ++ox) {
                const auto& sx = (*xs)[static_cast<size_t>(ox)];
                const double v00 = plane[sy.i0 * w + sx.i0], v01 = plane[sy.i0 * w + sx.i1];
                const double v10 = plane[sy.i1 * w + sx.i0], v11 = plane[sy.i1 * w + sx.i1];
                out[(static_cast<size_t>(nc) * oh + oy) * ow + ox] =
                    (1 - sy.t) * ((1 - sx.t) * v00 + sx.t * v01) + sy.t * ((1 - sx.t) * v10 + sx.t * v11);
            }
        }
    }
    return make_op("upsample_bilinear", {n, c, oh, ow}, std::move(out), {x},
                   [x, ys, xs, n, c, h, w, oh, ow](TensorNode& nd) {
                       if (!x.requires_grad()) return;
                       x.node()->ensure_grad();
                       auto& gx = x.node()->grad;
                       for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
                           double* plane = &gx[static_cast<size_t>(nc) * h * w];
                           for (int oy = 0; oy < oh; ++oy) {
                               const auto& sy = (*ys)[static_cast<size_t>(oy)];
                               for (int ox = 0; ox < ow; ++ox) {
                                   const auto& sx = (*xs)[static_cast<size_t>(ox)];
                                   const double g = nd.grad[(static_cast<size_t>(nc) * oh + oy) * ow + ox];
                                   plane[sy.i0 * w + sx.i0] += g * (1 - sy.t) * (1 - sx.t);
                                   plane[sy.i0 * w + sx.i1] += g * (1 - sy.t) * sx.t;
                                   plane[sy.i1 * w + sx.i0] += g * sy.t * (1 - sx.t);
                                   plane[sy.i1 * w + sx.i1] += g * sy.t * sx.t;
                               }
                           }
                       }
                   });
}

}  // namespace stcd
