#include <cmath>
#include <vector>

#include "doctest.h"
#include "stcd/gradcheck.hpp"
#include "stcd/nn.hpp"

using namespace stcd;

namespace {

// independent six-loop reference convolution
std::vector<double> conv_reference(const Tensor& x, const Conv2d& p) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cout = p.weight.dim(0), cin_g = p.weight.dim(1), kh = p.weight.dim(2), kw = p.weight.dim(3);
    const int cout_g = cout / p.groups;
    const int oh = conv_out_extent(h, kh, p.stride, p.pad);
    const int ow = conv_out_extent(w, kw, p.stride, p.pad);
    std::vector<double> out(static_cast<size_t>(n) * cout * oh * ow, 0.0);
    for (int b = 0; b < n; ++b)
        for (int oc = 0; oc < cout; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = p.bias.defined() ? p.bias.data()[oc] : 0.0;
                    for (int ic = 0; ic < cin_g; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * p.stride - p.pad + ky;
                                const int ix = ox * p.stride - p.pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                const int gc = (oc / cout_g) * cin_g + ic;
                                acc += x.data()[((static_cast<size_t>(b) * cin + gc) * h + iy) * w + ix] *
                                       p.weight.data()[((static_cast<size_t>(oc) * cin_g + ic) * kh + ky) * kw + kx];
                            }
                    out[((static_cast<size_t>(b) * cout + oc) * oh + oy) * ow + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("1x1 conv with identity weight is identity") {
    Tensor x = random_uniform({1, 3, 4, 4}, 3);
    Conv2d p;
    std::vector<double> w(9, 0.0);
    w[0] = w[4] = w[8] = 1.0;  // 3x3 identity as (Cout,Cin,1,1)
    p.weight = Tensor::from({3, 3, 1, 1}, w);
    CHECK(conv2d(x, p).data() == x.data());
}

TEST_CASE("3x3 depthwise delta kernel is identity") {
    Tensor x = random_uniform({1, 2, 5, 5}, 4);
    Conv2d p;
    std::vector<double> w(2 * 9, 0.0);
    w[4] = w[13] = 1.0;  // centered delta per channel
    p.weight = Tensor::from({2, 1, 3, 3}, w);
    p.groups = 2;
    p.pad = 1;
    CHECK(conv2d(x, p).data() == x.data());
}

TEST_CASE("3x3 all-ones kernel tap counts") {
    Tensor x = Tensor::full({1, 1, 4, 4}, 1.0);
    Conv2d p;
    p.weight = Tensor::full({1, 1, 3, 3}, 1.0);
    p.pad = 1;
    Tensor y = conv2d(x, p);
    CHECK(y.data()[0] == 4.0);   // corner
    CHECK(y.data()[1] == 6.0);   // edge
    CHECK(y.data()[5] == 9.0);   // interior
}

TEST_CASE("conv2d matches six-loop reference on random cases") {
    struct Case {
        Shape xs, ws;
        int stride, pad, groups;
    };
    for (const Case& c : {Case{{2, 4, 6, 5}, {3, 4, 3, 3}, 1, 1, 1},
                          Case{{1, 6, 7, 7}, {6, 1, 3, 3}, 1, 1, 6},
                          Case{{2, 3, 8, 8}, {5, 3, 4, 4}, 4, 0, 1},
                          Case{{1, 4, 6, 6}, {6, 2, 2, 2}, 2, 0, 2}}) {
        Conv2d p;
        p.weight = random_uniform(c.ws, 10 + c.groups);
        p.bias = random_uniform({c.ws[0]}, 20 + c.stride);
        p.stride = c.stride;
        p.pad = c.pad;
        p.groups = c.groups;
        Tensor x = random_uniform(c.xs, 30 + c.pad);
        CHECK(conv2d(x, p).data() == conv_reference(x, p));
    }
}

TEST_CASE("conv2d channel/group mismatch throws") {
    Conv2d p;
    p.weight = Tensor::zeros({4, 3, 1, 1});
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 5, 4, 4}), p), DimensionError);
}

TEST_CASE("dsconv shape, composition and parameter count") {
    const int cin = 256, width = 128;
    DsConv p;
    p.depthwise.weight = random_uniform({cin, 1, 3, 3}, 1, -0.1, 0.1);
    p.depthwise.groups = cin;
    p.depthwise.pad = 1;
    p.pointwise.weight = random_uniform({width, cin, 1, 1}, 2, -0.1, 0.1);
    p.pointwise.bias = random_uniform({width}, 3, -0.1, 0.1);

    Tensor x = random_uniform({1, cin, 8, 8}, 9);
    Tensor y = dsconv(x, p);
    CHECK(y.shape() == Shape{1, width, 8, 8});
    // fused op equals the two-op composition
    CHECK(y.data() == conv2d(conv2d(x, p.depthwise), p.pointwise).data());

    // 640 -> 128 parameter arithmetic
    const int64_t ds_params = 640 * 9 + 640 * 128 + 128;
    const int64_t full_params = 640LL * 128 * 9 + 128;
    CHECK(ds_params == 640 * 9 + 640 * 128 + 128);
    CHECK(ds_params < full_params);
}

TEST_CASE("cbam with zero weights scales by 0.25") {
    const int c = 8;
    CbamParams p;
    p.reduction = 4;
    p.mlp_w1 = Tensor::zeros({c / 4, c});
    p.mlp_w2 = Tensor::zeros({c, c / 4});
    p.spatial.weight = Tensor::zeros({1, 2, 3, 3});
    p.spatial.pad = 1;
    Tensor x = random_uniform({2, c, 4, 4}, 17);
    Tensor y = cbam(x, p);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(0.25 * x.data()[i]).epsilon(1e-12));
}

TEST_CASE("cbam masks lie strictly in (0,1) and output equals mask product") {
    const int c = 8;
    CbamParams p;
    p.reduction = 4;
    p.mlp_w1 = random_uniform({c / 4, c}, 31, -0.5, 0.5);
    p.mlp_w2 = random_uniform({c, c / 4}, 32, -0.5, 0.5);
    p.spatial.weight = random_uniform({1, 2, 3, 3}, 33, -0.5, 0.5);
    p.spatial.pad = 1;
    Tensor x = random_uniform({1, c, 5, 5}, 34);
    Tensor mc = cbam_channel_mask(x, p);
    Tensor ms = cbam_spatial_mask(x, p);
    for (double v : mc.data()) CHECK((v > 0.0 && v < 1.0));
    for (double v : ms.data()) CHECK((v > 0.0 && v < 1.0));
    Tensor y = cbam(x, p);
    Tensor ref = scale_spatial(scale_channels(x, mc), ms);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
    for (int64_t i = 0; i < y.size(); ++i)
        if (x.data()[i] != 0.0) CHECK(std::fabs(y.data()[i]) < std::fabs(x.data()[i]));
}

TEST_CASE("pools") {
    Tensor c = Tensor::full({1, 2, 3, 3}, 0.7);
    for (int i = 0; i < 2; ++i)
        CHECK(global_avg_pool(c).data()[i] == doctest::Approx(global_max_pool(c).data()[i]).epsilon(1e-15));
    // constant input plane: spatial avg plane equals max plane
    CHECK(channel_avg_pool(c).data() == channel_max_pool(c).data());

    Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(global_avg_pool(x).item() == 2.5);
    CHECK(global_max_pool(x).item() == 4.0);

    Tensor m = random_uniform({2, 5, 3, 3}, 44);
    Tensor planes = concat({channel_avg_pool(m), channel_max_pool(m)}, 1);
    CHECK(planes.shape() == Shape{2, 2, 3, 3});
}

TEST_CASE("max pool gradient goes to first argmax") {
    Tensor x = Tensor::from({1, 1, 1, 4}, {2, 5, 5, 1}, true);
    {
        Tape tape;
        tape.backward(sum(global_max_pool(x)));
    }
    CHECK(x.grad() == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("layer_norm definition") {
    Tensor g1 = Tensor::full({4}, 1.0);
    Tensor b0 = Tensor::zeros({4});
    Tensor c = Tensor::full({1, 4, 2, 2}, 3.3);
    Tensor y = layer_norm(c, g1, b0);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

    Tensor gamma = Tensor::full({4}, 1.5);
    Tensor beta = Tensor::full({4}, -0.25);
    Tensor x = random_uniform({2, 4, 3, 3}, 55);
    Tensor z = layer_norm(x, gamma, beta, 1e-10);
    for (int n = 0; n < 2; ++n)
        for (int p = 0; p < 9; ++p) {
            double m = 0, v = 0;
            for (int ch = 0; ch < 4; ++ch) m += z.data()[(n * 4 + ch) * 9 + p];
            m /= 4;
            for (int ch = 0; ch < 4; ++ch) {
                double d = z.data()[(n * 4 + ch) * 9 + p] - m;
                v += d * d;
            }
            v /= 4;
            CHECK(m == doctest::Approx(-0.25).epsilon(1e-6));
            CHECK(v == doctest::Approx(1.5 * 1.5).epsilon(1e-6));
        }
}

TEST_CASE("upsampling") {
    Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor y = upsample_nearest2x(x);
    CHECK(y.shape() == Shape{1, 1, 4, 4});
    CHECK(y.data()[0] == 1.0);
    CHECK(y.data()[3] == 2.0);

    Tensor c = Tensor::full({1, 2, 3, 3}, 1.25);
    Tensor b = upsample_bilinear(c, 4);
    CHECK(b.shape() == Shape{1, 2, 12, 12});
    for (double v : b.data()) CHECK(v == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("gradcheck: conv2d, dsconv, cbam, layer_norm, pools, upsampling") {
    Conv2d conv;
    conv.weight = random_uniform({3, 2, 3, 3}, 61, -0.5, 0.5);
    conv.bias = random_uniform({3}, 62, -0.5, 0.5);
    conv.pad = 1;
    Tensor x = random_uniform({2, 2, 4, 4}, 63);
    CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(conv2d(t, conv))); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) {
              Conv2d c2 = conv;
              c2.weight = t;
              return sum(sigmoid(conv2d(x, c2)));
          }, conv.weight).pass);
    CHECK(grad_check([&](const Tensor& t) {
              Conv2d c2 = conv;
              c2.bias = t;
              return sum(sigmoid(conv2d(x, c2)));
          }, conv.bias).pass);

    DsConv ds;
    ds.depthwise.weight = random_uniform({2, 1, 3, 3}, 64, -0.5, 0.5);
    ds.depthwise.groups = 2;
    ds.depthwise.pad = 1;
    ds.pointwise.weight = random_uniform({3, 2, 1, 1}, 65, -0.5, 0.5);
    CHECK(grad_check([&](const Tensor& t) { return mean(stcd::pow(dsconv(t, ds), 2.0)); }, x).pass);

    CbamParams cb;
    cb.reduction = 2;
    cb.mlp_w1 = random_uniform({1, 2}, 66, -0.5, 0.5);
    cb.mlp_w2 = random_uniform({2, 1}, 67, -0.5, 0.5);
    cb.spatial.weight = random_uniform({1, 2, 3, 3}, 68, -0.5, 0.5);
    cb.spatial.pad = 1;
    // max pools introduce tie kinks only on degenerate inputs; random input is safe
    CHECK(grad_check([&](const Tensor& t) { return mean(cbam(t, cb)); }, x).pass);

    Tensor gamma = random_uniform({2}, 69, 0.5, 1.5);
    Tensor beta = random_uniform({2}, 70, -0.5, 0.5);
    CHECK(grad_check([&](const Tensor& t) { return mean(stcd::pow(layer_norm(t, gamma, beta), 2.0)); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) { return mean(stcd::pow(layer_norm(x, t, beta), 2.0)); }, gamma).pass);

    CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(global_avg_pool(t))); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(global_max_pool(t))); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(channel_max_pool(t))); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) { return mean(stcd::pow(upsample_bilinear(t, 4), 2.0)); }, x).pass);
    CHECK(grad_check([&](const Tensor& t) { return mean(stcd::pow(upsample_nearest2x(t), 2.0)); }, x).pass);
}
