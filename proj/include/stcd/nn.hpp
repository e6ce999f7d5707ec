#pragma once

#include <utility>

#include "stcd/tensor.hpp"

namespace stcd {

struct Conv2d {
    Tensor weight;  // (C_out, C_in/groups, kH, kW)
    Tensor bias;    // optional (C_out)
    int stride = 1;
    int pad = 0;
    int groups = 1;
};

// Standard cross-correlation on NCHW input.
Tensor conv2d(const Tensor& x, const Conv2d& p);

struct DsConv {
    Conv2d depthwise;  // 3x3, groups = C_in, pad 1 (undefined weight = plain 1x1 path)
    Conv2d pointwise;  // 1x1 to the decoder width
};

Tensor dsconv(const Tensor& x, const DsConv& p);

struct CbamParams {
    Tensor mlp_w1;       // (C/r, C)
    Tensor mlp_w2;       // (C, C/r)
    Conv2d spatial;      // (1, 2, k, k), pad (k-1)/2
    int reduction = 16;
};

Tensor cbam(const Tensor& x, const CbamParams& p);
// The two masks on their own, recomputable independently of cbam().
Tensor cbam_channel_mask(const Tensor& x, const CbamParams& p);  // (N, C)
Tensor cbam_spatial_mask(const Tensor& x, const CbamParams& p);  // (N, 1, H, W)

// Normalizes over the channel axis at each (n, h, w) position.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// (N, C, H, W) -> (N, C) reductions over the spatial plane.
Tensor global_avg_pool(const Tensor& x);
Tensor global_max_pool(const Tensor& x);
// (N, C, H, W) -> (N, 1, H, W) reductions over channels.
Tensor channel_avg_pool(const Tensor& x);
Tensor channel_max_pool(const Tensor& x);

Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_bilinear(const Tensor& x, int scale);

// Output spatial extent of one conv axis.
int conv_out_extent(int in, int k, int stride, int pad);

}  // namespace stcd
