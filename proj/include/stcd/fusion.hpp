#pragma once

#include "stcd/tensor.hpp"

namespace stcd {

enum class FusionKind { Sequential, Cross, Parallel, ChannelCross, Difference };

const char* fusion_name(FusionKind k);

// (N,C,H,W) x2 -> (N,C,H,2W): all T1 tokens then all T2 tokens.
Tensor fuse_sequential(const Tensor& f1, const Tensor& f2);
// (N,C,H,W) x2 -> (N,C,H,2W): T1/T2 tokens alternating along the row.
Tensor fuse_cross(const Tensor& f1, const Tensor& f2);
// (N,C,H,W) x2 -> (N,2C,H,W): channel concatenation.
Tensor fuse_parallel(const Tensor& f1, const Tensor& f2);
// (N,C,H,W) x2 -> (N,2C,H,W): channels zipped [f1_1, f2_1, f1_2, f2_2, ...].
Tensor fuse_channel_cross(const Tensor& f1, const Tensor& f2);
// (N,C,H,W) x2 -> (N,C,H,W): |f2 - f1|.
Tensor fuse_difference(const Tensor& f1, const Tensor& f2);

Tensor fuse(FusionKind kind, const Tensor& f1, const Tensor& f2);

// Returns a width-doubled map to per-frame shape by summing the two
// temporal halves. kind must be Sequential or Cross.
Tensor fold_back(const Tensor& y, FusionKind kind);

// Output channel count of one mechanism for C input channels.
int fused_channels(FusionKind kind, int c);
// Whether the mechanism doubles the token width (needs fold_back).
bool doubles_width(FusionKind kind);

}  // namespace stcd
