#pragma once

#include <array>
#include <cstdint>

#include "stcd/nn.hpp"
#include "stcd/tensor.hpp"

namespace stcd {

// Per-token parameter projections for one scan direction.
// A = -exp(a_log) keeps Abar = exp(dt*A) inside (0,1).
struct ScanParams {
    Tensor a_log;   // (D, S)
    Tensor d_skip;  // (D)
    Tensor w_dt;    // (D, D)
    Tensor b_dt;    // (D)
    Tensor w_b;     // (S, D)
    Tensor w_c;     // (S, D)
};

// Core recurrence with explicit discretized inputs:
//   h_t = exp(dt_t * A) h_{t-1} + dt_t * B_t * u_t,  y_t = C_t . h_t + D_skip * u_t
// u, dt: (N, L, D); Bm, Cm: (N, L, S); A: (D, S); d_skip: (D).
Tensor scan_core(const Tensor& u, const Tensor& dt, const Tensor& Bm, const Tensor& Cm,
                 const Tensor& A, const Tensor& d_skip);

// Batched selective scan: derives dt, B, C from the input tokens.
Tensor selective_scan(const Tensor& x /* (N, L, D) */, const ScanParams& p);
// Single-sequence convenience wrapper.
Tensor selective_scan_1d(const Tensor& x /* (L, D) */, const ScanParams& p);

// Four scan orders over the spatial map (row-major fwd/bwd, column-major
// fwd/bwd), summed after un-flattening.
Tensor cross_scan_2d(const Tensor& x /* NCHW */, const std::array<ScanParams, 4>& dirs);

struct VssBlockParams {
    Tensor ln_gamma, ln_beta;  // (C)
    Conv2d expand;             // 1x1, C -> E
    Conv2d gate;               // 1x1, C -> E
    Conv2d dwconv;             // 3x3 depthwise on E
    std::array<ScanParams, 4> scans;
    Conv2d out_proj;           // 1x1, E -> C
};

// x + OutProj(Gate(LN x) * CrossScan(SiLU(DWConv(Expand(LN x)))))
Tensor vss_block(const Tensor& x, const VssBlockParams& p);

// Multiply-add count of scan_core forward passes; used to assert
// linear-in-L scaling without wall clocks.
uint64_t scan_flop_count();
void reset_scan_flop_count();

}  // namespace stcd
