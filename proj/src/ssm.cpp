#include "stcd/ssm.hpp"

#include <cmath>

namespace stcd {

namespace {
uint64_t g_scan_flops = 0;

void require_finite_params(const ScanParams& p) {
    auto chk = [](const Tensor& t) {
        for (double v : t.data())
            if (!std::isfinite(v)) throw DomainError("selective_scan: non-finite parameter");
    };
    chk(p.a_log);
    chk(p.d_skip);
    chk(p.w_dt);
    chk(p.b_dt);
    chk(p.w_b);
    chk(p.w_c);
}
}  // namespace

uint64_t scan_flop_count() { return g_scan_flops; }
void reset_scan_flop_count() { g_scan_flops = 0; }

Tensor scan_core(const Tensor& u, const Tensor& dt, const Tensor& Bm, const Tensor& Cm,
                 const Tensor& A, const Tensor& d_skip) {
    if (u.rank() != 3 || dt.shape() != u.shape())
        throw DimensionError("scan_core: u and dt must be (N,L,D) with equal shapes");
    const int n = u.dim(0), l = u.dim(1), d = u.dim(2);
    if (Bm.rank() != 3 || Cm.rank() != 3 || Bm.dim(0) != n || Bm.dim(1) != l || Cm.shape() != Bm.shape())
        throw DimensionError("scan_core: B and C must be (N,L,S)");
    const int s = Bm.dim(2);
    if (A.shape() != Shape{d, s} || d_skip.shape() != Shape{d})
        throw DimensionError("scan_core: A must be (D,S) and D_skip (D)");

    const auto& uv = u.data();
    const auto& dtv = dt.data();
    const auto& bv = Bm.data();
    const auto& cv = Cm.data();
    const auto& av = A.data();
    const auto& dkv = d_skip.data();

    std::vector<double> out(static_cast<size_t>(n) * l * d);
    std::vector<double> h(static_cast<size_t>(d) * s);
    for (int b = 0; b < n; ++b) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int t = 0; t < l; ++t) {
            const size_t tok = (static_cast<size_t>(b) * l + t);
            const double* bt = &bv[tok * s];
            const double* ct = &cv[tok * s];
            for (int di = 0; di < d; ++di) {
                const double x = uv[tok * d + di];
                const double delta = dtv[tok * d + di];
                double* hd = &h[static_cast<size_t>(di) * s];
                const double* ad = &av[static_cast<size_t>(di) * s];
                double y = dkv[static_cast<size_t>(di)] * x;
                for (int si = 0; si < s; ++si) {
                    hd[si] = std::exp(delta * ad[si]) * hd[si] + delta * bt[si] * x;
                    y += ct[si] * hd[si];
                }
                out[tok * d + di] = y;
            }
        }
    }
    g_scan_flops += static_cast<uint64_t>(n) * l * d * s * 6;

    return make_op("scan_core", {n, l, d}, std::move(out), {u, dt, Bm, Cm, A, d_skip},
                   [u, dt, Bm, Cm, A, d_skip, n, l, d, s](TensorNode& nd) {
                       const auto& uv = u.data();
                       const auto& dtv = dt.data();
                       const auto& bv = Bm.data();
                       const auto& cv = Cm.data();
                       const auto& av = A.data();
                       const auto& dkv = d_skip.data();
                       auto grad_of = [](const Tensor& t) -> std::vector<double>* {
                           if (!t.requires_grad()) return nullptr;
                           t.node()->ensure_grad();
                           return &t.node()->grad;
                       };
                       auto* gu = grad_of(u);
                       auto* gdt = grad_of(dt);
                       auto* gB = grad_of(Bm);
                       auto* gC = grad_of(Cm);
                       auto* gA = grad_of(A);
                       auto* gDk = grad_of(d_skip);

                       // recomputed states h and decay factors abar for t = 0..L-1
                       std::vector<double> hist(static_cast<size_t>(l) * d * s);
                       std::vector<double> decay(static_cast<size_t>(l) * d * s);
                       std::vector<double> carry(static_cast<size_t>(d) * s);
                       for (int b = 0; b < n; ++b) {
                           // forward replay
                           for (int t = 0; t < l; ++t) {
                               const size_t tok = (static_cast<size_t>(b) * l + t);
                               const double* bt = &bv[tok * s];
                               for (int di = 0; di < d; ++di) {
                                   const double x = uv[tok * d + di];
                                   const double delta = dtv[tok * d + di];
                                   const double* ad = &av[static_cast<size_t>(di) * s];
                                   const double* hprev = t > 0 ? &hist[((static_cast<size_t>(t) - 1) * d + di) * s] : nullptr;
                                   double* hcur = &hist[(static_cast<size_t>(t) * d + di) * s];
                                   double* acur = &decay[(static_cast<size_t>(t) * d + di) * s];
                                   for (int si = 0; si < s; ++si) {
                                       const double prev = hprev ? hprev[si] : 0.0;
                                       acur[si] = std::exp(delta * ad[si]);
                                       hcur[si] = acur[si] * prev + delta * bt[si] * x;
                                   }
                               }
                           }
                           // reverse sweep
                           std::fill(carry.begin(), carry.end(), 0.0);
                           for (int t = l - 1; t >= 0; --t) {
                               const size_t tok = (static_cast<size_t>(b) * l + t);
                               const double* bt = &bv[tok * s];
                               const double* ct = &cv[tok * s];
                               for (int di = 0; di < d; ++di) {
                                   const double go = nd.grad[tok * d + di];
                                   const double x = uv[tok * d + di];
                                   const double delta = dtv[tok * d + di];
                                   const double* ad = &av[static_cast<size_t>(di) * s];
                                   const double* hcur = &hist[(static_cast<size_t>(t) * d + di) * s];
                                   const double* acur = &decay[(static_cast<size_t>(t) * d + di) * s];
                                   const double* hprev = t > 0 ? &hist[((static_cast<size_t>(t) - 1) * d + di) * s] : nullptr;
                                   double* cr = &carry[static_cast<size_t>(di) * s];
                                   double gdt_acc = 0.0, gu_acc = 0.0;
                                   for (int si = 0; si < s; ++si) {
                                       const double gh = go * ct[si] + cr[si];
                                       const double abar = acur[si];
                                       const double prev = hprev ? hprev[si] : 0.0;
                                       gdt_acc += gh * (abar * ad[si] * prev + bt[si] * x);
                                       gu_acc += gh * delta * bt[si];
                                       if (gA) (*gA)[static_cast<size_t>(di) * s + si] += gh * abar * delta * prev;
                                       if (gB) (*gB)[tok * s + si] += gh * delta * x;
                                       if (gC) (*gC)[tok * s + si] += go * hcur[si];
                                       cr[si] = gh * abar;  // becomes a_t * gh_t for step t-1
                                   }
                                   if (gdt) (*gdt)[tok * d + di] += gdt_acc;
                                   if (gu) (*gu)[tok * d + di] += gu_acc + go * dkv[static_cast<size_t>(di)];
                                   if (gDk) (*gDk)[static_cast<size_t>(di)] += go * x;
                               }
                           }
                       }
                   });
}

Tensor selective_scan(const Tensor& x, const ScanParams& p) {
    if (x.rank() != 3) throw DimensionError("selective_scan: expected (N,L,D) input");
    require_finite_params(p);
    const int n = x.dim(0), l = x.dim(1), d = x.dim(2);
    const int s = p.a_log.dim(1);
    Tensor flat = reshape(x, {n * l, d});
    Tensor dt = reshape(softplus(linear(flat, p.w_dt, p.b_dt)), {n, l, d});
    Tensor bm = reshape(linear(flat, p.w_b), {n, l, s});
    Tensor cm = reshape(linear(flat, p.w_c), {n, l, s});
    Tensor a = neg(stcd::exp(p.a_log));
    return scan_core(x, dt, bm, cm, a, p.d_skip);
}

Tensor selective_scan_1d(const Tensor& x, const ScanParams& p) {
    if (x.rank() != 2) throw DimensionError("selective_scan_1d: expected (L,D) input");
    const int l = x.dim(0), d = x.dim(1);
    Tensor y = selective_scan(reshape(x, {1, l, d}), p);
    return reshape(y, {l, d});
}

Tensor cross_scan_2d(const Tensor& x, const std::array<ScanParams, 4>& dirs) {
    if (x.rank() != 4) throw DimensionError("cross_scan_2d: expected NCHW input");
    const int h = x.dim(2), w = x.dim(3);

    Tensor row = nchw_to_nlc(x);                      // row-major forward
    Tensor xt = transpose_hw(x);
    Tensor col = nchw_to_nlc(xt);                     // column-major forward

    Tensor y0 = nlc_to_nchw(selective_scan(row, dirs[0]), h, w);
    Tensor y1 = nlc_to_nchw(flip(selective_scan(flip(row, 1), dirs[1]), 1), h, w);
    Tensor y2 = transpose_hw(nlc_to_nchw(selective_scan(col, dirs[2]), w, h));
    Tensor y3 = transpose_hw(nlc_to_nchw(flip(selective_scan(flip(col, 1), dirs[3]), 1), w, h));
    return add(add(y0, y1), add(y2, y3));
}

Tensor vss_block(const Tensor& x, const VssBlockParams& p) {
    Tensor z = layer_norm(x, p.ln_gamma, p.ln_beta);
    Tensor e = silu(conv2d(conv2d(z, p.expand), p.dwconv));
    Tensor scanned = cross_scan_2d(e, p.scans);
    Tensor g = silu(conv2d(z, p.gate));
    Tensor y = conv2d(mul(scanned, g), p.out_proj);
    return add(x, y);
}

}  // namespace stcd
