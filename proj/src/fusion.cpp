#include "stcd/fusion.hpp"

namespace stcd {

const char* fusion_name(FusionKind k) {
    switch (k) {
        case FusionKind::Sequential: return "seq";
        case FusionKind::Cross: return "crs";
        case FusionKind::Parallel: return "pra";
        case FusionKind::ChannelCross: return "chn";
        case FusionKind::Difference: return "diff";
    }
    return "?";
}

namespace {
void require_pair(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": expected equal NCHW shapes, got " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor fuse_sequential(const Tensor& f1, const Tensor& f2) {
    require_pair("fuse_sequential", f1, f2);
    return concat({f1, f2}, 3);
}

Tensor fuse_cross(const Tensor& f1, const Tensor& f2) {
    require_pair("fuse_cross", f1, f2);
    return interleave(f1, f2, 3);
}

Tensor fuse_parallel(const Tensor& f1, const Tensor& f2) {
    require_pair("fuse_parallel", f1, f2);
    return concat({f1, f2}, 1);
}

Tensor fuse_channel_cross(const Tensor& f1, const Tensor& f2) {
    require_pair("fuse_channel_cross", f1, f2);
    return interleave(f1, f2, 1);
}

Tensor fuse_difference(const Tensor& f1, const Tensor& f2) {
    require_pair("fuse_difference", f1, f2);
    return abs(sub(f2, f1));
}

Tensor fuse(FusionKind kind, const Tensor& f1, const Tensor& f2) {
    switch (kind) {
        case FusionKind::Sequential: return fuse_sequential(f1, f2);
        case FusionKind::Cross: return fuse_cross(f1, f2);
        case FusionKind::Parallel: return fuse_parallel(f1, f2);
        case FusionKind::ChannelCross: return fuse_channel_cross(f1, f2);
        case FusionKind::Difference: return fuse_difference(f1, f2);
    }
    throw ConfigError("fuse: unknown mechanism");
}

Tensor fold_back(const Tensor& y, FusionKind kind) {
    if (y.rank() != 4) throw DimensionError("fold_back: expected NCHW input");
    const int w2 = y.dim(3);
    if (w2 % 2 != 0) throw DimensionError("fold_back: odd width");
    const int w = w2 / 2;
    if (kind == FusionKind::Sequential) return add(slice(y, 3, 0, w), slice(y, 3, w, w));
    if (kind == FusionKind::Cross) {
        auto [a, b] = deinterleave(y, 3);
        return add(a, b);
    }
    throw ConfigError("fold_back: only sequential/cross layouts fold");
}

int fused_channels(FusionKind kind, int c) {
    return (kind == FusionKind::Parallel || kind == FusionKind::ChannelCross) ? 2 * c : c;
}

bool doubles_width(FusionKind kind) {
    return kind == FusionKind::Sequential || kind == FusionKind::Cross;
}

}  // namespace stcd
