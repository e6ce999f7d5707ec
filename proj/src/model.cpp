#include "stcd/model.hpp"

#include <cmath>

namespace stcd {

void EncoderConfig::validate() const {
    if (channels.empty() || channels.size() != depths.size())
        throw ConfigError("encoder: channels and depths must be non-empty and equal length");
    for (size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] <= 0 || depths[i] <= 0) throw ConfigError("encoder: channels/depths must be positive");
        if (i > 0 && channels[i] < channels[i - 1]) throw ConfigError("encoder: channels must be nondecreasing");
    }
    if (state_size <= 0 || expand <= 0) throw ConfigError("encoder: state_size/expand must be positive");
}

std::vector<FusionKind> DecoderConfig::enabled() const {
    std::vector<FusionKind> out;
    if (use_seq) out.push_back(FusionKind::Sequential);
    if (use_cross) out.push_back(FusionKind::Cross);
    if (use_parallel) out.push_back(FusionKind::Parallel);
    if (use_chn) out.push_back(FusionKind::ChannelCross);
    if (use_diff) out.push_back(FusionKind::Difference);
    return out;
}

void DecoderConfig::validate() const {
    if (enabled().empty()) throw ConfigError("decoder: at least one fusion mechanism must be enabled");
    if (width <= 0) throw ConfigError("decoder: width must be positive");
    if (cbam_reduction <= 0 || width % cbam_reduction != 0)
        throw ConfigError("decoder: cbam_reduction must divide the concat width");
    if (cbam_kernel % 2 != 1) throw ConfigError("decoder: cbam_kernel must be odd");
}

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
}

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "tiny") {
        cfg.encoder.channels = {16, 32, 64, 128};
        cfg.encoder.depths = {1, 1, 2, 1};
        cfg.encoder.state_size = 8;
        cfg.decoder.width = 32;
        cfg.decoder.state_size = 8;
        cfg.decoder.cbam_reduction = 4;
        cfg.decoder.cbam_kernel = 3;
    } else if (name == "small") {
        cfg.encoder.channels = {32, 64, 128, 256};
        cfg.encoder.depths = {2, 2, 4, 2};
        cfg.decoder.width = 64;
        cfg.decoder.cbam_reduction = 8;
        cfg.decoder.cbam_kernel = 3;
    } else if (name == "base") {
        // paper-scale widths; C3 = 512 (the stated 526 is overridable)
        cfg.encoder.channels = {128, 256, 512, 1024};
        cfg.encoder.depths = {2, 2, 15, 2};
        cfg.decoder.width = 128;
    } else {
        throw ConfigError("unknown model preset '" + name + "'");
    }
    return cfg;
}

Tensor ParamRegistry::add(std::string name, Tensor t, bool decay) {
    for (const auto& e : entries_)
        if (e.name == name) throw ConfigError("duplicate parameter name " + name);
    entries_.push_back({std::move(name), t, decay});
    return t;
}

int64_t ParamRegistry::total_params() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

int64_t ParamRegistry::total_params_with_prefix(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& e : entries_)
        if (e.name.rfind(prefix, 0) == 0) n += e.tensor.size();
    return n;
}

Tensor ParamRegistry::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw ConfigError("no parameter named " + name);
}

bool ParamRegistry::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

int ParamRegistry::copy_matching_from(const ParamRegistry& other) {
    int copied = 0;
    for (auto& e : entries_)
        for (const auto& o : other.entries())
            if (o.name == e.name && o.tensor.shape() == e.tensor.shape()) {
                e.tensor.mutable_data() = o.tensor.data();
                ++copied;
                break;
            }
    return copied;
}

void ParamRegistry::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

namespace {

// Builds parameters in a fixed order from one seeded stream.
struct Builder {
    ParamRegistry& reg;
    std::mt19937_64 rng;

    Tensor uniform(const std::string& name, Shape shape, double bound, bool decay) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> data(static_cast<size_t>(numel(shape)));
        for (auto& v : data) v = dist(rng);
        return reg.add(name, Tensor::from(std::move(shape), std::move(data), true), decay);
    }

    Tensor constant(const std::string& name, Shape shape, double value, bool decay) {
        return reg.add(name, Tensor::full(std::move(shape), value, true), decay);
    }

    Conv2d conv(const std::string& name, int cout, int cin, int k, int stride, int pad, int groups,
                bool bias) {
        Conv2d c;
        const double bound = std::sqrt(6.0 / (static_cast<double>(cin / groups) * k * k));
        c.weight = uniform(name + ".w", {cout, cin / groups, k, k}, bound, true);
        if (bias) c.bias = constant(name + ".b", {cout}, 0.0, false);
        c.stride = stride;
        c.pad = pad;
        c.groups = groups;
        return c;
    }

    ScanParams scan(const std::string& name, int d, int s) {
        ScanParams p;
        std::vector<double> alog(static_cast<size_t>(d) * s);
        for (int di = 0; di < d; ++di)
            for (int si = 0; si < s; ++si) alog[static_cast<size_t>(di) * s + si] = std::log(1.0 + si);
        p.a_log = reg.add(name + ".a_log", Tensor::from({d, s}, std::move(alog), true), false);
        p.d_skip = constant(name + ".d_skip", {d}, 1.0, false);
        const double bound = std::sqrt(6.0 / d);
        p.w_dt = uniform(name + ".w_dt", {d, d}, bound, true);
        // softplus(b_dt) lands in [0.01, 0.1] at init
        std::uniform_real_distribution<double> dtd(0.01, 0.1);
        std::vector<double> bdt(static_cast<size_t>(d));
        for (auto& v : bdt) {
            const double u = dtd(rng);
            v = u + std::log1p(-std::exp(-u));  // inverse softplus
        }
        p.b_dt = reg.add(name + ".b_dt", Tensor::from({d}, std::move(bdt), true), false);
        p.w_b = uniform(name + ".w_b", {s, d}, bound, true);
        p.w_c = uniform(name + ".w_c", {s, d}, bound, true);
        return p;
    }

    VssBlockParams vss(const std::string& name, int c, int expand_factor, int s) {
        const int e = c * expand_factor;
        VssBlockParams p;
        p.ln_gamma = constant(name + ".ln.gamma", {c}, 1.0, false);
        p.ln_beta = constant(name + ".ln.beta", {c}, 0.0, false);
        p.expand = conv(name + ".expand", e, c, 1, 1, 0, 1, true);
        p.gate = conv(name + ".gate", e, c, 1, 1, 0, 1, true);
        p.dwconv = conv(name + ".dwconv", e, e, 3, 1, 1, e, true);
        for (int i = 0; i < 4; ++i) p.scans[static_cast<size_t>(i)] = scan(name + ".scan" + std::to_string(i), e, s);
        p.out_proj = conv(name + ".out", c, e, 1, 1, 0, 1, true);
        return p;
    }
};

}  // namespace

Model Model::build(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    Builder b{m.reg_, std::mt19937_64(seed)};

    const auto& ec = cfg.encoder;
    for (int i = 0; i < ec.stages(); ++i) {
        EncoderStageParams sp;
        const std::string prefix = "enc.s" + std::to_string(i);
        if (i == 0) {
            sp.down = b.conv(prefix + ".stem", ec.channels[0], 3, 4, 4, 0, 1, true);
        } else {
            sp.down = b.conv(prefix + ".down", ec.channels[static_cast<size_t>(i)],
                             ec.channels[static_cast<size_t>(i) - 1], 2, 2, 0, 1, true);
        }
        for (int j = 0; j < ec.depths[static_cast<size_t>(i)]; ++j)
            sp.blocks.push_back(b.vss(prefix + ".b" + std::to_string(j), ec.channels[static_cast<size_t>(i)],
                                      ec.expand, ec.state_size));
        m.enc_.stages.push_back(std::move(sp));
    }

    const auto& dc = cfg.decoder;
    const auto mechanisms = dc.enabled();
    for (int i = 0; i < ec.stages(); ++i) {
        StssStageParams sp;
        const std::string prefix = "dec.s" + std::to_string(i);
        const int cin = ec.channels[static_cast<size_t>(i)];
        for (FusionKind k : mechanisms) {
            StssBranchParams br;
            br.kind = k;
            const int fused = fused_channels(k, cin);
            const std::string bp = prefix + "." + fusion_name(k);
            if (dc.use_ecr) {
                br.proj.depthwise = b.conv(bp + ".dw", fused, fused, 3, 1, 1, fused, false);
                br.proj.pointwise = b.conv(bp + ".pw", dc.width, fused, 1, 1, 0, 1, true);
            } else {
                br.proj.pointwise = b.conv(bp + ".pw", dc.width, fused, 1, 1, 0, 1, true);
            }
            br.vss = b.vss(bp + ".vss", dc.width, dc.expand, dc.state_size);
            sp.branches.push_back(std::move(br));
        }
        const int cw = dc.concat_width();
        if (dc.use_ecr) {
            sp.cbam.reduction = dc.cbam_reduction;
            sp.cbam.mlp_w1 = b.uniform(prefix + ".cbam.mlp_w1", {cw / dc.cbam_reduction, cw},
                                       std::sqrt(6.0 / cw), true);
            sp.cbam.mlp_w2 = b.uniform(prefix + ".cbam.mlp_w2", {cw, cw / dc.cbam_reduction},
                                       std::sqrt(6.0 * dc.cbam_reduction / cw), true);
            sp.cbam.spatial.weight = b.uniform(prefix + ".cbam.spatial.w", {1, 2, dc.cbam_kernel, dc.cbam_kernel},
                                               std::sqrt(6.0 / (2.0 * dc.cbam_kernel * dc.cbam_kernel)), true);
            sp.cbam.spatial.pad = (dc.cbam_kernel - 1) / 2;
        }
        sp.reduce = b.conv(prefix + ".reduce", dc.width, cw, 1, 1, 0, 1, true);
        m.dec_.stages.push_back(std::move(sp));
    }
    // zero-init head: training starts from uniform logits, which keeps the
    // initial composite loss near ln 2 instead of the raw activation scale
    m.dec_.head = b.conv("dec.head", 2, dc.width, 1, 1, 0, 1, true);
    for (auto& v : m.dec_.head.weight.mutable_data()) v = 0.0;
    return m;
}

FeaturePyramid Model::encode(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != 3) throw DimensionError("encode: expected (N,3,H,W) input");
    const int div = cfg_.encoder.spatial_divisor();
    if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
        throw DimensionError("encode: spatial extents must divide " + std::to_string(div));
    FeaturePyramid pyr;
    Tensor cur = x;
    for (const auto& stage : enc_.stages) {
        cur = conv2d(cur, stage.down);
        for (const auto& blk : stage.blocks) cur = vss_block(cur, blk);
        pyr.push_back(cur);
    }
    return pyr;
}

std::pair<FeaturePyramid, FeaturePyramid> Model::encode_pair(const Tensor& x1, const Tensor& x2) const {
    if (x1.shape() != x2.shape()) throw DimensionError("encode_pair: frame shapes differ");
    return {encode(x1), encode(x2)};
}

Tensor Model::stss_branch(int stage, FusionKind kind, const Tensor& f1, const Tensor& f2) const {
    const auto& sp = dec_.stages.at(static_cast<size_t>(stage));
    for (const auto& br : sp.branches) {
        if (br.kind != kind) continue;
        Tensor v = vss_block(dsconv(fuse(kind, f1, f2), br.proj), br.vss);
        return doubles_width(kind) ? fold_back(v, kind) : v;
    }
    throw ConfigError("stss_branch: mechanism not enabled");
}

Tensor Model::stss_stage(int stage, const Tensor& f1, const Tensor& f2) const {
    if (f1.shape() != f2.shape()) throw DimensionError("stss_stage: feature shapes differ");
    const auto& sp = dec_.stages.at(static_cast<size_t>(stage));
    if (sp.branches.empty()) throw ConfigError("stss_stage: no fusion mechanism enabled");
    std::vector<Tensor> outs;
    for (const auto& br : sp.branches) outs.push_back(stss_branch(stage, br.kind, f1, f2));
    Tensor p = outs.size() == 1 ? outs[0] : concat(outs, 1);
    if (cfg_.decoder.use_ecr) p = cbam(p, sp.cbam);
    return conv2d(p, sp.reduce);
}

Tensor Model::decode(const FeaturePyramid& p1, const FeaturePyramid& p2) const {
    if (p1.size() != dec_.stages.size() || p2.size() != p1.size())
        throw DimensionError("decode: pyramid depth mismatch");
    Tensor out;
    for (int i = static_cast<int>(dec_.stages.size()) - 1; i >= 0; --i) {
        Tensor cur = stss_stage(i, p1[static_cast<size_t>(i)], p2[static_cast<size_t>(i)]);
        out = out.defined() ? add(cur, upsample_nearest2x(out)) : cur;
    }
    return upsample_bilinear(conv2d(out, dec_.head), 4);
}

Tensor Model::forward(const Tensor& x1, const Tensor& x2) const {
    auto [p1, p2] = encode_pair(x1, x2);
    return decode(p1, p2);
}

std::vector<uint8_t> predict_mask(const Tensor& logits) {
    if (logits.rank() != 4 || logits.dim(1) != 2) throw DimensionError("predict_mask: expected (N,2,H,W) logits");
    const int n = logits.dim(0);
    const int64_t hw = static_cast<int64_t>(logits.dim(2)) * logits.dim(3);
    std::vector<uint8_t> mask(static_cast<size_t>(n) * hw);
    const auto& v = logits.data();
    for (int b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            const double c0 = v[(static_cast<size_t>(b) * 2) * hw + i];
            const double c1 = v[(static_cast<size_t>(b) * 2 + 1) * hw + i];
            mask[static_cast<size_t>(b) * hw + i] = c1 > c0 ? 1 : 0;  // tie -> no change
        }
    return mask;
}

}  // namespace stcd
