#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stcd/fusion.hpp"
#include "stcd/nn.hpp"
#include "stcd/ssm.hpp"

namespace stcd {

struct EncoderConfig {
    std::vector<int> channels = {128, 256, 512, 1024};
    std::vector<int> depths = {2, 2, 15, 2};
    int state_size = 16;
    int expand = 2;

    int stages() const { return static_cast<int>(channels.size()); }
    // input extents must divide this (stride-4 stem, stride-2 per later stage)
    int spatial_divisor() const { return 4 << (stages() - 1); }
    void validate() const;
};

struct DecoderConfig {
    int width = 128;
    bool use_seq = true;
    bool use_cross = true;
    bool use_parallel = true;
    bool use_chn = true;
    bool use_diff = true;
    bool use_ecr = true;
    int cbam_reduction = 16;
    int cbam_kernel = 7;
    int state_size = 16;
    int expand = 2;

    std::vector<FusionKind> enabled() const;
    int concat_width() const { return width * static_cast<int>(enabled().size()); }
    void validate() const;
};

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;

    // "tiny", "small", "base"
    static ModelConfig preset(const std::string& name);
    void validate() const;
};

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool decay;  // excluded for biases and normalization gains
};

class ParamRegistry {
public:
    Tensor add(std::string name, Tensor t, bool decay);
    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }
    int64_t total_params() const;
    int64_t total_params_with_prefix(const std::string& prefix) const;
    Tensor find(const std::string& name) const;
    bool contains(const std::string& name) const;
    // Copies values for every name+shape match; returns the number copied.
    int copy_matching_from(const ParamRegistry& other);
    void zero_grad();

private:
    std::vector<ParamEntry> entries_;
};

using FeaturePyramid = std::vector<Tensor>;

struct EncoderStageParams {
    Conv2d down;  // stem for stage 0, stride-2 downsample otherwise
    std::vector<VssBlockParams> blocks;
};

struct EncoderParams {
    std::vector<EncoderStageParams> stages;
};

struct StssBranchParams {
    FusionKind kind;
    DsConv proj;  // depthwise stage absent when ECR is disabled
    VssBlockParams vss;
};

struct StssStageParams {
    std::vector<StssBranchParams> branches;
    CbamParams cbam;  // only populated when ECR is enabled
    Conv2d reduce;    // concat width -> decoder width
};

struct DecoderParams {
    std::vector<StssStageParams> stages;
    Conv2d head;  // width -> 2 classes
};

class Model {
public:
    static Model build(const ModelConfig& cfg, uint64_t seed);

    // Shared-weight Siamese encoding of one frame.
    FeaturePyramid encode(const Tensor& x) const;
    std::pair<FeaturePyramid, FeaturePyramid> encode_pair(const Tensor& x1, const Tensor& x2) const;
    // Per-stage fused feature (N, width, H_i, W_i).
    Tensor stss_stage(int stage, const Tensor& f1, const Tensor& f2) const;
    // One mechanism's branch output before concatenation (isolation tests).
    Tensor stss_branch(int stage, FusionKind kind, const Tensor& f1, const Tensor& f2) const;
    Tensor decode(const FeaturePyramid& p1, const FeaturePyramid& p2) const;
    // Full pass: (N,3,H,W) x2 -> logits (N,2,H,W).
    Tensor forward(const Tensor& x1, const Tensor& x2) const;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }

private:
    ModelConfig cfg_;
    ParamRegistry reg_;
    EncoderParams enc_;
    DecoderParams dec_;
};

// Per-pixel argmax over the 2 class channels; ties resolve to no-change.
// Returns (N*H*W) bytes in 0/1, row-major per batch item.
std::vector<uint8_t> predict_mask(const Tensor& logits);

}  // namespace stcd
