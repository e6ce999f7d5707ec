#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stcd/tensor.hpp"

namespace stcd {

struct BiTemporalSample {
    Tensor pre_image;            // (3, H, W) in [0, 1]
    Tensor post_image;           // (3, H, W) in [0, 1]
    std::vector<uint8_t> label;  // H*W, row-major, 0/1
    std::string name;

    int height() const { return pre_image.dim(1); }
    int width() const { return pre_image.dim(2); }
    void validate() const;
};

struct SynthConfig {
    int size = 64;
    int min_shapes = 2;
    int max_shapes = 6;
    double p_add = 0.45;
    double p_remove = 0.35;
    double p_alter = 0.2;
    double noise = 0.02;
    double illumination = 0.05;
    uint64_t seed = 0;

    void validate() const;
};

std::vector<BiTemporalSample> generate_synthetic(const SynthConfig& cfg, int n);

// ---- binary PNM (P5 grayscale / P6 RGB, 8-bit) ----
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;             // 1 or 3
    std::vector<uint8_t> pixels;  // interleaved, row-major
};

void write_pnm(const std::string& path, const ImageU8& img);
ImageU8 read_pnm(const std::string& path);

// (C,H,W) in [0,1] <-> 8-bit image, values scaled by 255 and rounded
ImageU8 to_u8(const Tensor& chw);
Tensor to_tensor(const ImageU8& img);

// root/{A,B,label}/<name>.<ext>; files matched by stem across the three
// directories, labels binarized at 128. Missing counterparts are skipped with
// a warning pushed to `warnings` when given; size mismatch throws DataError.
std::vector<BiTemporalSample> load_dataset(const std::string& root,
                                           std::vector<std::string>* warnings = nullptr);

// Writes samples in the load_dataset layout (PPM images, PGM labels).
void export_dataset(const std::string& root, const std::vector<BiTemporalSample>& samples);

// Fixed non-overlapping grid; trailing remainder smaller than `patch` is
// dropped. Evaluation uses full images, so this is the training-grid view.
std::vector<BiTemporalSample> tile(const BiTemporalSample& s, int patch);

// Seeded random crop; patch is clamped to the image extent.
BiTemporalSample random_crop(const BiTemporalSample& s, int patch, std::mt19937_64& rng);

// TP white, TN black, FP red, FN green.
ImageU8 render_change_map(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth,
                          int height, int width);

}  // namespace stcd
