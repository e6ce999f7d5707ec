#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stcd/data.hpp"
#include "stcd/loss.hpp"
#include "stcd/metrics.hpp"
#include "stcd/model.hpp"

namespace stcd {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 5e-3;
    int batch_size = 4;
    int iterations = 2000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    LossWeights loss;
    std::string preset = "tiny";
    bool use_diff = true;
    bool use_chn = true;
    bool use_ecr = true;
    int eval_every = 200;
    double target_f1 = -1.0;  // early stop once holdout F1 reaches this, if > 0
    int patch = 256;          // training crop, clamped to the image extent

    void validate() const;
};

// Preset expanded and toggles applied (no-dice only affects the loss weights).
ModelConfig make_model_config(const TrainConfig& tc);

// ---- flat `key = value` text config ----
std::map<std::string, std::string> decode_kv(const std::string& text);
std::string encode_kv(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> to_kv(const ModelConfig& cfg);
std::map<std::string, std::string> to_kv(const TrainConfig& cfg);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);
TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv);

// ---- optimizer ----
struct AdamWState {
    std::vector<std::vector<double>> m, v;  // one pair per registry entry
    int64_t step = 0;
};

void adamw_init(AdamWState& st, const ParamRegistry& reg);
// Decoupled decay applied only to decay-flagged parameters; missing gradients
// count as zero.
void adamw_step(ParamRegistry& reg, AdamWState& st, const TrainConfig& tc);

// ---- checkpointing ----
struct LoadedCheckpoint {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    AdamWState opt;
    int64_t iteration = 0;
};

void save_checkpoint(const std::string& path, const Model& model, const TrainConfig& tc,
                     const AdamWState& opt, int64_t iteration);
// Rebuilds the model from the stored config and restores every parameter.
LoadedCheckpoint load_checkpoint(const std::string& path, Model* model_out);

// ---- loops ----
struct EvalResult {
    ConfusionCounts counts;
    Metrics metrics;
};

EvalResult evaluate(const Model& model, const std::vector<BiTemporalSample>& samples,
                    const std::string& render_dir = "");

struct TrainResult {
    std::vector<double> loss_history;
    std::vector<std::pair<int64_t, double>> eval_history;  // (iteration, holdout F1)
    double best_f1 = 0.0;
    int64_t best_iteration = -1;
    int64_t iterations_run = 0;
};

// Deterministic given tc.seed; per-iteration RNG derived from (seed, iter) so
// a resumed run continues the exact sample stream. Writes best.ckpt/last.ckpt
// under out_dir when non-empty.
TrainResult train(Model& model, const TrainConfig& tc, const std::vector<BiTemporalSample>& train_set,
                  const std::vector<BiTemporalSample>& holdout, const std::string& out_dir = "",
                  AdamWState* state = nullptr, int64_t start_iteration = 0);

// ---- ablation ----
struct AblationRow {
    std::string name;
    bool use_diff, use_chn, use_dice, use_ecr;
    int concat_width = 0;
    int64_t param_count = 0;
    Metrics metrics;
};

// Five-row toggle matrix: drop diff / drop chn / drop dice / drop ecr / full.
std::vector<AblationRow> ablation_matrix(const TrainConfig& base);
std::vector<AblationRow> ablate(const TrainConfig& base,
                                const std::vector<BiTemporalSample>& train_set,
                                const std::vector<BiTemporalSample>& holdout,
                                const std::string& csv_path);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace stcd
