#include "stcd/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace stcd {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (iterations < 0) throw ConfigError("train: iterations must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("train: betas must be in [0,1)");
    if (eps <= 0.0) throw ConfigError("train: eps must be positive");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (patch < 1) throw ConfigError("train: patch must be >= 1");
}

ModelConfig make_model_config(const TrainConfig& tc) {
    ModelConfig cfg = ModelConfig::preset(tc.preset);
    cfg.decoder.use_diff = tc.use_diff;
    cfg.decoder.use_chn = tc.use_chn;
    cfg.decoder.use_ecr = tc.use_ecr;
    cfg.validate();
    return cfg;
}

// ---- key=value text ----

std::map<std::string, std::string> decode_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        return s.substr(a, s.find_last_not_of(ws) - a + 1);
    };
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

std::string encode_kv(const std::map<std::string, std::string>& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> v;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) v.push_back(std::stoi(tok));
    return v;
}

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

const std::string& req(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config: missing key '" + key + "'");
    return it->second;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ConfigError("config: bad boolean '" + s + "'");
}

}  // namespace

std::map<std::string, std::string> to_kv(const ModelConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["enc.channels"] = join_ints(cfg.encoder.channels);
    kv["enc.depths"] = join_ints(cfg.encoder.depths);
    kv["enc.state_size"] = std::to_string(cfg.encoder.state_size);
    kv["enc.expand"] = std::to_string(cfg.encoder.expand);
    kv["dec.width"] = std::to_string(cfg.decoder.width);
    kv["dec.use_seq"] = cfg.decoder.use_seq ? "1" : "0";
    kv["dec.use_cross"] = cfg.decoder.use_cross ? "1" : "0";
    kv["dec.use_parallel"] = cfg.decoder.use_parallel ? "1" : "0";
    kv["dec.use_chn"] = cfg.decoder.use_chn ? "1" : "0";
    kv["dec.use_diff"] = cfg.decoder.use_diff ? "1" : "0";
    kv["dec.use_ecr"] = cfg.decoder.use_ecr ? "1" : "0";
    kv["dec.cbam_reduction"] = std::to_string(cfg.decoder.cbam_reduction);
    kv["dec.cbam_kernel"] = std::to_string(cfg.decoder.cbam_kernel);
    kv["dec.state_size"] = std::to_string(cfg.decoder.state_size);
    kv["dec.expand"] = std::to_string(cfg.decoder.expand);
    return kv;
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig cfg;
    cfg.encoder.channels = split_ints(req(kv, "enc.channels"));
    cfg.encoder.depths = split_ints(req(kv, "enc.depths"));
    cfg.encoder.state_size = std::stoi(req(kv, "enc.state_size"));
    cfg.encoder.expand = std::stoi(req(kv, "enc.expand"));
    cfg.decoder.width = std::stoi(req(kv, "dec.width"));
    cfg.decoder.use_seq = parse_bool(req(kv, "dec.use_seq"));
    cfg.decoder.use_cross = parse_bool(req(kv, "dec.use_cross"));
    cfg.decoder.use_parallel = parse_bool(req(kv, "dec.use_parallel"));
    cfg.decoder.use_chn = parse_bool(req(kv, "dec.use_chn"));
    cfg.decoder.use_diff = parse_bool(req(kv, "dec.use_diff"));
    cfg.decoder.use_ecr = parse_bool(req(kv, "dec.use_ecr"));
    cfg.decoder.cbam_reduction = std::stoi(req(kv, "dec.cbam_reduction"));
    cfg.decoder.cbam_kernel = std::stoi(req(kv, "dec.cbam_kernel"));
    cfg.decoder.state_size = std::stoi(req(kv, "dec.state_size"));
    cfg.decoder.expand = std::stoi(req(kv, "dec.expand"));
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> to_kv(const TrainConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["lr"] = fmt_double(cfg.lr);
    kv["weight_decay"] = fmt_double(cfg.weight_decay);
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["iterations"] = std::to_string(cfg.iterations);
    kv["beta1"] = fmt_double(cfg.beta1);
    kv["beta2"] = fmt_double(cfg.beta2);
    kv["eps"] = fmt_double(cfg.eps);
    kv["seed"] = std::to_string(cfg.seed);
    kv["loss.ce"] = fmt_double(cfg.loss.ce);
    kv["loss.lovasz"] = fmt_double(cfg.loss.lovasz);
    kv["loss.dice"] = fmt_double(cfg.loss.dice);
    kv["preset"] = cfg.preset;
    kv["use_diff"] = cfg.use_diff ? "1" : "0";
    kv["use_chn"] = cfg.use_chn ? "1" : "0";
    kv["use_ecr"] = cfg.use_ecr ? "1" : "0";
    kv["eval_every"] = std::to_string(cfg.eval_every);
    kv["target_f1"] = fmt_double(cfg.target_f1);
    kv["patch"] = std::to_string(cfg.patch);
    return kv;
}

TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv) {
    TrainConfig cfg;
    cfg.lr = std::stod(req(kv, "lr"));
    cfg.weight_decay = std::stod(req(kv, "weight_decay"));
    cfg.batch_size = std::stoi(req(kv, "batch_size"));
    cfg.iterations = std::stoi(req(kv, "iterations"));
    cfg.beta1 = std::stod(req(kv, "beta1"));
    cfg.beta2 = std::stod(req(kv, "beta2"));
    cfg.eps = std::stod(req(kv, "eps"));
    cfg.seed = std::stoull(req(kv, "seed"));
    cfg.loss.ce = std::stod(req(kv, "loss.ce"));
    cfg.loss.lovasz = std::stod(req(kv, "loss.lovasz"));
    cfg.loss.dice = std::stod(req(kv, "loss.dice"));
    cfg.preset = req(kv, "preset");
    cfg.use_diff = parse_bool(req(kv, "use_diff"));
    cfg.use_chn = parse_bool(req(kv, "use_chn"));
    cfg.use_ecr = parse_bool(req(kv, "use_ecr"));
    cfg.eval_every = std::stoi(req(kv, "eval_every"));
    cfg.target_f1 = std::stod(req(kv, "target_f1"));
    cfg.patch = std::stoi(req(kv, "patch"));
    cfg.validate();
    return cfg;
}

// ---- optimizer ----

void adamw_init(AdamWState& st, const ParamRegistry& reg) {
    st.m.clear();
    st.v.clear();
    st.step = 0;
    for (const auto& e : reg.entries()) {
        st.m.emplace_back(e.tensor.size(), 0.0);
        st.v.emplace_back(e.tensor.size(), 0.0);
    }
}

void adamw_step(ParamRegistry& reg, AdamWState& st, const TrainConfig& tc) {
    auto& entries = reg.entries();
    if (st.m.size() != entries.size() || st.v.size() != entries.size())
        throw DimensionError("adamw: state/registry entry count mismatch");
    ++st.step;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < entries.size(); ++i) {
        auto& p = entries[i].tensor.mutable_data();
        const auto& g = entries[i].tensor.node()->grad;
        if (!g.empty() && g.size() != p.size())
            throw DimensionError("adamw: gradient size mismatch for " + entries[i].name);
        if (st.m[i].size() != p.size())
            throw DimensionError("adamw: moment size mismatch for " + entries[i].name);
        auto& m = st.m[i];
        auto& v = st.v[i];
        const double decay = entries[i].decay ? tc.lr * tc.weight_decay : 0.0;
        for (size_t k = 0; k < p.size(); ++k) {
            const double gk = g.empty() ? 0.0 : g[k];
            m[k] = tc.beta1 * m[k] + (1.0 - tc.beta1) * gk;
            v[k] = tc.beta2 * v[k] + (1.0 - tc.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= tc.lr * mhat / (std::sqrt(vhat) + tc.eps);
            p[k] -= decay * p[k];
        }
    }
}

// ---- checkpointing ----

namespace {

constexpr char kMagic[4] = {'M', 'C', 'D', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kScalarWidth = 8;  // 64-bit values, required for exact resume

void put_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& os, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(os, bits);
}

void put_f64s(std::ostream& os, const std::vector<double>& xs) {
    for (double x : xs) put_f64(os, x);
}

uint32_t get_u32(std::istream& is) {
    uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint8_t b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

std::vector<double> get_f64s(std::istream& is, size_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = get_f64(is);
    return xs;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const TrainConfig& tc,
                     const AdamWState& opt, int64_t iteration) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    os.put(static_cast<char>(kScalarWidth));
    put_u64(os, static_cast<uint64_t>(iteration));
    put_u64(os, static_cast<uint64_t>(opt.step));

    auto model_kv = to_kv(model.config());
    auto train_kv = to_kv(tc);
    std::map<std::string, std::string> merged;
    for (const auto& [k, v] : model_kv) merged["model." + k] = v;
    for (const auto& [k, v] : train_kv) merged["train." + k] = v;
    const std::string cfg_text = encode_kv(merged);
    put_u32(os, static_cast<uint32_t>(cfg_text.size()));
    os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    const auto& entries = model.params().entries();
    put_u32(os, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        os.put(static_cast<char>(e.tensor.rank()));
        for (int ext : e.tensor.shape()) put_u32(os, static_cast<uint32_t>(ext));
        put_f64s(os, e.tensor.data());
    }

    const bool has_opt = !opt.m.empty();
    os.put(has_opt ? 1 : 0);
    if (has_opt) {
        if (opt.m.size() != entries.size())
            throw DimensionError("checkpoint: optimizer state does not match parameters");
        for (size_t i = 0; i < entries.size(); ++i) {
            put_f64s(os, opt.m[i]);
            put_f64s(os, opt.v[i]);
        }
    }
    if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path, Model* model_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: '" + path + "' is not an MCD1 file");
    const uint32_t version = get_u32(is);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    const int width = is.get();
    if (width != kScalarWidth)
        throw DataError("checkpoint: unsupported scalar width " + std::to_string(width));

    LoadedCheckpoint out;
    out.iteration = static_cast<int64_t>(get_u64(is));
    out.opt.step = static_cast<int64_t>(get_u64(is));

    const uint32_t cfg_len = get_u32(is);
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (!is) throw DataError("checkpoint: truncated config block");
    std::map<std::string, std::string> model_kv, train_kv;
    for (const auto& [k, v] : decode_kv(cfg_text)) {
        if (k.rfind("model.", 0) == 0) model_kv[k.substr(6)] = v;
        else if (k.rfind("train.", 0) == 0) train_kv[k.substr(6)] = v;
    }
    out.model_cfg = model_config_from_kv(model_kv);
    out.train_cfg = train_config_from_kv(train_kv);

    Model model = Model::build(out.model_cfg, 0);
    auto& entries = model.params().entries();
    const uint32_t count = get_u32(is);
    if (count != entries.size())
        throw DataError("checkpoint: parameter count mismatch (file " + std::to_string(count) +
                        ", model " + std::to_string(entries.size()) + ")");
    for (auto& e : entries) {
        const uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is || name != e.name)
            throw DataError("checkpoint: parameter name mismatch at '" + e.name + "'");
        const int rank = is.get();
        Shape sh(rank);
        for (int& ext : sh) ext = static_cast<int>(get_u32(is));
        if (sh != e.tensor.shape())
            throw DataError("checkpoint: shape mismatch for '" + e.name + "'");
        e.tensor.mutable_data() = get_f64s(is, static_cast<size_t>(e.tensor.size()));
    }

    const int has_opt = is.get();
    if (has_opt == 1) {
        out.opt.m.resize(entries.size());
        out.opt.v.resize(entries.size());
        for (size_t i = 0; i < entries.size(); ++i) {
            out.opt.m[i] = get_f64s(is, static_cast<size_t>(entries[i].tensor.size()));
            out.opt.v[i] = get_f64s(is, static_cast<size_t>(entries[i].tensor.size()));
        }
    }
    if (!is) throw DataError("checkpoint: truncated file");
    if (model_out) *model_out = std::move(model);
    return out;
}

// ---- loops ----

EvalResult evaluate(const Model& model, const std::vector<BiTemporalSample>& samples,
                    const std::string& render_dir) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    if (!render_dir.empty()) fs::create_directories(render_dir);
    EvalResult res;
    for (const auto& s : samples) {
        s.validate();
        const int h = s.height(), w = s.width();
        Tensor x1 = reshape(s.pre_image, {1, 3, h, w});
        Tensor x2 = reshape(s.post_image, {1, 3, h, w});
        std::vector<uint8_t> pred = predict_mask(model.forward(x1, x2));
        res.counts += confusion(pred, s.label);
        if (!render_dir.empty())
            write_pnm((fs::path(render_dir) / (s.name + "_cmap.ppm")).string(),
                      render_change_map(pred, s.label, h, w));
    }
    res.metrics = compute_metrics(res.counts);
    return res;
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t iter) {
    // splitmix64 over the pair, so resumed runs rejoin the sample stream
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (iter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

TrainResult train(Model& model, const TrainConfig& tc, const std::vector<BiTemporalSample>& train_set,
                  const std::vector<BiTemporalSample>& holdout, const std::string& out_dir,
                  AdamWState* state, int64_t start_iteration) {
    tc.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    if (!out_dir.empty()) fs::create_directories(out_dir);

    AdamWState local_state;
    AdamWState& opt = state ? *state : local_state;
    if (opt.m.empty()) adamw_init(opt, model.params());

    TrainResult res;
    for (int64_t iter = start_iteration; iter < tc.iterations; ++iter) {
        std::mt19937_64 rng(mix_seed(tc.seed, static_cast<uint64_t>(iter)));
        std::vector<size_t> batch_idx(tc.batch_size);
        std::vector<BiTemporalSample> crops;
        crops.reserve(tc.batch_size);
        for (int b = 0; b < tc.batch_size; ++b) {
            batch_idx[b] = rng() % train_set.size();
            crops.push_back(random_crop(train_set[batch_idx[b]], tc.patch, rng));
        }
        const int h = crops[0].height(), w = crops[0].width();
        std::vector<double> pre_d, post_d, lab_d;
        for (const auto& c : crops) {
            if (c.height() != h || c.width() != w)
                throw DataError("train: mixed sample sizes in one batch");
            pre_d.insert(pre_d.end(), c.pre_image.data().begin(), c.pre_image.data().end());
            post_d.insert(post_d.end(), c.post_image.data().begin(), c.post_image.data().end());
            for (uint8_t v : c.label) lab_d.push_back(v);
        }
        Tensor x1 = Tensor::from({tc.batch_size, 3, h, w}, std::move(pre_d));
        Tensor x2 = Tensor::from({tc.batch_size, 3, h, w}, std::move(post_d));
        Tensor y = Tensor::from({tc.batch_size, h, w}, std::move(lab_d));

        model.params().zero_grad();
        double loss_value;
        {
            Tape tape;
            Tensor loss = total_loss(model.forward(x1, x2), y, tc.loss);
            loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                std::string idx;
                for (size_t i : batch_idx) idx += (idx.empty() ? "" : ",") + std::to_string(i);
                throw DomainError("train: non-finite loss at iteration " + std::to_string(iter) +
                                  ", batch indices [" + idx + "]");
            }
            tape.backward(loss);
        }
        adamw_step(model.params(), opt, tc);
        res.loss_history.push_back(loss_value);
        res.iterations_run = iter + 1;

        const bool last = iter + 1 == tc.iterations;
        if (!holdout.empty() && ((iter + 1) % tc.eval_every == 0 || last)) {
            const double f1 = evaluate(model, holdout).metrics.f1;
            res.eval_history.emplace_back(iter + 1, f1);
            if (f1 > res.best_f1 || res.best_iteration < 0) {
                res.best_f1 = f1;
                res.best_iteration = iter + 1;
                if (!out_dir.empty())
                    save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), model, tc, opt, iter + 1);
            }
            if (tc.target_f1 > 0.0 && f1 >= tc.target_f1) {
                res.iterations_run = iter + 1;
                break;
            }
        }
    }
    if (!out_dir.empty())
        save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), model, tc, opt, res.iterations_run);
    return res;
}

// ---- ablation ----

std::vector<AblationRow> ablation_matrix(const TrainConfig& base) {
    std::vector<AblationRow> rows;
    auto add = [&rows](std::string name, bool diff, bool chn, bool dice, bool ecr) {
        AblationRow r;
        r.name = std::move(name);
        r.use_diff = diff;
        r.use_chn = chn;
        r.use_dice = dice;
        r.use_ecr = ecr;
        rows.push_back(r);
    };
    add("no_diff", false, true, true, true);
    add("no_chn", true, false, true, true);
    add("no_dice", true, true, false, true);
    add("no_ecr", true, true, true, false);
    add("full", true, true, true, true);
    (void)base;
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string csv = "name,diff,chn,dice,ecr,concat_width,params," + metrics_csv_header() + "\n";
    for (const auto& r : rows) {
        csv += r.name + "," + (r.use_diff ? "1" : "0") + "," + (r.use_chn ? "1" : "0") + "," +
               (r.use_dice ? "1" : "0") + "," + (r.use_ecr ? "1" : "0") + "," +
               std::to_string(r.concat_width) + "," + std::to_string(r.param_count) + "," +
               metrics_csv_row(r.metrics) + "\n";
    }
    return csv;
}

std::vector<AblationRow> ablate(const TrainConfig& base,
                                const std::vector<BiTemporalSample>& train_set,
                                const std::vector<BiTemporalSample>& holdout,
                                const std::string& csv_path) {
    std::vector<AblationRow> rows = ablation_matrix(base);
    for (auto& row : rows) {
        TrainConfig tc = base;
        tc.use_diff = row.use_diff;
        tc.use_chn = row.use_chn;
        tc.use_ecr = row.use_ecr;
        if (!row.use_dice) tc.loss.dice = 0.0;
        ModelConfig mc = make_model_config(tc);
        row.concat_width = mc.decoder.concat_width();
        Model model = Model::build(mc, tc.seed);
        row.param_count = model.params().total_params();
        train(model, tc, train_set, holdout);
        row.metrics = evaluate(model, holdout).metrics;
    }
    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!f) throw DataError("ablate: cannot open '" + csv_path + "'");
        f << ablation_csv(rows);
    }
    return rows;
}

}  // namespace stcd
