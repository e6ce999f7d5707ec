#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stcd/gradcheck.hpp"
#include "stcd/runner.hpp"
#include "stcd/ssm.hpp"

namespace fs = std::filesystem;
using namespace stcd;

namespace {

void apply_config_file(TrainConfig& tc, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    for (const auto& [k, v] : decode_kv(ss.str())) {
        if (k == "lr") tc.lr = std::stod(v);
        else if (k == "weight_decay") tc.weight_decay = std::stod(v);
        else if (k == "batch_size") tc.batch_size = std::stoi(v);
        else if (k == "iterations") tc.iterations = std::stoi(v);
        else if (k == "beta1") tc.beta1 = std::stod(v);
        else if (k == "beta2") tc.beta2 = std::stod(v);
        else if (k == "eps") tc.eps = std::stod(v);
        else if (k == "seed") tc.seed = std::stoull(v);
        else if (k == "loss.ce") tc.loss.ce = std::stod(v);
        else if (k == "loss.lovasz") tc.loss.lovasz = std::stod(v);
        else if (k == "loss.dice") tc.loss.dice = std::stod(v);
        else if (k == "preset") tc.preset = v;
        else if (k == "use_diff") tc.use_diff = v == "1" || v == "true";
        else if (k == "use_chn") tc.use_chn = v == "1" || v == "true";
        else if (k == "use_ecr") tc.use_ecr = v == "1" || v == "true";
        else if (k == "eval_every") tc.eval_every = std::stoi(v);
        else if (k == "target_f1") tc.target_f1 = std::stod(v);
        else if (k == "patch") tc.patch = std::stoi(v);
        else throw ConfigError("config file: unknown key '" + k + "'");
    }
}

void parse_loss_weights(TrainConfig& tc, const std::string& s) {
    std::istringstream is(s);
    std::string tok;
    std::vector<double> w;
    while (std::getline(is, tok, ',')) w.push_back(std::stod(tok));
    if (w.size() != 3) throw ConfigError("--loss-weights expects three comma-separated values");
    tc.loss = {w[0], w[1], w[2]};
}

// Last ~1/8 of the dataset (at least one sample) held out for evaluation.
std::pair<std::vector<BiTemporalSample>, std::vector<BiTemporalSample>> split_holdout(
    std::vector<BiTemporalSample> all) {
    if (all.size() < 2) throw DataError("need at least 2 samples to split a holdout set");
    const size_t n_hold = std::max<size_t>(1, all.size() / 8);
    std::vector<BiTemporalSample> hold(all.end() - static_cast<long>(n_hold), all.end());
    all.resize(all.size() - n_hold);
    return {std::move(all), std::move(hold)};
}

void print_metrics(const Metrics& m, const ConfusionCounts& c) {
    std::printf("tp=%lld fp=%lld fn=%lld tn=%lld\n", static_cast<long long>(c.tp),
                static_cast<long long>(c.fp), static_cast<long long>(c.fn),
                static_cast<long long>(c.tn));
    std::printf("precision %.4f  recall %.4f  f1 %.4f  iou %.4f  oa %.4f  kappa %.4f%s\n",
                m.precision, m.recall, m.f1, m.iou, m.oa, m.kappa,
                m.degenerate ? "  (degenerate ratios reported as 0)" : "");
    std::printf("csv: %s\n     %s\n", metrics_csv_header().c_str(), metrics_csv_row(m).c_str());
}

int run_gradcheck(const std::string& module) {
    bool all_ok = true;
    auto report = [&all_ok](const std::string& name, const GradCheckReport& r) {
        std::printf("%-24s %s  max_rel_err=%.3e  checked=%lld skipped=%lld\n", name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.max_rel_err, static_cast<long long>(r.checked),
                    static_cast<long long>(r.skipped));
        if (!r.pass) all_ok = false;
    };
    GradCheckOptions opt;
    if (module == "all" || module == "tensor") {
        report("tensor.elementwise", grad_check(
                                         [](const Tensor& x) {
                                             return sum(mul(sigmoid(x), add(silu(x), exp(mul(x, 0.3)))));
                                         },
                                         random_uniform({3, 4}, 1, -2, 2, true), opt));
        report("tensor.matmul", grad_check(
                                    [](const Tensor& x) {
                                        Tensor w = random_uniform({4, 3}, 2);
                                        return sum(pow(matmul(x, w), 2.0));
                                    },
                                    random_uniform({2, 4}, 3, -1, 1, true), opt));
    }
    if (module == "all" || module == "ssm") {
        ScanParams p;
        const int d = 3, s = 2;
        p.a_log = random_uniform({d, s}, 11, -1, 0.5);
        p.d_skip = random_uniform({d}, 12, 0.5, 1.5);
        p.w_dt = random_uniform({d, d}, 13, -0.5, 0.5);
        p.b_dt = random_uniform({d}, 14, -2, -1);
        p.w_b = random_uniform({s, d}, 15, -0.5, 0.5);
        p.w_c = random_uniform({s, d}, 16, -0.5, 0.5);
        report("ssm.selective_scan", grad_check(
                                         [&p](const Tensor& x) { return sum(pow(selective_scan(x, p), 2.0)); },
                                         random_uniform({1, 5, 3}, 17, -1, 1, true), opt));
    }
    if (module == "all" || module == "loss") {
        Tensor y = Tensor::from({1, 3, 3}, {1, 0, 0, 1, 1, 0, 0, 0, 1});
        report("loss.total", grad_check(
                                 [&y](const Tensor& x) { return total_loss(x, y, LossWeights{}); },
                                 random_uniform({1, 2, 3, 3}, 21, -1.5, 1.5, true), opt));
    }
    if (module == "all" || module == "model") {
        ModelConfig cfg;
        cfg.encoder.channels = {4, 8, 8};
        cfg.encoder.depths = {1, 1, 1};
        cfg.encoder.state_size = 2;
        cfg.decoder.width = 8;
        cfg.decoder.cbam_reduction = 4;
        cfg.decoder.cbam_kernel = 3;
        cfg.decoder.state_size = 2;
        Model model = Model::build(cfg, 31);
        {
            // the head starts at zero for training; randomize so the check
            // exercises the whole graph
            Tensor hw = model.params().find("dec.head.w");
            Tensor rnd = random_uniform(hw.shape(), 34, -0.5, 0.5);
            hw.mutable_data() = rnd.data();
        }
        Tensor x2 = random_uniform({1, 3, 16, 16}, 33);
        GradCheckOptions mopt;
        mopt.rtol = 1e-3;
        mopt.max_coords = 12;
        mopt.seed = 5;
        report("model.full", grad_check(
                                 [&model, &x2](const Tensor& x1) {
                                     return sum(pow(model.forward(x1, x2), 2.0));
                                 },
                                 random_uniform({1, 3, 16, 16}, 32, 0, 1, true), mopt));
    }
    if (!all_ok) throw DomainError("gradient check failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bi-temporal change detection: selective-scan fusion network"};
    app.require_subcommand(1);

    // config file applies below CLI flags, above defaults
    TrainConfig tc;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(tc, argv[i + 1]);
            } catch (const ConfigError& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 2;
            }
        }
    std::string config_path, loss_weights_csv;

    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--preset", tc.preset, "tiny|small|base");
        cmd->add_option("--lr", tc.lr);
        cmd->add_option("--wd", tc.weight_decay);
        cmd->add_option("--batch", tc.batch_size);
        cmd->add_option("--iters", tc.iterations);
        cmd->add_option("--seed", tc.seed);
        cmd->add_option("--patch", tc.patch);
        cmd->add_option("--eval-every", tc.eval_every);
        cmd->add_option("--target-f1", tc.target_f1);
        cmd->add_option("--loss-weights", loss_weights_csv, "ce,lovasz,dice");
        cmd->add_flag_callback("--no-diff", [&tc] { tc.use_diff = false; });
        cmd->add_flag_callback("--no-chn", [&tc] { tc.use_chn = false; });
        cmd->add_flag_callback("--no-ecr", [&tc] { tc.use_ecr = false; });
        cmd->add_flag_callback("--no-dice", [&tc] { tc.loss.dice = 0.0; });
    };

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model");
    std::string data_dir, out_dir = "run";
    int synth_n = 0, synth_size = 64;
    train_cmd->add_option("--data", data_dir, "dataset root with A/, B/, label/");
    train_cmd->add_option("--synth", synth_n, "train on generated synthetic pairs instead");
    train_cmd->add_option("--size", synth_size, "synthetic image size");
    train_cmd->add_option("--out", out_dir, "checkpoint/output directory");
    add_train_flags(train_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt_path, render_dir;
    eval_cmd->add_option("--ckpt", ckpt_path)->required();
    eval_cmd->add_option("--data", data_dir)->required();
    eval_cmd->add_option("--render", render_dir, "write change maps here");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "predict a change mask for one pair");
    std::string pre_path, post_path, infer_out;
    infer_cmd->add_option("--ckpt", ckpt_path)->required();
    infer_cmd->add_option("--pre", pre_path)->required();
    infer_cmd->add_option("--post", post_path)->required();
    infer_cmd->add_option("--out", infer_out)->required();

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    std::string module = "all";
    grad_cmd->add_option("--module", module)
        ->check(CLI::IsMember({"all", "tensor", "ssm", "loss", "model"}));

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "export a synthetic dataset");
    SynthConfig synth_cfg;
    int synth_count = 16;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out)->required();
    synth_cmd->add_option("--n", synth_count);
    synth_cmd->add_option("--size", synth_cfg.size);
    synth_cmd->add_option("--seed", synth_cfg.seed);

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the component toggle matrix");
    std::string ablate_csv_path = "ablation.csv";
    ablate_cmd->add_option("--data", data_dir)->required();
    ablate_cmd->add_option("--out", ablate_csv_path);
    add_train_flags(ablate_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!loss_weights_csv.empty()) parse_loss_weights(tc, loss_weights_csv);

        if (train_cmd->parsed()) {
            tc.validate();
            std::vector<BiTemporalSample> train_set, holdout;
            if (synth_n > 0) {
                SynthConfig sc;
                sc.size = synth_size;
                sc.seed = tc.seed;
                train_set = generate_synthetic(sc, synth_n);
                sc.seed = tc.seed + 1;
                holdout = generate_synthetic(sc, std::max(1, synth_n / 8));
            } else if (!data_dir.empty()) {
                std::vector<std::string> warnings;
                auto all = load_dataset(data_dir, &warnings);
                for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
                std::tie(train_set, holdout) = split_holdout(std::move(all));
            } else {
                throw ConfigError("train: need --data or --synth");
            }
            Model model = Model::build(make_model_config(tc), tc.seed);
            std::printf("training %s preset, %lld parameters, %zu train / %zu holdout samples\n",
                        tc.preset.c_str(), static_cast<long long>(model.params().total_params()),
                        train_set.size(), holdout.size());
            TrainResult r = train(model, tc, train_set, holdout, out_dir);
            for (const auto& [it, f1] : r.eval_history)
                std::printf("iter %6lld  holdout F1 %.4f\n", static_cast<long long>(it), f1);
            std::printf("ran %lld iterations, final loss %.6f, best holdout F1 %.4f @ iter %lld\n",
                        static_cast<long long>(r.iterations_run),
                        r.loss_history.empty() ? 0.0 : r.loss_history.back(), r.best_f1,
                        static_cast<long long>(r.best_iteration));
        } else if (eval_cmd->parsed()) {
            Model model;
            load_checkpoint(ckpt_path, &model);
            auto samples = load_dataset(data_dir);
            EvalResult r = evaluate(model, samples, render_dir);
            print_metrics(r.metrics, r.counts);
        } else if (infer_cmd->parsed()) {
            Model model;
            load_checkpoint(ckpt_path, &model);
            Tensor pre = to_tensor(read_pnm(pre_path));
            Tensor post = to_tensor(read_pnm(post_path));
            if (pre.shape() != post.shape())
                throw DataError("infer: image sizes differ");
            if (pre.dim(0) == 1) pre = concat({pre, pre, pre}, 0);
            if (post.dim(0) == 1) post = concat({post, post, post}, 0);
            const int h = pre.dim(1), w = pre.dim(2);
            auto mask = predict_mask(model.forward(reshape(pre, {1, 3, h, w}),
                                                   reshape(post, {1, 3, h, w})));
            ImageU8 img;
            img.width = w;
            img.height = h;
            img.channels = 1;
            img.pixels.resize(mask.size());
            for (size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
            write_pnm(infer_out, img);
            std::printf("wrote %s (%zu change pixels)\n", infer_out.c_str(),
                        static_cast<size_t>(std::count(mask.begin(), mask.end(), 1)));
        } else if (grad_cmd->parsed()) {
            return run_gradcheck(module);
        } else if (synth_cmd->parsed()) {
            export_dataset(synth_out, generate_synthetic(synth_cfg, synth_count));
            std::printf("wrote %d synthetic pairs under %s\n", synth_count, synth_out.c_str());
        } else if (ablate_cmd->parsed()) {
            std::vector<BiTemporalSample> train_set, holdout;
            auto all = load_dataset(data_dir);
            std::tie(train_set, holdout) = split_holdout(std::move(all));
            auto rows = ablate(tc, train_set, holdout, ablate_csv_path);
            std::printf("%s", ablation_csv(rows).c_str());
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
