// Command-line surface: dataset generation, training, evaluation, ablations,
// sweeps, embedding dumps, baselines, and a scene-encoding debug helper.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "whatif/whatif.hpp"

namespace fs = std::filesystem;
using namespace whatif;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    std::string out = "out";
    std::string data = "out";
    std::string config_file;
    double scale = 1.0;
    bool stage2_cotrain = false;
    bool stage2_regress = false;
};

TrainConfig make_train_config(const CommonOpts& o) {
    TrainConfig cfg;
    cfg.seed = o.seed;
    if (!o.config_file.empty()) load_config_file(cfg, o.config_file);
    cfg.stage2_cotrain = cfg.stage2_cotrain || o.stage2_cotrain;
    cfg.stage2_regress = cfg.stage2_regress || o.stage2_regress;
    cfg.stage1_pairs = std::max(4, static_cast<int>(cfg.stage1_pairs * o.scale));
    return cfg;
}

std::vector<EpisodeRecord> load_split(const std::string& dir, const std::string& split) {
    const std::string path = dir + "/" + split + ".jsonl";
    if (!fs::exists(path)) throw std::runtime_error("missing split file " + path + " (run `whatif gen` first)");
    return load_episodes(path);
}

TrainData load_train_data(const std::string& dir) {
    return TrainData{load_split(dir, "train"), load_split(dir, "val")};
}

void echo_effective(const TrainConfig& cfg, int stage2_episodes) {
    std::cout << "effective config: " << config_json(cfg) << "\n";
    if (stage2_episodes > 0) std::cout << "stage2_episodes: " << stage2_episodes << "\n";
}

int scaled(int v, double scale) { return std::max(1, static_cast<int>(v * scale)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-graph what-if reasoning: data generation, training, evaluation"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--seed", opts.seed, "base random seed")->capture_default_str();
    app.add_option("--out", opts.out, "output directory")->capture_default_str();
    app.add_option("--data", opts.data, "dataset directory")->capture_default_str();
    app.add_option("--config", opts.config_file, "key=value configuration file");
    app.add_option("--scale", opts.scale, "budget multiplier for desk-scale runs")->capture_default_str();
    app.add_flag("--stage2-cotrain", opts.stage2_cotrain, "co-train the decoder during stage 2");
    app.add_flag("--stage2-regress", opts.stage2_regress,
                 "stage 2 additionally regresses text vectors toward stage-1 vectors");

    // ---- gen ----
    auto* gen_cmd = app.add_subcommand("gen", "generate dataset splits (JSONL)");
    DatasetConfig dcfg;
    gen_cmd->add_option("--train", dcfg.train, "train episodes")->capture_default_str();
    gen_cmd->add_option("--val", dcfg.val, "val episodes")->capture_default_str();
    gen_cmd->add_option("--test", dcfg.test, "test episodes")->capture_default_str();
    gen_cmd->add_option("--2hop-ta", dcfg.two_hop_ta, "two-action test episodes")->capture_default_str();
    gen_cmd->add_option("--2hop-qh", dcfg.two_hop_qh, "two-reasoning test episodes")->capture_default_str();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train the pipeline");
    std::string stage = "all";
    int stage2_episodes = 0;
    train_cmd->add_option("--stage", stage, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
    train_cmd->add_option("--stage2-episodes", stage2_episodes, "cap stage-2 training episodes (0 = all)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained pipeline on a split");
    std::vector<std::string> eval_splits = {"test", "2hop_ta", "2hop_qh"};
    eval_cmd->add_option("--split", eval_splits, "split name(s)")->capture_default_str();
    std::string model_dir;
    eval_cmd->add_option("--model", model_dir, "model directory (defaults to --out)");

    // ---- ablate-stage1 ----
    auto* ablate_cmd = app.add_subcommand("ablate-stage1", "Stage(1+2) vs Stage(2 only) comparison");
    int ablate_stage2_eps = 0;
    ablate_cmd->add_option("--stage2-episodes", ablate_stage2_eps, "cap stage-2 training episodes (0 = all)");
    std::string ablate_split = "test";
    ablate_cmd->add_option("--split", ablate_split, "evaluation split")->capture_default_str();

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "budget / vector-length sweeps");
    std::string axis = "data";
    sweep_cmd->add_option("--axis", axis, "data or veclen")->check(CLI::IsMember({"data", "veclen"}));
    std::vector<int> grid;
    sweep_cmd->add_option("--grid", grid, "explicit grid values");
    int sweep_stage2_eps = 2000;
    sweep_cmd->add_option("--stage2-episodes", sweep_stage2_eps, "stage-2 episode budget per point");
    std::string sweep_split = "test";
    sweep_cmd->add_option("--split", sweep_split, "shared evaluation split")->capture_default_str();
    int sweep_eval_limit = 1000;
    sweep_cmd->add_option("--eval-limit", sweep_eval_limit, "episodes evaluated per point (0 = all)");

    // ---- dump-embeddings ----
    auto* dump_cmd = app.add_subcommand("dump-embeddings", "write per-episode action vectors as CSV");
    std::string dump_split = "val";
    dump_cmd->add_option("--split", dump_split, "split to embed")->capture_default_str();
    std::string dump_model;
    dump_cmd->add_option("--model", dump_model, "model directory (defaults to --out)");
    std::string dump_file;
    dump_cmd->add_option("--file", dump_file, "output CSV (defaults to OUT/embeddings.csv)");

    // ---- baseline ----
    auto* base_cmd = app.add_subcommand("baseline", "majority-class answer baseline of a split");
    std::string base_split = "test";
    base_cmd->add_option("--split", base_split, "split name")->capture_default_str();

    // ---- encode (debug) ----
    auto* enc_cmd = app.add_subcommand("encode", "print the tensor encoding of a scene JSON file");
    std::string scene_file;
    enc_cmd->add_option("--scene", scene_file, "scene JSON document")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_cmd->parsed()) {
            dcfg.seed = opts.seed;
            dcfg.train = scaled(dcfg.train, opts.scale);
            dcfg.val = scaled(dcfg.val, opts.scale);
            dcfg.test = scaled(dcfg.test, opts.scale);
            dcfg.two_hop_ta = scaled(dcfg.two_hop_ta, opts.scale);
            dcfg.two_hop_qh = scaled(dcfg.two_hop_qh, opts.scale);
            fs::create_directories(opts.out);
            generate_dataset(dcfg, opts.out);
            std::cout << "wrote " << dcfg.train << "/" << dcfg.val << "/" << dcfg.test << "/" << dcfg.two_hop_ta
                      << "/" << dcfg.two_hop_qh << " episodes to " << opts.out << "\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            TrainConfig cfg = make_train_config(opts);
            const TrainData data = load_train_data(opts.data);
            const int s2eps = stage2_episodes > 0 ? scaled(stage2_episodes, opts.scale) : 0;
            echo_effective(cfg, s2eps);
            fs::create_directories(opts.out);
            const auto t0 = std::chrono::steady_clock::now();
            if (stage == "1") {
                CpuTimer timer;
                Rng init = Rng::keyed(cfg.seed, 11);
                Stage1Model stage1 = Stage1Model::build(cfg, init);
                Rng pick = Rng::keyed(cfg.seed, 21);
                const auto pairs = select_balanced_pairs(data.train, cfg.stage1_pairs, pick);
                const auto metrics = train_stage1(stage1, pairs, cfg, timer);
                stage1.store.save(opts.out + "/stage1.ckpt");
                std::cout << "stage-1: pairs=" << metrics.pairs_used << " best_epoch=" << metrics.best_epoch
                          << " heldout_scene_accuracy=" << format_pct(metrics.heldout_scene_accuracy) << "\n";
            } else if (stage == "2" && fs::exists(opts.out + "/stage1.ckpt")) {
                // resume on top of an existing stage-1 checkpoint
                CpuTimer timer;
                Stage1Model stage1 = Stage1Model::from_store(nn::ParamStore::load(opts.out + "/stage1.ckpt"),
                                                             cfg.n_max);
                cfg.action_dim = stage1.action_dim;
                std::vector<std::string> corpus;
                for (const auto& e : data.train) corpus.push_back(e.action_text);
                Rng init2 = Rng::keyed(cfg.seed, 12);
                Nl2Model nl2 = Nl2Model::build(cfg, TokenVocab::build(corpus), init2);
                const auto train_eps = subset_episodes(data.train, s2eps, cfg.seed, 22);
                const auto val_eps =
                    subset_episodes(data.val, std::min<int>(500, static_cast<int>(data.val.size())), cfg.seed, 23);
                const auto metrics = train_stage2(nl2, stage1, train_eps, val_eps, cfg, timer);
                save_models(stage1, nl2, opts.out);
                std::cout << "stage-2: episodes=" << metrics.episodes_used
                          << " best_epoch=" << metrics.best_epoch << "\n";
            } else {
                const bool with_stage1 = (stage == "all");
                TrainedPipeline trained = train_pipeline(data, cfg, with_stage1, s2eps);
                save_models(trained.stage1, trained.nl2, opts.out);
                if (with_stage1)
                    std::cout << "stage-1: heldout_scene_accuracy="
                              << format_pct(trained.stage1_metrics.heldout_scene_accuracy) << "\n";
                std::cout << "stage-2: episodes=" << trained.stage2_metrics.episodes_used
                          << " best_epoch=" << trained.stage2_metrics.best_epoch << "\n";
            }
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cout << "models saved to " << opts.out << " (" << static_cast<int>(secs) << "s)\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            const std::string mdir = model_dir.empty() ? opts.out : model_dir;
            auto [stage1, nl2] = load_models(mdir);
            TrainConfig cfg = make_train_config(opts);
            RunReport report;
            report.config = cfg;
            const auto t0 = std::chrono::steady_clock::now();
            for (const auto& split : eval_splits)
                report.splits[split] = eval_split(stage1, nl2, load_split(opts.data, split));
            report.wall_clock_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const std::string json = run_report_json(report);
            fs::create_directories(opts.out);
            std::ofstream f(opts.out + "/metrics.json", std::ios::binary);
            f << json << "\n";
            std::cout << json << "\n";
            return 0;
        }

        if (ablate_cmd->parsed()) {
            TrainConfig cfg = make_train_config(opts);
            const TrainData data = load_train_data(opts.data);
            const auto eval_eps = load_split(opts.data, ablate_split);
            const int s2 = ablate_stage2_eps > 0 ? scaled(ablate_stage2_eps, opts.scale) : 0;
            echo_effective(cfg, s2);
            const AblationResult r = ablate_stage1(data, eval_eps, cfg, s2);
            std::cout << "stage(1+2):  scene=" << format_pct(r.with_stage1.scene_accuracy)
                      << " qa=" << format_pct(r.with_stage1.qa_accuracy) << "\n";
            std::cout << "stage(2):    scene=" << format_pct(r.without_stage1.scene_accuracy)
                      << " qa=" << format_pct(r.without_stage1.qa_accuracy) << "\n";
            std::cout << "gap:         scene=" << format_pct(r.scene_gap) << " qa=" << format_pct(r.qa_gap) << "\n";
            return 0;
        }

        if (sweep_cmd->parsed()) {
            TrainConfig cfg = make_train_config(opts);
            const TrainData data = load_train_data(opts.data);
            auto eval_eps = load_split(opts.data, sweep_split);
            if (sweep_eval_limit > 0 && static_cast<int>(eval_eps.size()) > sweep_eval_limit)
                eval_eps.resize(static_cast<std::size_t>(sweep_eval_limit));
            std::vector<int> g = grid;
            if (g.empty()) {
                if (axis == "data")
                    for (int v : {2000, 5000, 10000, 15000, 20000, 25000}) g.push_back(scaled(v, opts.scale));
                else
                    for (int v = 25; v <= 200; v += 25) g.push_back(v);
            }
            echo_effective(cfg, sweep_stage2_eps);
            const auto series = (axis == "data") ? sweep_data_size(data, eval_eps, cfg, g, sweep_stage2_eps)
                                                 : sweep_vector_length(data, eval_eps, cfg, g, sweep_stage2_eps);
            fs::create_directories(opts.out);
            const std::string path = opts.out + "/sweep_" + axis + ".csv";
            write_sweep_csv(series, axis == "data" ? "pairs" : "action_dim", path);
            for (const auto& p : series)
                std::cout << p.value << ": scene=" << format_pct(p.scene_accuracy)
                          << " qa=" << format_pct(p.qa_accuracy) << "\n";
            std::cout << "series written to " << path << "\n";
            if (axis == "veclen") {
                int best = series.front().value;
                double best_acc = series.front().scene_accuracy;
                for (const auto& p : series)
                    if (p.scene_accuracy > best_acc) {
                        best_acc = p.scene_accuracy;
                        best = p.value;
                    }
                std::cout << "argmax action_dim: " << best << "\n";
            }
            return 0;
        }

        if (dump_cmd->parsed()) {
            const std::string mdir = dump_model.empty() ? opts.out : dump_model;
            auto [stage1, nl2] = load_models(mdir);
            const auto episodes = load_split(opts.data, dump_split);
            fs::create_directories(opts.out);
            const std::string path = dump_file.empty() ? opts.out + "/embeddings.csv" : dump_file;
            dump_action_embeddings(nl2, episodes, path);
            std::cout << episodes.size() << " rows written to " << path << "\n";
            return 0;
        }

        if (base_cmd->parsed()) {
            const auto episodes = load_split(opts.data, base_split);
            std::cout << "majority baseline on " << base_split << ": " << format_pct(majority_baseline(episodes))
                      << "\n";
            return 0;
        }

        if (enc_cmd->parsed()) {
            std::ifstream f(scene_file);
            if (!f) throw std::runtime_error("cannot read " + scene_file);
            std::stringstream ss;
            ss << f.rdbuf();
            const SceneGraph scene = deserialize_scene(ss.str());
            const auto t = encode_scene(scene);
            for (std::size_t i = 0; i < t.size(); ++i) std::cout << (i ? " " : "") << format_coord(t[i]);
            std::cout << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
