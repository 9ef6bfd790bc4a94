#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "whatif/pipeline.hpp"

namespace whatif {

// ---------------------------------------------------------------------------
// Split metrics
// ---------------------------------------------------------------------------

struct SplitMetrics {
    int episodes = 0;
    double qa_accuracy = 0.0;     // % exact answer match
    double scene_accuracy = 0.0;  // % structurally equivalent predicted post-scenes
    int scene_correct_answer_wrong = 0;  // must be 0: the executor is exact
    double majority_baseline = 0.0;
    std::map<std::string, std::pair<int, int>> per_action_type;     // type -> (correct, total) on QA
    std::map<std::string, std::pair<int, int>> per_reasoning_type;  // type -> (correct, total) on QA
};

inline double majority_baseline(const std::vector<EpisodeRecord>& episodes) {
    if (episodes.empty()) return 0.0;
    std::array<int, kNumAnswers> counts{};
    for (const auto& e : episodes) ++counts[static_cast<std::size_t>(e.answer.index())];
    int best = 0;
    for (int i = 1; i < kNumAnswers; ++i)
        if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)]) best = i;
    return 100.0 * counts[static_cast<std::size_t>(best)] / static_cast<double>(episodes.size());
}

// Deterministic evaluation of the trained pipeline over a split.
inline SplitMetrics eval_split(const Stage1Model& stage1, const Nl2Model& nl2,
                               const std::vector<EpisodeRecord>& episodes) {
    SplitMetrics m;
    m.episodes = static_cast<int>(episodes.size());
    int scene_ok = 0, qa_ok = 0;
    for (const auto& e : episodes) {
        const SceneGraph predicted = predict_post_scene(stage1, nl2, e.scene, e.action_text);
        const bool s_ok = scenes_equivalent(predicted, e.post_scene);
        std::optional<Answer> ans;
        try {
            ans = execute_question(predicted, e.question_program);
        } catch (const QuestionError&) {
            ans = std::nullopt;  // graded wrong
        }
        const bool a_ok = ans.has_value() && *ans == e.answer;
        scene_ok += s_ok ? 1 : 0;
        qa_ok += a_ok ? 1 : 0;
        if (s_ok && !a_ok) ++m.scene_correct_answer_wrong;
        auto& at = m.per_action_type[e.action_type];
        ++at.second;
        at.first += a_ok ? 1 : 0;
        auto& rt = m.per_reasoning_type[e.reasoning_type];
        ++rt.second;
        rt.first += a_ok ? 1 : 0;
    }
    if (m.episodes > 0) {
        m.scene_accuracy = 100.0 * scene_ok / m.episodes;
        m.qa_accuracy = 100.0 * qa_ok / m.episodes;
    }
    m.majority_baseline = majority_baseline(episodes);
    return m;
}

// ---------------------------------------------------------------------------
// Reports (hand-written JSON: fixed key order, fixed decimals, so repeated
// runs are byte-identical)
// ---------------------------------------------------------------------------

inline std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string split_metrics_json(const SplitMetrics& m) {
    std::string out = "{";
    out += "\"episodes\":" + std::to_string(m.episodes);
    out += ",\"qa_accuracy\":" + format_pct(m.qa_accuracy);
    out += ",\"scene_accuracy\":" + format_pct(m.scene_accuracy);
    out += ",\"scene_correct_answer_wrong\":" + std::to_string(m.scene_correct_answer_wrong);
    out += ",\"majority_baseline\":" + format_pct(m.majority_baseline);
    auto breakdown = [](const std::map<std::string, std::pair<int, int>>& byt) {
        std::string s = "{";
        bool first = true;
        for (const auto& [k, v] : byt) {
            if (!first) s += ",";
            first = false;
            s += "\"" + k + "\":" + format_pct(v.second ? 100.0 * v.first / v.second : 0.0);
        }
        return s + "}";
    };
    out += ",\"per_action_type\":" + breakdown(m.per_action_type);
    out += ",\"per_reasoning_type\":" + breakdown(m.per_reasoning_type);
    return out + "}";
}

struct RunReport {
    TrainConfig config;
    std::map<std::string, SplitMetrics> splits;
    double wall_clock_seconds = 0.0;
};

inline std::string config_json(const TrainConfig& c) {
    std::ostringstream os;
    os << "{\"seed\":" << c.seed << ",\"n_max\":" << c.n_max << ",\"action_dim\":" << c.action_dim
       << ",\"stage1_pairs\":" << c.stage1_pairs << ",\"stage1_epochs\":" << c.stage1_epochs
       << ",\"stage2_epochs\":" << c.stage2_epochs << ",\"patience\":" << c.patience << ",\"lr\":" << c.lr
       << ",\"batch\":" << c.batch << ",\"lambda_coord\":" << c.lambda_coord << ",\"max_tokens\":" << c.max_tokens
       << ",\"embed_dim\":" << c.embed_dim << ",\"lstm_hidden\":" << c.lstm_hidden
       << ",\"stage2_cotrain\":" << (c.stage2_cotrain ? "true" : "false") << "}";
    return os.str();
}

inline std::string run_report_json(const RunReport& r) {
    std::string out = "{\"config\":" + config_json(r.config);
    out += ",\"splits\":{";
    bool first = true;
    for (const auto& [name, m] : r.splits) {
        if (!first) out += ",";
        first = false;
        out += "\"" + name + "\":" + split_metrics_json(m);
    }
    out += "}";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", r.wall_clock_seconds);
    out += ",\"wall_clock_seconds\":" + std::string(buf);
    return out + "}";
}

// ---------------------------------------------------------------------------
// Model bundle I/O
// ---------------------------------------------------------------------------

inline void save_models(const Stage1Model& stage1, const Nl2Model& nl2, const std::string& dir) {
    stage1.store.save(dir + "/stage1.ckpt");
    nl2.store.save(dir + "/stage2.ckpt");
    nl2.vocab.save(dir + "/vocab.txt");
    std::ofstream meta(dir + "/meta.json");
    if (!meta) throw std::runtime_error("cannot write " + dir + "/meta.json");
    meta << "{\"n_max\":" << stage1.n_max << ",\"max_tokens\":" << nl2.max_tokens << "}\n";
}

inline std::pair<Stage1Model, Nl2Model> load_models(const std::string& dir) {
    std::ifstream metaf(dir + "/meta.json");
    if (!metaf) throw std::runtime_error("cannot read " + dir + "/meta.json");
    const auto meta = nlohmann::json::parse(metaf);
    const int n_max = meta.at("n_max").get<int>();
    const int max_tokens = meta.at("max_tokens").get<int>();
    Stage1Model stage1 = Stage1Model::from_store(nn::ParamStore::load(dir + "/stage1.ckpt"), n_max);
    Nl2Model nl2 = Nl2Model::from_store(nn::ParamStore::load(dir + "/stage2.ckpt"),
                                        TokenVocab::load(dir + "/vocab.txt"), max_tokens);
    return {std::move(stage1), std::move(nl2)};
}

// ---------------------------------------------------------------------------
// Full training runs
// ---------------------------------------------------------------------------

struct TrainedPipeline {
    Stage1Model stage1;
    Nl2Model nl2;
    Stage1Metrics stage1_metrics;
    Stage2Metrics stage2_metrics;
    bool stage1_trained = false;
};

struct TrainData {
    std::vector<EpisodeRecord> train;
    std::vector<EpisodeRecord> val;
};

inline std::vector<EpisodeRecord> subset_episodes(const std::vector<EpisodeRecord>& eps, int limit,
                                                  std::uint64_t seed, std::uint64_t key) {
    if (limit <= 0 || limit >= static_cast<int>(eps.size())) return eps;
    std::vector<std::size_t> idx(eps.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::keyed(seed, key);
    rng.shuffle(idx);
    std::vector<EpisodeRecord> out;
    out.reserve(static_cast<std::size_t>(limit));
    for (int i = 0; i < limit; ++i) out.push_back(eps[idx[static_cast<std::size_t>(i)]]);
    return out;
}

// Trains Stage-1 (optionally skipped: the "Stage(2 only)" arm keeps the
// randomly initialized decoder, frozen) then Stage-2 on the same data.
inline TrainedPipeline train_pipeline(const TrainData& data, const TrainConfig& cfg, bool with_stage1,
                                      int stage2_episodes = 0) {
    CpuTimer timer;
    TrainedPipeline out;
    Rng init1 = Rng::keyed(cfg.seed, 11);
    out.stage1 = Stage1Model::build(cfg, init1);
    if (with_stage1) {
        Rng pick = Rng::keyed(cfg.seed, 21);
        const auto pairs = select_balanced_pairs(data.train, cfg.stage1_pairs, pick);
        out.stage1_metrics = train_stage1(out.stage1, pairs, cfg, timer);
        out.stage1_trained = true;
    }

    std::vector<std::string> corpus;
    corpus.reserve(data.train.size());
    for (const auto& e : data.train) corpus.push_back(e.action_text);
    const TokenVocab vocab = TokenVocab::build(corpus);

    Rng init2 = Rng::keyed(cfg.seed, 12);
    out.nl2 = Nl2Model::build(cfg, vocab, init2);
    const auto train_eps = subset_episodes(data.train, stage2_episodes, cfg.seed, 22);
    const auto val_eps = subset_episodes(data.val, std::min<int>(500, static_cast<int>(data.val.size())), cfg.seed, 23);
    out.stage2_metrics = train_stage2(out.nl2, out.stage1, train_eps, val_eps, cfg, timer);
    return out;
}

// ---------------------------------------------------------------------------
// Ablations and sweeps
// ---------------------------------------------------------------------------

struct AblationResult {
    SplitMetrics with_stage1;
    SplitMetrics without_stage1;
    double scene_gap = 0.0;  // with - without
    double qa_gap = 0.0;
};

// Table-2-style comparison: Stage(1+2) versus Stage(2 only) with identical
// seeds and data; both arms share the same Stage-2 initialization.
inline AblationResult ablate_stage1(const TrainData& data, const std::vector<EpisodeRecord>& eval_eps,
                                    const TrainConfig& cfg, int stage2_episodes = 0) {
    AblationResult r;
    {
        TrainedPipeline arm = train_pipeline(data, cfg, true, stage2_episodes);
        r.with_stage1 = eval_split(arm.stage1, arm.nl2, eval_eps);
    }
    {
        TrainedPipeline arm = train_pipeline(data, cfg, false, stage2_episodes);
        r.without_stage1 = eval_split(arm.stage1, arm.nl2, eval_eps);
    }
    r.scene_gap = r.with_stage1.scene_accuracy - r.without_stage1.scene_accuracy;
    r.qa_gap = r.with_stage1.qa_accuracy - r.without_stage1.qa_accuracy;
    return r;
}

struct SweepPoint {
    int value = 0;  // pair budget, or action vector length
    double scene_accuracy = 0.0;
    double qa_accuracy = 0.0;
    int scene_correct_answer_wrong = 0;
};

// One training per grid point (same seed: the only delta is the budget),
// all points graded on one fixed eval split.
inline std::vector<SweepPoint> sweep_data_size(const TrainData& data, const std::vector<EpisodeRecord>& eval_eps,
                                               const TrainConfig& cfg, const std::vector<int>& grid,
                                               int stage2_episodes = 0) {
    std::vector<SweepPoint> out;
    for (int budget : grid) {
        TrainConfig c = cfg;
        c.stage1_pairs = budget;
        TrainedPipeline arm = train_pipeline(data, c, true, stage2_episodes);
        const SplitMetrics m = eval_split(arm.stage1, arm.nl2, eval_eps);
        out.push_back({budget, m.scene_accuracy, m.qa_accuracy, m.scene_correct_answer_wrong});
    }
    return out;
}

inline std::vector<SweepPoint> sweep_vector_length(const TrainData& data, const std::vector<EpisodeRecord>& eval_eps,
                                                   const TrainConfig& cfg, const std::vector<int>& grid,
                                                   int stage2_episodes = 0) {
    std::vector<SweepPoint> out;
    for (int d_a : grid) {
        TrainConfig c = cfg;
        c.action_dim = d_a;
        TrainedPipeline arm = train_pipeline(data, c, true, stage2_episodes);
        const SplitMetrics m = eval_split(arm.stage1, arm.nl2, eval_eps);
        out.push_back({d_a, m.scene_accuracy, m.qa_accuracy, m.scene_correct_answer_wrong});
    }
    return out;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& series, const std::string& axis_name,
                            const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << axis_name << ",scene_accuracy,qa_accuracy\n";
    for (const auto& p : series)
        f << p.value << "," << format_pct(p.scene_accuracy) << "," << format_pct(p.qa_accuracy) << "\n";
}

// ---------------------------------------------------------------------------
// key=value configuration files
// ---------------------------------------------------------------------------

inline void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "n_max") cfg.n_max = std::stoi(value);
    else if (key == "action_dim" || key == "d_a") cfg.action_dim = std::stoi(value);
    else if (key == "stage1_pairs") cfg.stage1_pairs = std::stoi(value);
    else if (key == "stage1_epochs") cfg.stage1_epochs = std::stoi(value);
    else if (key == "stage2_epochs") cfg.stage2_epochs = std::stoi(value);
    else if (key == "patience") cfg.patience = std::stoi(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "batch") cfg.batch = std::stoi(value);
    else if (key == "lambda_coord") cfg.lambda_coord = std::stod(value);
    else if (key == "max_tokens") cfg.max_tokens = std::stoi(value);
    else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
    else if (key == "lstm_hidden") cfg.lstm_hidden = std::stoi(value);
    else if (key == "stage2_cotrain") cfg.stage2_cotrain = (value == "1" || value == "true");
    else if (key == "augment_permute") cfg.augment_permute = (value == "1" || value == "true");
    else if (key == "stage1_vector_noise") cfg.stage1_vector_noise = std::stod(value);
    else if (key == "stage2_regress") cfg.stage2_regress = (value == "1" || value == "true");
    else if (key == "cpu_budget_minutes") cfg.cpu_budget_minutes = std::stod(value);
    else throw std::invalid_argument("unknown config key \"" + key + "\"");
}

inline void load_config_file(TrainConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string value = line.substr(eq + 1);
        const auto vstart = value.find_first_not_of(" \t");
        value = (vstart == std::string::npos) ? "" : value.substr(vstart);
        apply_config_entry(cfg, key, value);
    }
}

}  // namespace whatif
