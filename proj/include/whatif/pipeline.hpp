#pragma once

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "whatif/datagen.hpp"
#include "whatif/nn.hpp"
#include "whatif/questions.hpp"
#include "whatif/tensor_codec.hpp"
#include "whatif/text.hpp"

namespace whatif {

// ---------------------------------------------------------------------------
// Budget guard: long runs must fail loudly, not silently overrun.
// ---------------------------------------------------------------------------

class BudgetExceeded : public std::runtime_error {
public:
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

class CpuTimer {
public:
    CpuTimer() : start_(std::clock()) {}
    double minutes() const { return static_cast<double>(std::clock() - start_) / CLOCKS_PER_SEC / 60.0; }
    void check(double limit_minutes, const std::string& what) const {
        if (minutes() > limit_minutes)
            throw BudgetExceeded(what + ": exceeded CPU budget of " + std::to_string(limit_minutes) + " minutes");
    }

private:
    std::clock_t start_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::uint64_t seed = 0;
    int n_max = kDefaultMaxObjects;
    int action_dim = 125;       // d_a, the learned action vector length
    int stage1_pairs = 20000;   // scene-pair budget, balanced over action kinds
    int stage1_epochs = 40;
    int stage2_epochs = 40;
    int patience = 5;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 64;
    double lambda_coord = 1.0;
    int max_tokens = 20;
    int embed_dim = 64;
    int lstm_hidden = 200;
    bool stage2_cotrain = false;
    // The world is slot-permutation equivariant but the generator fills
    // slots 0..n-1; training on permuted copies makes the edit rule
    // generalize across slots instead of being memorized per index.
    bool augment_permute = true;
    // Gaussian noise (relative to the per-batch vector scale) injected into
    // the action vector during stage-1 training. The text encoder can only
    // approximate the stage-1 vectors, so the decoder must stay accurate
    // under vector error; 0 disables.
    double stage1_vector_noise = 0.5;
    // Stage-2 variant: additionally regress the text vector toward the
    // stage-1 encoder's vector for the same episode (off by default).
    bool stage2_regress = false;
    double cpu_budget_minutes = 60.0;
};

// Step decay: full rate for the first 60% of the epoch budget, then 1/3,
// then 1/10 for the last 15%. Purely a function of (epoch, budget).
inline double scheduled_lr(double base, int epoch, int total_epochs) {
    if (total_epochs <= 1) return base;
    const double frac = static_cast<double>(epoch) / total_epochs;
    if (frac >= 0.85) return base * 0.1;
    if (frac >= 0.6) return base / 3.0;
    return base;
}

// Relabel slots by the permutation (support targets follow).
inline SceneGraph permute_slots(const SceneGraph& scene, const std::vector<int>& perm) {
    SceneGraph out(scene.capacity());
    for (int s : scene.slots()) {
        ObjectNode o = scene.object(s);
        o.slot = perm[static_cast<std::size_t>(s)];
        if (o.support != kGround) o.support = perm[static_cast<std::size_t>(o.support)];
        out.put(o);
    }
    return out;
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    return perm;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

// Stage-1: ActionEncoder maps (S, S') to an action vector; EffectDecoder
// reconstructs S' from (S, action vector). One store holds both so the
// stage checkpoints and freezes as a unit.
struct Stage1Model {
    nn::ParamStore store;
    nn::Mlp enc;
    nn::Mlp dec;
    int n_max = kDefaultMaxObjects;
    int action_dim = 125;

    static Stage1Model build(const TrainConfig& cfg, Rng& rng) {
        Stage1Model m;
        m.n_max = cfg.n_max;
        m.action_dim = cfg.action_dim;
        const int F = SceneTensorLayout{cfg.n_max}.size();
        m.enc = nn::Mlp{"enc", {2 * F, 512, 256, cfg.action_dim}};
        m.dec = nn::Mlp{"dec", {F + cfg.action_dim, 512, 512, F}, true};
        m.enc.init(m.store, rng);
        m.dec.init(m.store, rng);

        // The decoder starts as an exact copy of the pre-scene: the skip
        // carries one-hots at margin 8 and coordinates at 1, and the trunk's
        // output layer starts at zero. Training shapes the trunk into the
        // action-conditioned edits on top of the copy.
        const SceneTensorLayout L{cfg.n_max};
        nn::Param& S = m.store.at("dec.S");
        auto copy_entry = [&](int idx, double scale) {
            S.w[static_cast<std::size_t>(idx) * F + idx] = scale;
        };
        for (int s = 0; s < cfg.n_max; ++s) {
            const int off = L.slot_offset(s);
            copy_entry(off + SceneTensorLayout::kExist, 8.0);
            for (int k = 0; k < kNumColors; ++k) copy_entry(off + SceneTensorLayout::kColor + k, 8.0);
            for (int k = 0; k < kNumShapes; ++k) copy_entry(off + SceneTensorLayout::kShape + k, 8.0);
            for (int k = 0; k < kNumSizes; ++k) copy_entry(off + SceneTensorLayout::kSize + k, 8.0);
            for (int k = 0; k < kNumMaterials; ++k) copy_entry(off + SceneTensorLayout::kMaterial + k, 8.0);
            copy_entry(off + SceneTensorLayout::kCoord + 0, 1.0);
            copy_entry(off + SceneTensorLayout::kCoord + 1, 1.0);
            for (int k = 0; k <= cfg.n_max; ++k) copy_entry(off + SceneTensorLayout::kSupport + k, 8.0);
        }
        nn::Param& W2 = m.store.at("dec.W2");
        std::fill(W2.w.begin(), W2.w.end(), 0.0);
        return m;
    }

    static Stage1Model from_store(nn::ParamStore store, int n_max) {
        Stage1Model m;
        m.n_max = n_max;
        m.store = std::move(store);
        const int F = SceneTensorLayout{n_max}.size();
        m.action_dim = m.store.at("enc.W2").cols();
        m.enc = nn::Mlp{"enc", {2 * F, 512, 256, m.action_dim}};
        m.dec = nn::Mlp{"dec", {F + m.action_dim, 512, 512, F}, m.store.has("dec.S")};
        return m;
    }
};

// Captures the difference between two scene states as a d_a-vector.
inline std::vector<double> encode_action_pair(const Stage1Model& m, const SceneGraph& pre, const SceneGraph& post) {
    const auto t_pre = encode_scene(pre);
    const auto t_post = encode_scene(post);
    std::vector<double> x;
    x.reserve(t_pre.size() + t_post.size());
    x.insert(x.end(), t_pre.begin(), t_pre.end());
    x.insert(x.end(), t_post.begin(), t_post.end());
    nn::Mlp::Cache cache;
    std::vector<double> out(static_cast<std::size_t>(m.action_dim));
    m.enc.forward(m.store, x.data(), 1, cache, out.data());
    return out;
}

// Decoder logits for one (pre-scene tensor, action vector) input.
inline std::vector<double> decode_logits(const Stage1Model& m, std::span<const double> pre_tensor,
                                         std::span<const double> action_vec) {
    std::vector<double> x;
    x.reserve(pre_tensor.size() + action_vec.size());
    x.insert(x.end(), pre_tensor.begin(), pre_tensor.end());
    x.insert(x.end(), action_vec.begin(), action_vec.end());
    nn::Mlp::Cache cache;
    std::vector<double> logits(static_cast<std::size_t>(m.dec.out_dim()));
    m.dec.forward(m.store, x.data(), 1, cache, logits.data());
    return logits;
}

// Shared loss surface of Eq-style training: the same action vector fed to
// the same decoder yields the same loss, whichever stage produced it.
inline double decode_scene_loss(const Stage1Model& m, const SceneGraph& pre, std::span<const double> action_vec,
                                const SceneGraph& target, double lambda_coord) {
    const auto pre_t = encode_scene(pre);
    const auto logits = decode_logits(m, pre_t, action_vec);
    return nn::scene_loss(logits.data(), target, lambda_coord, nullptr);
}

// Stage-2: token embeddings -> LSTM -> dense head, emitting an action
// vector approximation from the action text alone.
struct Nl2Model {
    nn::ParamStore store;
    nn::Lstm lstm;
    nn::Mlp head;
    TokenVocab vocab;
    int action_dim = 125;
    int max_tokens = 20;
    int embed_dim = 64;

    static Nl2Model build(const TrainConfig& cfg, const TokenVocab& vocab, Rng& rng) {
        Nl2Model m;
        m.vocab = vocab;
        m.action_dim = cfg.action_dim;
        m.max_tokens = cfg.max_tokens;
        m.embed_dim = cfg.embed_dim;
        nn::Param& E = m.store.add("nl2.emb", {vocab.size(), cfg.embed_dim});
        nn::init_normal(E, rng, 0.1);
        std::fill_n(E.w.begin(), cfg.embed_dim, 0.0);  // PAD row stays zero
        m.lstm = nn::Lstm{"nl2.lstm", cfg.embed_dim, cfg.lstm_hidden};
        m.lstm.init(m.store, rng);
        m.head = nn::Mlp{"nl2.head", {cfg.lstm_hidden, cfg.action_dim}};
        m.head.init(m.store, rng);
        return m;
    }

    static Nl2Model from_store(nn::ParamStore store, TokenVocab vocab, int max_tokens) {
        Nl2Model m;
        m.store = std::move(store);
        m.vocab = std::move(vocab);
        m.embed_dim = m.store.at("nl2.emb").cols();
        const int hidden = m.store.at("nl2.lstm.Wh").rows();
        m.action_dim = m.store.at("nl2.head.W0").cols();
        m.max_tokens = max_tokens;
        m.lstm = nn::Lstm{"nl2.lstm", m.embed_dim, hidden};
        m.head = nn::Mlp{"nl2.head", {hidden, m.action_dim}};
        return m;
    }
};

// Action vector from text alone (batch of 1).
inline std::vector<double> text_action_vector(const Nl2Model& m, const std::string& text) {
    const int T = m.max_tokens;
    std::vector<int> ids(static_cast<std::size_t>(T));
    std::vector<double> mask(static_cast<std::size_t>(T));
    m.vocab.encode(text, T, ids.data(), mask.data());
    std::vector<double> x(static_cast<std::size_t>(T) * m.embed_dim);
    nn::embedding_forward(m.store.at("nl2.emb"), ids, x.data(), 1, T);
    nn::Lstm::Cache cache;
    std::vector<double> h(static_cast<std::size_t>(m.lstm.hidden));
    m.lstm.forward(m.store, x.data(), mask.data(), 1, T, cache, h.data());
    nn::Mlp::Cache hcache;
    std::vector<double> out(static_cast<std::size_t>(m.action_dim));
    m.head.forward(m.store, h.data(), 1, hcache, out.data());
    return out;
}

// Test-time composition: decode the predicted post-scene from the pre-scene
// and the text-derived action vector.
inline SceneGraph predict_post_scene(const Stage1Model& stage1, const Nl2Model& nl2, const SceneGraph& scene,
                                     const std::string& action_text) {
    const auto vec = text_action_vector(nl2, action_text);
    const auto logits = decode_logits(stage1, encode_scene(scene), vec);
    return discretize(logits, stage1.n_max);
}

// Predicted post-scene fed to the exact symbolic executor. A unique-violation
// on a mispredicted scene is reported as "no answer" (nullopt), graded wrong.
inline std::optional<Answer> answer_hypothetical(const Stage1Model& stage1, const Nl2Model& nl2,
                                                 const SceneGraph& scene, const std::string& action_text,
                                                 const QuestionProgram& question) {
    const SceneGraph predicted = predict_post_scene(stage1, nl2, scene, action_text);
    try {
        return execute_question(predicted, question);
    } catch (const QuestionError&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Stage-1 training
// ---------------------------------------------------------------------------

struct ScenePair {
    SceneGraph pre{kDefaultMaxObjects};
    SceneGraph post{kDefaultMaxObjects};
    std::string action_type;
};

struct EpochStats {
    double train_loss = 0.0;
    double held_loss = 0.0;
};

struct Stage1Metrics {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double heldout_scene_accuracy = 0.0;  // exact-match after discretize
    int pairs_used = 0;
};

// Random subset of `budget` pairs balanced by action type (without
// replacement), preserving one-hop kinds only.
inline std::vector<ScenePair> select_balanced_pairs(const std::vector<EpisodeRecord>& episodes, int budget,
                                                    Rng& rng) {
    std::map<std::string, std::vector<const EpisodeRecord*>> by_kind;
    for (const auto& e : episodes)
        if (e.action_program.steps.size() == 1) by_kind[e.action_type].push_back(&e);
    if (by_kind.empty()) throw std::invalid_argument("no one-hop episodes to draw pairs from");
    const int kinds = static_cast<int>(by_kind.size());
    const int per_kind = budget / kinds;
    std::vector<ScenePair> out;
    for (auto& [kind, eps] : by_kind) {
        if (static_cast<int>(eps.size()) < per_kind)
            throw std::invalid_argument("not enough \"" + kind + "\" episodes: need " + std::to_string(per_kind) +
                                        ", have " + std::to_string(eps.size()));
        rng.shuffle(eps);
        for (int i = 0; i < per_kind; ++i)
            out.push_back({eps[static_cast<std::size_t>(i)]->scene, eps[static_cast<std::size_t>(i)]->post_scene,
                           kind});
    }
    return out;
}

namespace traindetail {

struct BatchBuffers {
    std::vector<double> x, y, dy, dx;
};

inline std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    return idx;
}

inline std::vector<double> snapshot(const nn::ParamStore& store) {
    std::vector<double> out;
    for (const auto& p : store.params()) out.insert(out.end(), p.w.begin(), p.w.end());
    return out;
}

inline void restore(nn::ParamStore& store, const std::vector<double>& snap) {
    std::size_t k = 0;
    for (auto& p : store.params()) {
        std::copy_n(snap.begin() + static_cast<std::ptrdiff_t>(k), p.w.size(), p.w.begin());
        k += p.w.size();
    }
}

}  // namespace traindetail

inline Stage1Metrics train_stage1(Stage1Model& model, const std::vector<ScenePair>& pairs, const TrainConfig& cfg,
                                  const CpuTimer& timer) {
    if (pairs.empty()) throw std::invalid_argument("stage-1: empty pair set");
    const int F = SceneTensorLayout{model.n_max}.size();
    const int d_a = model.action_dim;

    // precompute scene tensors
    std::vector<std::vector<double>> pre_t, post_t;
    pre_t.reserve(pairs.size());
    post_t.reserve(pairs.size());
    for (const auto& p : pairs) {
        pre_t.push_back(encode_scene(p.pre));
        post_t.push_back(encode_scene(p.post));
    }

    Rng rng = Rng::keyed(cfg.seed, 101);
    auto order = traindetail::epoch_order(pairs.size(), rng);
    const std::size_t held = std::max<std::size_t>(1, pairs.size() / 10);
    std::vector<std::size_t> held_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    if (train_idx.empty()) train_idx = held_idx;  // tiny memorization runs train on everything

    const int B = cfg.batch;
    std::vector<double> enc_in(static_cast<std::size_t>(B) * 2 * F);
    std::vector<double> avec(static_cast<std::size_t>(B) * d_a);
    std::vector<double> dec_in(static_cast<std::size_t>(B) * (F + d_a));
    std::vector<double> logits(static_cast<std::size_t>(B) * F);
    std::vector<double> dlogits(static_cast<std::size_t>(B) * F);
    std::vector<double> ddec_in(static_cast<std::size_t>(B) * (F + d_a));
    std::vector<double> davec(static_cast<std::size_t>(B) * d_a);
    std::vector<SceneGraph> targets(static_cast<std::size_t>(B), SceneGraph(model.n_max));
    nn::Mlp::Cache enc_cache, dec_cache;
    double lr_now = cfg.lr;

    // aug != nullptr: train-time slot-permutation augmentation
    auto run_batch = [&](const std::size_t* idx, int n, bool train, Rng* aug) -> double {
        for (int i = 0; i < n; ++i) {
            const ScenePair& pair = pairs[idx[i]];
            if (aug && cfg.augment_permute && aug->chance(0.75)) {
                // The encoder sees one slot relabeling, the decoder another:
                // the action vector cannot carry slot identity, so the
                // decoder learns to resolve the described edit against its
                // own view of the scene (the same grounding the text path
                // needs at test time).
                const auto perm_enc = random_permutation(model.n_max, *aug);
                const auto perm_dec = random_permutation(model.n_max, *aug);
                const auto pe = encode_scene(permute_slots(pair.pre, perm_enc));
                const auto qe = encode_scene(permute_slots(pair.post, perm_enc));
                const auto pd = encode_scene(permute_slots(pair.pre, perm_dec));
                targets[static_cast<std::size_t>(i)] = permute_slots(pair.post, perm_dec);
                std::copy(pe.begin(), pe.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F);
                std::copy(qe.begin(), qe.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F + F);
                std::copy(pd.begin(), pd.end(), dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a));
            } else {
                const auto& pt = pre_t[idx[i]];
                const auto& qt = post_t[idx[i]];
                targets[static_cast<std::size_t>(i)] = pair.post;
                std::copy(pt.begin(), pt.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F);
                std::copy(qt.begin(), qt.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F + F);
                std::copy(pt.begin(), pt.end(), dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a));
            }
        }
        model.enc.forward(model.store, enc_in.data(), n, enc_cache, avec.data());
        if (train && aug && cfg.stage1_vector_noise > 0.0) {
            // scale noise by the batch's vector spread so it tracks training
            double mean = 0.0, sq = 0.0;
            const std::size_t nv = static_cast<std::size_t>(n) * d_a;
            for (std::size_t k = 0; k < nv; ++k) mean += avec[k];
            mean /= static_cast<double>(nv);
            for (std::size_t k = 0; k < nv; ++k) sq += (avec[k] - mean) * (avec[k] - mean);
            const double sigma = std::sqrt(sq / static_cast<double>(nv)) * cfg.stage1_vector_noise;
            for (std::size_t k = 0; k < nv; ++k) avec[k] += aug->normal(0.0, sigma);
        }
        for (int i = 0; i < n; ++i)
            std::copy_n(avec.begin() + static_cast<std::ptrdiff_t>(i) * d_a, d_a,
                        dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a) + F);
        model.dec.forward(model.store, dec_in.data(), n, dec_cache, logits.data());

        double loss = 0.0;
        std::fill(dlogits.begin(), dlogits.begin() + static_cast<std::ptrdiff_t>(n) * F, 0.0);
        for (int i = 0; i < n; ++i)
            loss += nn::scene_loss(logits.data() + static_cast<std::ptrdiff_t>(i) * F,
                                   targets[static_cast<std::size_t>(i)], cfg.lambda_coord,
                                   train ? dlogits.data() + static_cast<std::ptrdiff_t>(i) * F : nullptr,
                                   1.0 / n) /
                    n;
        if (!train) return loss;

        model.store.zero_grads();
        model.dec.backward(model.store, dec_cache, dlogits.data(), ddec_in.data());
        for (int i = 0; i < n; ++i)
            std::copy_n(ddec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a) + F, d_a,
                        davec.begin() + static_cast<std::ptrdiff_t>(i) * d_a);
        model.enc.backward(model.store, enc_cache, davec.data(), nullptr);
        model.store.adam_step(lr_now, cfg.beta1, cfg.beta2, cfg.eps);
        return loss;
    };

    auto eval_loss = [&](const std::vector<std::size_t>& idx) -> double {
        double sum = 0.0;
        for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(B)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(B), idx.size() - at));
            sum += run_batch(idx.data() + at, n, false, nullptr) * n;
        }
        return sum / static_cast<double>(idx.size());
    };

    Rng aug_rng = Rng::keyed(cfg.seed, 102);
    Stage1Metrics metrics;
    metrics.pairs_used = static_cast<int>(pairs.size());
    double best = 1e300;
    std::vector<double> best_snap;
    int bad_epochs = 0;
    for (int epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
        timer.check(cfg.cpu_budget_minutes, "stage-1 training");
        lr_now = scheduled_lr(cfg.lr, epoch, cfg.stage1_epochs);
        auto idx = train_idx;
        rng.shuffle(idx);
        double train_loss = 0.0;
        for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(B)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(B), idx.size() - at));
            train_loss += run_batch(idx.data() + at, n, true, &aug_rng) * n;
        }
        train_loss /= static_cast<double>(idx.size());
        const double held_loss = eval_loss(held_idx);
        metrics.epochs.push_back({train_loss, held_loss});
        if (!std::isfinite(train_loss) || !std::isfinite(held_loss))
            throw std::runtime_error("stage-1: non-finite loss at epoch " + std::to_string(epoch));
        if (held_loss < best - 1e-9) {
            best = held_loss;
            best_snap = traindetail::snapshot(model.store);
            metrics.best_epoch = epoch;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    if (!best_snap.empty()) traindetail::restore(model.store, best_snap);

    // held-out exact match through the decode -> discretize path
    int correct = 0;
    for (std::size_t i : held_idx) {
        const auto vec = encode_action_pair(model, pairs[i].pre, pairs[i].post);
        const auto lg = decode_logits(model, pre_t[i], vec);
        if (scenes_equivalent(discretize(lg, model.n_max), pairs[i].post)) ++correct;
    }
    metrics.heldout_scene_accuracy = 100.0 * correct / static_cast<double>(held_idx.size());
    return metrics;
}

// ---------------------------------------------------------------------------
// Stage-2 training (decoder frozen unless cotraining is requested)
// ---------------------------------------------------------------------------

struct Stage2Metrics {
    std::vector<EpochStats> epochs;  // held_loss is the val-split loss
    int best_epoch = -1;
    int episodes_used = 0;
};

inline Stage2Metrics train_stage2(Nl2Model& nl2, Stage1Model& stage1, const std::vector<EpisodeRecord>& train_eps,
                                  const std::vector<EpisodeRecord>& val_eps, const TrainConfig& cfg,
                                  const CpuTimer& timer) {
    if (train_eps.empty()) throw std::invalid_argument("stage-2: empty training set");
    const int F = SceneTensorLayout{stage1.n_max}.size();
    const int d_a = stage1.action_dim;
    const int T = cfg.max_tokens;
    const int D = cfg.embed_dim;
    const int H = nl2.lstm.hidden;

    stage1.store.freeze_all(!cfg.stage2_cotrain);

    struct Encoded {
        std::vector<double> pre_t;
        std::vector<int> ids;
        std::vector<double> mask;
        const EpisodeRecord* ep;
    };
    auto encode_eps = [&](const std::vector<EpisodeRecord>& eps) {
        std::vector<Encoded> out;
        out.reserve(eps.size());
        for (const auto& e : eps) {
            Encoded enc;
            enc.pre_t = encode_scene(e.scene);
            enc.ids.resize(static_cast<std::size_t>(T));
            enc.mask.resize(static_cast<std::size_t>(T));
            nl2.vocab.encode(e.action_text, T, enc.ids.data(), enc.mask.data());
            enc.ep = &e;
            out.push_back(std::move(enc));
        }
        return out;
    };
    const auto train_data = encode_eps(train_eps);
    const auto val_data = encode_eps(val_eps);

    Rng rng = Rng::keyed(cfg.seed, 202);
    const int B = cfg.batch;
    std::vector<int> ids(static_cast<std::size_t>(B) * T);
    std::vector<double> mask(static_cast<std::size_t>(B) * T);
    std::vector<double> emb(static_cast<std::size_t>(B) * T * D);
    std::vector<double> demb(static_cast<std::size_t>(B) * T * D);
    std::vector<double> h(static_cast<std::size_t>(B) * H);
    std::vector<double> dh(static_cast<std::size_t>(B) * H);
    std::vector<double> avec(static_cast<std::size_t>(B) * d_a);
    std::vector<double> davec(static_cast<std::size_t>(B) * d_a);
    std::vector<double> dec_in(static_cast<std::size_t>(B) * (F + d_a));
    std::vector<double> ddec_in(static_cast<std::size_t>(B) * (F + d_a));
    std::vector<double> logits(static_cast<std::size_t>(B) * F);
    std::vector<double> dlogits(static_cast<std::size_t>(B) * F);
    std::vector<SceneGraph> targets(static_cast<std::size_t>(B), SceneGraph(stage1.n_max));
    std::vector<SceneGraph> pres(static_cast<std::size_t>(B), SceneGraph(stage1.n_max));
    std::vector<double> enc_in(static_cast<std::size_t>(B) * 2 * F);
    std::vector<double> avec_tgt(static_cast<std::size_t>(B) * d_a);
    nn::Lstm::Cache lstm_cache;
    nn::Mlp::Cache head_cache, dec_cache;
    nn::Mlp::Cache enc_cache;
    double lr_now = cfg.lr;

    auto run_batch = [&](const std::vector<Encoded>& data, const std::size_t* idx, int n, bool train,
                         Rng* aug) -> double {
        for (int i = 0; i < n; ++i) {
            const Encoded& e = data[idx[i]];
            std::copy(e.ids.begin(), e.ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(i) * T);
            std::copy(e.mask.begin(), e.mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(i) * T);
            if (aug && cfg.augment_permute && aug->chance(0.75)) {
                const auto perm = random_permutation(stage1.n_max, *aug);
                pres[static_cast<std::size_t>(i)] = permute_slots(e.ep->scene, perm);
                const auto pt = encode_scene(pres[static_cast<std::size_t>(i)]);
                targets[static_cast<std::size_t>(i)] = permute_slots(e.ep->post_scene, perm);
                std::copy(pt.begin(), pt.end(), dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a));
            } else {
                pres[static_cast<std::size_t>(i)] = e.ep->scene;
                targets[static_cast<std::size_t>(i)] = e.ep->post_scene;
                std::copy(e.pre_t.begin(), e.pre_t.end(),
                          dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a));
            }
        }
        nn::embedding_forward(nl2.store.at("nl2.emb"), std::span<const int>(ids.data(), static_cast<std::size_t>(n) * T),
                              emb.data(), n, T);
        nl2.lstm.forward(nl2.store, emb.data(), mask.data(), n, T, lstm_cache, h.data());
        nl2.head.forward(nl2.store, h.data(), n, head_cache, avec.data());
        for (int i = 0; i < n; ++i)
            std::copy_n(avec.begin() + static_cast<std::ptrdiff_t>(i) * d_a, d_a,
                        dec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a) + F);
        stage1.dec.forward(stage1.store, dec_in.data(), n, dec_cache, logits.data());

        double loss = 0.0;
        std::fill(dlogits.begin(), dlogits.begin() + static_cast<std::ptrdiff_t>(n) * F, 0.0);
        for (int i = 0; i < n; ++i)
            loss += nn::scene_loss(logits.data() + static_cast<std::ptrdiff_t>(i) * F,
                                   targets[static_cast<std::size_t>(i)], cfg.lambda_coord,
                                   train ? dlogits.data() + static_cast<std::ptrdiff_t>(i) * F : nullptr,
                                   1.0 / n) /
                    n;
        if (!train) return loss;

        nl2.store.zero_grads();
        stage1.store.zero_grads();
        stage1.dec.backward(stage1.store, dec_cache, dlogits.data(), ddec_in.data());
        for (int i = 0; i < n; ++i)
            std::copy_n(ddec_in.begin() + static_cast<std::ptrdiff_t>(i) * (F + d_a) + F, d_a,
                        davec.begin() + static_cast<std::ptrdiff_t>(i) * d_a);
        if (cfg.stage2_regress) {
            // variant: additionally pull the text vector toward the stage-1
            // encoder's vector for the same (possibly permuted) pair
            for (int i = 0; i < n; ++i) {
                const auto pt = encode_scene(pres[static_cast<std::size_t>(i)]);
                const auto qt = encode_scene(targets[static_cast<std::size_t>(i)]);
                std::copy(pt.begin(), pt.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F);
                std::copy(qt.begin(), qt.end(), enc_in.begin() + static_cast<std::ptrdiff_t>(i) * 2 * F + F);
            }
            stage1.enc.forward(stage1.store, enc_in.data(), n, enc_cache, avec_tgt.data());
            for (int i = 0; i < n; ++i) {
                for (int d = 0; d < d_a; ++d) {
                    const std::size_t k = static_cast<std::size_t>(i) * d_a + static_cast<std::size_t>(d);
                    const double diff = avec[k] - avec_tgt[k];
                    loss += diff * diff / (n * d_a);
                    davec[k] += 2.0 * diff / (n * d_a);
                }
            }
        }
        nl2.head.backward(nl2.store, head_cache, davec.data(), dh.data());
        nl2.lstm.backward(nl2.store, lstm_cache, dh.data(), demb.data());
        nn::embedding_backward(nl2.store.at("nl2.emb"),
                               std::span<const int>(ids.data(), static_cast<std::size_t>(n) * T), demb.data(), n, T);
        nl2.store.adam_step(lr_now, cfg.beta1, cfg.beta2, cfg.eps);
        if (cfg.stage2_cotrain) stage1.store.adam_step(lr_now, cfg.beta1, cfg.beta2, cfg.eps);
        return loss;
    };

    auto eval_loss = [&](const std::vector<Encoded>& data) -> double {
        if (data.empty()) return 0.0;
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), 0);
        double sum = 0.0;
        for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(B)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(B), idx.size() - at));
            sum += run_batch(data, idx.data() + at, n, false, nullptr) * n;
        }
        return sum / static_cast<double>(idx.size());
    };

    Rng aug_rng = Rng::keyed(cfg.seed, 203);
    Stage2Metrics metrics;
    metrics.episodes_used = static_cast<int>(train_eps.size());
    double best = 1e300;
    std::vector<double> best_nl2, best_dec;
    int bad_epochs = 0;
    for (int epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
        timer.check(cfg.cpu_budget_minutes, "stage-2 training");
        lr_now = scheduled_lr(cfg.lr, epoch, cfg.stage2_epochs);
        auto idx = traindetail::epoch_order(train_data.size(), rng);
        double train_loss = 0.0;
        for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(B)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(B), idx.size() - at));
            train_loss += run_batch(train_data, idx.data() + at, n, true, &aug_rng) * n;
        }
        train_loss /= static_cast<double>(idx.size());
        const double val_loss = val_data.empty() ? train_loss : eval_loss(val_data);
        metrics.epochs.push_back({train_loss, val_loss});
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw std::runtime_error("stage-2: non-finite loss at epoch " + std::to_string(epoch));
        if (val_loss < best - 1e-9) {
            best = val_loss;
            best_nl2 = traindetail::snapshot(nl2.store);
            if (cfg.stage2_cotrain) best_dec = traindetail::snapshot(stage1.store);
            metrics.best_epoch = epoch;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    if (!best_nl2.empty()) traindetail::restore(nl2.store, best_nl2);
    if (!best_dec.empty()) traindetail::restore(stage1.store, best_dec);
    return metrics;
}

// ---------------------------------------------------------------------------
// Embedding dump: one CSV row per episode with its action vector.
// ---------------------------------------------------------------------------

inline void dump_action_embeddings(const Nl2Model& nl2, const std::vector<EpisodeRecord>& episodes,
                                   const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "id,action_type";
    for (int i = 0; i < nl2.action_dim; ++i) f << ",v" << i;
    f << "\n";
    char buf[32];
    for (const auto& e : episodes) {
        f << e.id << "," << e.action_type;
        const auto vec = text_action_vector(nl2, e.action_text);
        for (double v : vec) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            f << "," << buf;
        }
        f << "\n";
    }
}

}  // namespace whatif
