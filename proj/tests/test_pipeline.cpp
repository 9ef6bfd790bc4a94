#include <catch2/catch.hpp>

#include <filesystem>

#include "helpers.hpp"
#include "whatif/evaluate.hpp"
#include "whatif/pipeline.hpp"

using namespace whatif;

namespace {

// small generated corpus shared by the training-path tests
const std::vector<EpisodeRecord>& corpus() {
    static const std::vector<EpisodeRecord> eps = [] {
        std::vector<EpisodeRecord> out;
        for (int i = 0; i < 120; ++i)
            out.push_back(generate_episode(404, 0, "train", i, SplitMode::OneHop));
        return out;
    }();
    return eps;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.stage1_pairs = 40;
    cfg.stage1_epochs = 3;
    cfg.stage2_epochs = 3;
    cfg.patience = 3;
    return cfg;
}

}  // namespace

TEST_CASE("balanced pair selection splits the budget per kind") {
    Rng rng(1);
    const auto pairs = select_balanced_pairs(corpus(), 40, rng);
    REQUIRE(pairs.size() == 40);
    std::map<std::string, int> counts;
    for (const auto& p : pairs) ++counts[p.action_type];
    REQUIRE(counts.size() == 4);
    for (const auto& [k, n] : counts) CHECK(n == 10);
}

TEST_CASE("encode_action_pair is deterministic with the configured length") {
    TrainConfig cfg = tiny_config();
    cfg.action_dim = 17;
    Rng init(3);
    const Stage1Model model = Stage1Model::build(cfg, init);
    const auto& e = corpus().front();
    const auto v1 = encode_action_pair(model, e.scene, e.post_scene);
    const auto v2 = encode_action_pair(model, e.scene, e.post_scene);
    CHECK(v1 == v2);
    CHECK(static_cast<int>(v1.size()) == 17);
}

TEST_CASE("a single pair is memorized to near-zero loss") {
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.action_dim = 32;
    cfg.stage1_epochs = 500;
    cfg.patience = 500;  // no early stop: pure memorization check
    cfg.lr = 3e-3;
    cfg.augment_permute = false;
    cfg.stage1_vector_noise = 0.0;
    // a remove episode: its post-scene carries no placement-derived coordinate
    // ties, so exact-match through discretize is attainable as well
    const auto& e = corpus()[1];
    REQUIRE(e.action_type == "remove");
    const std::vector<ScenePair> pairs = {{e.scene, e.post_scene, e.action_type}};
    Rng init = Rng::keyed(cfg.seed, 11);
    Stage1Model model = Stage1Model::build(cfg, init);
    CpuTimer timer;
    const auto metrics = train_stage1(model, pairs, cfg, timer);
    REQUIRE_FALSE(metrics.epochs.empty());
    CHECK(metrics.epochs.back().train_loss < 1e-2);
    CHECK(metrics.heldout_scene_accuracy == 100.0);
}

TEST_CASE("stage-2 keeps the frozen stage-1 parameters byte-identical") {
    TrainConfig cfg = tiny_config();
    const TrainData data{corpus(), std::vector<EpisodeRecord>(corpus().begin(), corpus().begin() + 20)};
    Rng init1 = Rng::keyed(cfg.seed, 11);
    Stage1Model stage1 = Stage1Model::build(cfg, init1);
    const nn::ParamStore before = stage1.store;

    std::vector<std::string> texts;
    for (const auto& e : data.train) texts.push_back(e.action_text);
    Rng init2 = Rng::keyed(cfg.seed, 12);
    Nl2Model nl2 = Nl2Model::build(cfg, TokenVocab::build(texts), init2);
    CpuTimer timer;
    train_stage2(nl2, stage1, data.train, data.val, cfg, timer);
    CHECK(stage1.store.values_equal(before));
    for (const auto& p : stage1.store.params()) CHECK(p.frozen);
}

TEST_CASE("the two stages share one loss surface") {
    // with the text model pinned to emit exactly the stage-1 action vector,
    // the stage-2 loss equals the stage-1 loss on that episode
    TrainConfig cfg = tiny_config();
    cfg.action_dim = 12;
    Rng init = Rng::keyed(cfg.seed, 11);
    Stage1Model stage1 = Stage1Model::build(cfg, init);
    const auto& e = corpus().front();
    const auto vec = encode_action_pair(stage1, e.scene, e.post_scene);

    std::vector<std::string> texts = {e.action_text};
    Rng init2 = Rng::keyed(cfg.seed, 12);
    Nl2Model nl2 = Nl2Model::build(cfg, TokenVocab::build(texts), init2);
    nn::Param& W = nl2.store.at("nl2.head.W0");
    std::fill(W.w.begin(), W.w.end(), 0.0);
    nn::Param& b = nl2.store.at("nl2.head.b0");
    b.w = vec;

    const auto emitted = text_action_vector(nl2, e.action_text);
    REQUIRE(emitted == vec);
    const double stage1_loss = decode_scene_loss(stage1, e.scene, vec, e.post_scene, cfg.lambda_coord);
    const double stage2_loss = decode_scene_loss(stage1, e.scene, emitted, e.post_scene, cfg.lambda_coord);
    CHECK(stage1_loss == stage2_loss);  // exact, not approximate
}

TEST_CASE("predicted scenes always pass validation modulo min-sep") {
    TrainConfig cfg = tiny_config();
    Rng init1 = Rng::keyed(cfg.seed, 11);
    Stage1Model stage1 = Stage1Model::build(cfg, init1);  // untrained: adversarial predictions
    std::vector<std::string> texts;
    for (const auto& e : corpus()) texts.push_back(e.action_text);
    Rng init2 = Rng::keyed(cfg.seed, 12);
    Nl2Model nl2 = Nl2Model::build(cfg, TokenVocab::build(texts), init2);
    for (int i = 0; i < 50; ++i) {
        const auto& e = corpus()[static_cast<std::size_t>(i)];
        const SceneGraph pred = predict_post_scene(stage1, nl2, e.scene, e.action_text);
        for (const auto& v : validate(pred)) {
            const bool allowed = v.rule == "min-sep" || v.rule == "empty-scene";
            REQUIRE(allowed);
        }
        const SceneGraph again = predict_post_scene(stage1, nl2, e.scene, e.action_text);
        REQUIRE(pred == again);
    }
}

TEST_CASE("answering against the oracle post-scene is exact") {
    for (const auto& e : corpus()) {
        REQUIRE(execute_question(e.post_scene, e.question_program) == e.answer);
    }
}

TEST_CASE("model bundles save and load") {
    TrainConfig cfg = tiny_config();
    cfg.action_dim = 9;
    Rng init1 = Rng::keyed(cfg.seed, 11);
    Stage1Model stage1 = Stage1Model::build(cfg, init1);
    std::vector<std::string> texts = {"remove the cube ."};
    Rng init2 = Rng::keyed(cfg.seed, 12);
    Nl2Model nl2 = Nl2Model::build(cfg, TokenVocab::build(texts), init2);

    std::filesystem::create_directories("bundle_test");
    save_models(stage1, nl2, "bundle_test");
    auto [s1, n2] = load_models("bundle_test");
    CHECK(s1.store.values_equal(stage1.store));
    CHECK(n2.store.values_equal(nl2.store));
    CHECK(s1.action_dim == 9);
    CHECK(n2.vocab == nl2.vocab);
    const auto& e = corpus().front();
    CHECK(predict_post_scene(s1, n2, e.scene, e.action_text) ==
          predict_post_scene(stage1, nl2, e.scene, e.action_text));
    std::filesystem::remove_all("bundle_test");
}

TEST_CASE("eval_split on an oracle-equivalent pipeline") {
    // a pipeline that predicts the oracle post-scene scores 100 on both axes;
    // here we emulate it by querying eval internals directly
    const auto eps = std::vector<EpisodeRecord>(corpus().begin(), corpus().begin() + 40);
    int qa = 0;
    for (const auto& e : eps)
        if (execute_question(e.post_scene, e.question_program) == e.answer) ++qa;
    CHECK(qa == 40);
    const double mb = majority_baseline(eps);
    CHECK(mb > 0.0);
    CHECK(mb <= 100.0);
}

TEST_CASE("config files override training settings") {
    TrainConfig cfg;
    std::ofstream f("cfg_test.txt");
    f << "# comment\n"
      << "action_dim = 50\n"
      << "lr=0.01\n"
      << "stage2_cotrain = true\n\n";
    f.close();
    load_config_file(cfg, "cfg_test.txt");
    CHECK(cfg.action_dim == 50);
    CHECK(cfg.lr == Approx(0.01));
    CHECK(cfg.stage2_cotrain);
    std::ofstream g("cfg_bad.txt");
    g << "nonsense = 1\n";
    g.close();
    CHECK_THROWS_AS(load_config_file(cfg, "cfg_bad.txt"), std::invalid_argument);
    std::remove("cfg_test.txt");
    std::remove("cfg_bad.txt");
}
