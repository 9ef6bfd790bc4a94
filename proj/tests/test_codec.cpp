#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "whatif/tensor_codec.hpp"

using namespace whatif;
using testutil::obj;

TEST_CASE("encoding layout: empty slots zero, occupied slots one-hot") {
    SceneGraph s;
    s.put(obj(3, Color::Red, Shape::Cube, Size::Small, Material::Metal, 0.5, 0.5));
    const auto t = encode_scene(s);
    const SceneTensorLayout L{s.capacity()};
    REQUIRE(static_cast<int>(t.size()) == L.size());
    REQUIRE(L.size() == 290);
    REQUIRE(L.slot_width() == 29);

    // slot 0 is empty: an all-zero block
    for (int k = 0; k < L.slot_width(); ++k) CHECK(t[static_cast<std::size_t>(k)] == 0.0);

    const double* b = t.data() + L.slot_offset(3);
    CHECK(b[SceneTensorLayout::kExist] == 1.0);
    CHECK(b[SceneTensorLayout::kColor + static_cast<int>(Color::Red)] == 1.0);
    CHECK(b[SceneTensorLayout::kShape + static_cast<int>(Shape::Cube)] == 1.0);
    CHECK(b[SceneTensorLayout::kSize + static_cast<int>(Size::Small)] == 1.0);
    CHECK(b[SceneTensorLayout::kMaterial + static_cast<int>(Material::Metal)] == 1.0);
    CHECK(b[SceneTensorLayout::kCoord + 0] == 0.5);
    CHECK(b[SceneTensorLayout::kCoord + 1] == 0.5);
    CHECK(b[SceneTensorLayout::kSupport + 0] == 1.0);  // GROUND

    double sum = 0.0;
    for (int k = 0; k < L.slot_width(); ++k) sum += b[k];
    CHECK(sum == Approx(1.0 + 4 * 1.0 + 0.5 + 0.5 + 1.0));  // existence + 4 one-hots + coords + support
}

TEST_CASE("encode is injective on distinct scenes") {
    Rng rng(41);
    for (int i = 0; i < 200; ++i) {
        const SceneGraph a = testutil::random_scene(rng);
        const SceneGraph b = testutil::random_scene(rng);
        if (a == b) continue;
        REQUIRE(encode_scene(a) != encode_scene(b));
    }
}

TEST_CASE("discretize(lift(encode)) recovers the scene") {
    Rng rng(43);
    for (int i = 0; i < 300; ++i) {
        const SceneGraph s = testutil::random_scene(rng);
        const auto logits = lift_to_logits(encode_scene(s), s.capacity());
        const SceneGraph back = discretize(logits, s.capacity());
        REQUIRE(scenes_equivalent(back, s));
    }
}

TEST_CASE("all-negative existence produces an empty scene") {
    const SceneTensorLayout L{kDefaultMaxObjects};
    std::vector<double> logits(static_cast<std::size_t>(L.size()), -5.0);
    const SceneGraph out = discretize(logits, kDefaultMaxObjects);
    CHECK(out.object_count() == 0);
}

TEST_CASE("support pointing at an empty slot resets to ground") {
    SceneGraph s;
    s.put(obj(0, Color::Red, Shape::Cube, Size::Big, Material::Metal, 0.2, 0.2));
    s.put(obj(1, Color::Blue, Shape::Cube, Size::Small, Material::Metal, 0.8, 0.8));
    auto logits = lift_to_logits(encode_scene(s), s.capacity());
    const SceneTensorLayout L{s.capacity()};
    // corrupt slot 1's support to point at empty slot 5
    double* sup = logits.data() + L.slot_offset(1) + SceneTensorLayout::kSupport;
    for (int k = 0; k <= L.n_max; ++k) sup[k] = 0.0;
    sup[5 + 1] = 30.0;
    const SceneGraph out = discretize(logits, s.capacity());
    CHECK(out.object(1).support == kGround);
}

TEST_CASE("cyclic predicted supports are repaired deterministically") {
    SceneGraph s;
    s.put(obj(0, Color::Red, Shape::Cube, Size::Small, Material::Metal, 0.2, 0.2));
    s.put(obj(1, Color::Blue, Shape::Cube, Size::Small, Material::Metal, 0.8, 0.8));
    auto logits = lift_to_logits(encode_scene(s), s.capacity());
    const SceneTensorLayout L{s.capacity()};
    auto point_support = [&](int slot, int target) {
        double* sup = logits.data() + L.slot_offset(slot) + SceneTensorLayout::kSupport;
        for (int k = 0; k <= L.n_max; ++k) sup[k] = 0.0;
        sup[target + 1] = 30.0;
    };
    point_support(0, 1);
    point_support(1, 0);
    const SceneGraph out = discretize(logits, s.capacity());
    CHECK(out.object(0).support == kGround);  // lowest slot grounded first
    CHECK(out.object(1).support == 0);
    const auto violations = validate(out);
    for (const auto& v : violations) CHECK(v.rule == "min-sep");
}

TEST_CASE("discretize is total on adversarial logits") {
    Rng rng(47);
    const SceneTensorLayout L{kDefaultMaxObjects};
    for (int i = 0; i < 500; ++i) {
        std::vector<double> logits(static_cast<std::size_t>(L.size()));
        for (auto& v : logits) {
            const int r = rng.uniform_int(0, 9);
            if (r == 0) v = 1e12;
            else if (r == 1) v = -1e12;
            else v = rng.uniform(-8.0, 8.0);
        }
        const SceneGraph out = discretize(logits, kDefaultMaxObjects);
        const SceneGraph out2 = discretize(logits, kDefaultMaxObjects);
        REQUIRE(out == out2);
        for (const auto& v : validate(out)) {
            const bool allowed = v.rule == "min-sep" || v.rule == "empty-scene";
            REQUIRE(allowed);
        }
    }
}
