#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "whatif/scene.hpp"

namespace whatif {

// Per-slot tensor block, in order:
//   [0]        existence bit / pre-sigmoid score
//   [1..8]     color one-hot
//   [9..11]    shape one-hot
//   [12..13]   size one-hot
//   [14..15]   material one-hot
//   [16..17]   x, y
//   [18..]     support one-hot: GROUND first, then slots 0..n_max-1
// Slot identity is preserved: block i always describes slot i, so action
// effects look like slot-aligned edits to the learner.
struct SceneTensorLayout {
    int n_max = kDefaultMaxObjects;

    static constexpr int kExist = 0;
    static constexpr int kColor = 1;
    static constexpr int kShape = 9;
    static constexpr int kSize = 12;
    static constexpr int kMaterial = 14;
    static constexpr int kCoord = 16;
    static constexpr int kSupport = 18;

    int slot_width() const { return kSupport + n_max + 1; }  // 29 for n_max = 10
    int size() const { return n_max * slot_width(); }        // 290 for n_max = 10
    int slot_offset(int slot) const { return slot * slot_width(); }
};

inline std::vector<double> encode_scene(const SceneGraph& scene) {
    const SceneTensorLayout L{scene.capacity()};
    std::vector<double> t(static_cast<std::size_t>(L.size()), 0.0);
    for (int s : scene.slots()) {
        const ObjectNode& o = scene.object(s);
        double* b = t.data() + L.slot_offset(s);
        b[SceneTensorLayout::kExist] = 1.0;
        b[SceneTensorLayout::kColor + static_cast<int>(o.color)] = 1.0;
        b[SceneTensorLayout::kShape + static_cast<int>(o.shape)] = 1.0;
        b[SceneTensorLayout::kSize + static_cast<int>(o.size)] = 1.0;
        b[SceneTensorLayout::kMaterial + static_cast<int>(o.material)] = 1.0;
        b[SceneTensorLayout::kCoord + 0] = o.x;
        b[SceneTensorLayout::kCoord + 1] = o.y;
        b[SceneTensorLayout::kSupport + (o.support == kGround ? 0 : o.support + 1)] = 1.0;
    }
    return t;
}

namespace detail {

inline int argmax(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;  // ties keep the lowest index
    return best;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace detail

// Total, deterministic readout of decoder logits into a scene-graph.
// Invalid predicted supports (self, dangling, cyclic, size rule) reset to
// GROUND; stacked objects snap onto their base's coordinates. The result
// satisfies every scene invariant except min-sep, and may be empty.
inline SceneGraph discretize(std::span<const double> logits, int n_max = kDefaultMaxObjects) {
    const SceneTensorLayout L{n_max};
    SceneGraph scene(n_max);
    for (int s = 0; s < n_max; ++s) {
        const double* b = logits.data() + L.slot_offset(s);
        if (b[SceneTensorLayout::kExist] <= 0.0) continue;  // sigmoid(z) > 0.5 <=> z > 0
        ObjectNode o;
        o.slot = s;
        o.color = static_cast<Color>(detail::argmax(b + SceneTensorLayout::kColor, kNumColors));
        o.shape = static_cast<Shape>(detail::argmax(b + SceneTensorLayout::kShape, kNumShapes));
        o.size = static_cast<Size>(detail::argmax(b + SceneTensorLayout::kSize, kNumSizes));
        o.material = static_cast<Material>(detail::argmax(b + SceneTensorLayout::kMaterial, kNumMaterials));
        o.x = quantize_coord(detail::clamp01(b[SceneTensorLayout::kCoord + 0]));
        o.y = quantize_coord(detail::clamp01(b[SceneTensorLayout::kCoord + 1]));
        const int sup = detail::argmax(b + SceneTensorLayout::kSupport, n_max + 1);
        o.support = (sup == 0) ? kGround : sup - 1;
        scene.put(o);
    }

    // support repair: self or dangling first
    for (int s : scene.slots()) {
        ObjectNode& o = scene.object(s);
        if (o.support != kGround && (o.support == s || !scene.occupied(o.support))) o.support = kGround;
    }
    // cycles: ground the lowest non-rooted slot until every chain roots
    for (;;) {
        std::vector<int> bad;
        for (int s : scene.slots())
            if (scene.stack_root(s) == -1) bad.push_back(s);
        if (bad.empty()) break;
        scene.object(bad.front()).support = kGround;
    }
    // size rule
    for (int s : scene.slots()) {
        ObjectNode& o = scene.object(s);
        if (o.support != kGround && !fits_on(o.size, scene.object(o.support).size)) o.support = kGround;
    }
    // stacked objects share their base's position
    for (int pass = 0; pass < n_max; ++pass) {
        bool moved = false;
        for (int s : scene.slots()) {
            ObjectNode& o = scene.object(s);
            if (o.support == kGround) continue;
            const ObjectNode& base = scene.object(o.support);
            if (o.x != base.x || o.y != base.y) {
                o.x = base.x;
                o.y = base.y;
                moved = true;
            }
        }
        if (!moved) break;
    }
    return scene;
}

// One-hot tensor -> logits with the given margin; the round trip
// discretize(lift_to_logits(encode_scene(s))) recovers s. Used by tests and
// the perfect-prediction loss limit.
inline std::vector<double> lift_to_logits(std::span<const double> tensor, int n_max = kDefaultMaxObjects,
                                          double margin = 30.0) {
    const SceneTensorLayout L{n_max};
    std::vector<double> out(tensor.begin(), tensor.end());
    for (int s = 0; s < n_max; ++s) {
        double* b = out.data() + L.slot_offset(s);
        b[SceneTensorLayout::kExist] = (b[SceneTensorLayout::kExist] > 0.5) ? margin : -margin;
        auto lift_group = [&](int off, int n) {
            for (int i = 0; i < n; ++i) b[off + i] = b[off + i] > 0.5 ? margin : 0.0;
        };
        lift_group(SceneTensorLayout::kColor, kNumColors);
        lift_group(SceneTensorLayout::kShape, kNumShapes);
        lift_group(SceneTensorLayout::kSize, kNumSizes);
        lift_group(SceneTensorLayout::kMaterial, kNumMaterials);
        lift_group(SceneTensorLayout::kSupport, n_max + 1);
        // coordinates pass through
    }
    return out;
}

}  // namespace whatif
