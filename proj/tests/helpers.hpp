#pragma once

// Shared builders and independent oracles for the test suites. The oracles
// re-derive expectations from first principles (brute-force comparison,
// exhaustive enumeration) and must stay independent of the library path
// they check.

#include "whatif/actions.hpp"
#include "whatif/datagen.hpp"
#include "whatif/rng.hpp"
#include "whatif/scene.hpp"

namespace testutil {

using namespace whatif;

inline ObjectNode obj(int slot, Color c, Shape sh, Size sz, Material m, double x, double y, int support = kGround) {
    ObjectNode o;
    o.slot = slot;
    o.color = c;
    o.shape = sh;
    o.size = sz;
    o.material = m;
    o.x = quantize_coord(x);
    o.y = quantize_coord(y);
    o.support = support;
    return o;
}

// Random valid scene with stacks up to height 3 (sample_scene only builds
// height 2), exercising the deeper support-chain paths.
inline SceneGraph random_scene(Rng& rng, int n_max = kDefaultMaxObjects) {
    SceneGraph scene = sample_scene(rng, n_max);
    for (int extra = 0; extra < 2; ++extra) {
        if (!rng.chance(0.3)) continue;
        const auto slots = scene.slots();
        std::vector<std::pair<int, int>> options;  // (rider, top-of-stack base)
        for (int r : slots) {
            if (scene.object(r).support != kGround) continue;
            bool carries = false;
            for (int s : slots)
                if (s != r && scene.object(s).support == r) carries = true;
            if (carries) continue;  // keep riders single
            for (int b : slots) {
                if (b == r) continue;
                const int top = scene.stack_top(b);
                if (top == r) continue;
                if (fits_on(scene.object(r).size, scene.object(top).size)) options.emplace_back(r, top);
            }
        }
        if (options.empty()) continue;
        const auto [r, top] = options[static_cast<std::size_t>(rng.below(options.size()))];
        ObjectNode& rider = scene.object(r);
        rider.support = top;
        rider.x = scene.object(top).x;
        rider.y = scene.object(top).y;
    }
    return scene;
}

// Brute-force relation oracle, straight from the definitions.
inline bool oracle_same_stack(const SceneGraph& s, int a, int b) {
    auto root = [&](int x) {
        while (s.object(x).support != kGround) x = s.object(x).support;
        return x;
    };
    return root(a) == root(b);
}

inline bool oracle_left(const SceneGraph& s, int a, int b) {
    if (oracle_same_stack(s, a, b)) return false;
    return s.object(a).x < s.object(b).x;
}
inline bool oracle_behind(const SceneGraph& s, int a, int b) {
    if (oracle_same_stack(s, a, b)) return false;
    return s.object(a).y > s.object(b).y;
}

// Exhaustive filter oracle: checks every object against every constraint,
// including the relational clause, without touching resolve_referents.
inline std::vector<int> oracle_filter(const SceneGraph& s, const ObjectFilter& f) {
    std::vector<int> out;
    for (int cand : s.slots()) {
        const ObjectNode& o = s.object(cand);
        if (f.attrs.color && o.color != *f.attrs.color) continue;
        if (f.attrs.shape && o.shape != *f.attrs.shape) continue;
        if (f.attrs.size && o.size != *f.attrs.size) continue;
        if (f.attrs.material && o.material != *f.attrs.material) continue;
        if (f.relation) {
            bool ok = false;
            for (int ref : s.slots()) {
                if (ref == cand) continue;
                const ObjectNode& r = s.object(ref);
                if (f.relation->referent.color && r.color != *f.relation->referent.color) continue;
                if (f.relation->referent.shape && r.shape != *f.relation->referent.shape) continue;
                if (f.relation->referent.size && r.size != *f.relation->referent.size) continue;
                if (f.relation->referent.material && r.material != *f.relation->referent.material) continue;
                bool holds = false;
                switch (f.relation->rel) {
                    case Relation::Left: holds = oracle_left(s, cand, ref); break;
                    case Relation::Right: holds = oracle_left(s, ref, cand); break;
                    case Relation::Behind: holds = oracle_behind(s, cand, ref); break;
                    case Relation::Front: holds = oracle_behind(s, ref, cand); break;
                    case Relation::On: holds = s.object(cand).support == ref; break;
                }
                if (holds) {
                    ok = true;
                    break;
                }
            }
            if (!ok) continue;
        }
        out.push_back(cand);
    }
    return out;
}

}  // namespace testutil
