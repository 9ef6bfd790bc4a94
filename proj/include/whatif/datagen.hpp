#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "whatif/actions.hpp"
#include "whatif/questions.hpp"
#include "whatif/rng.hpp"
#include "whatif/scene.hpp"
#include "whatif/scene_json.hpp"
#include "whatif/text.hpp"

namespace whatif {

// ---------------------------------------------------------------------------
// Episode records and dataset configuration
// ---------------------------------------------------------------------------

struct EpisodeRecord {
    std::string id;
    SceneGraph scene{kDefaultMaxObjects};
    std::string action_text;
    ActionProgram action_program;
    std::string question_text;
    QuestionProgram question_program;
    SceneGraph post_scene{kDefaultMaxObjects};
    Answer answer;
    std::string action_type;     // "remove", or "add+move" for 2-hop pairs
    std::string reasoning_type;  // "count" ... "query_attribute", "and", "or", "not"
};

struct DatasetConfig {
    std::uint64_t seed = 0;
    int train = 10000;
    int val = 1000;
    int test = 1000;
    int two_hop_ta = 500;
    int two_hop_qh = 500;
    int n_max = kDefaultMaxObjects;
};

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names = {"train", "val", "test", "2hop_ta", "2hop_qh"};
    return names;
}

// ---------------------------------------------------------------------------
// Scene sampling
// ---------------------------------------------------------------------------

class SamplingExhausted : public std::runtime_error {
public:
    SamplingExhausted() : std::runtime_error("scene sampling exhausted after 1000 rejections") {}
};

namespace gen {

inline ObjectNode random_object(Rng& rng, int slot) {
    ObjectNode o;
    o.slot = slot;
    o.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    o.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    o.size = static_cast<Size>(rng.uniform_int(0, kNumSizes - 1));
    o.material = static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1));
    o.support = kGround;
    return o;
}

inline SceneGraph sample_scene_n(Rng& rng, int count, int n_max) {
    SceneGraph scene(n_max);
    int rejections = 0;
    for (int i = 0; i < count; ++i) {
        ObjectNode o = random_object(rng, i);
        for (;;) {
            o.x = quantize_coord(rng.uniform());
            o.y = quantize_coord(rng.uniform());
            bool free = true;
            for (int s : scene.slots()) {
                const ObjectNode& p = scene.object(s);
                if (std::hypot(p.x - o.x, p.y - o.y) < kMinSeparation) {
                    free = false;
                    break;
                }
            }
            if (free) break;
            if (++rejections >= 1000) throw SamplingExhausted();
        }
        scene.put(o);
    }
    // at most one stack of height 2
    if (count >= 2 && rng.chance(0.2)) {
        std::vector<std::pair<int, int>> pairs;  // (rider, base)
        for (int r : scene.slots())
            for (int b : scene.slots())
                if (r != b && fits_on(scene.object(r).size, scene.object(b).size)) pairs.emplace_back(r, b);
        if (!pairs.empty()) {
            const auto [r, b] = pairs[static_cast<std::size_t>(rng.below(pairs.size()))];
            ObjectNode& rider = scene.object(r);
            const ObjectNode& base = scene.object(b);
            rider.support = b;
            rider.x = base.x;
            rider.y = base.y;
        }
    }
    return scene;
}

}  // namespace gen

// Uniform 3..n_max objects, uniform attributes, rejection-sampled positions;
// a height-2 stack with probability 0.2. Retries with fewer objects if
// position sampling is exhausted.
inline SceneGraph sample_scene(Rng& rng, int n_max = kDefaultMaxObjects, std::optional<int> forced_count = {}) {
    int count = forced_count ? *forced_count : rng.uniform_int(3, n_max);
    for (;;) {
        try {
            return gen::sample_scene_n(rng, count, n_max);
        } catch (const SamplingExhausted&) {
            if (count <= 1) throw;
            --count;
        }
    }
}

// ---------------------------------------------------------------------------
// Natural-language realization
// ---------------------------------------------------------------------------

namespace gen {

inline const std::map<std::string, std::vector<std::string>>& synonym_table() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"sphere", {"ball"}},          {"spheres", {"balls"}},
        {"cube", {"block"}},           {"cubes", {"blocks"}},
        {"big", {"large"}},            {"small", {"tiny"}},
        {"metal", {"metallic", "shiny"}}, {"rubber", {"matte"}},
    };
    return table;
}

// per-token synonym substitution with probability 0.3
inline std::string synonymize(const std::string& word, Rng& rng) {
    const auto& table = synonym_table();
    auto it = table.find(word);
    if (it == table.end() || !rng.chance(0.3)) return word;
    return it->second[static_cast<std::size_t>(rng.below(it->second.size()))];
}

inline std::string plural_noun(const std::string& noun) { return noun + "s"; }

// "small red metal cube(s)" / "blue thing(s)"
inline std::string attribute_np(const AttributeFilter& f, bool plural, Rng& rng) {
    std::string out;
    auto push = [&](const std::string& w) {
        if (!out.empty()) out += " ";
        out += synonymize(w, rng);
    };
    if (f.size) push(std::string(to_string(*f.size)));
    if (f.color) push(std::string(to_string(*f.color)));
    if (f.material) push(std::string(to_string(*f.material)));
    std::string noun = f.shape ? std::string(to_string(*f.shape)) : (rng.chance(0.5) ? "object" : "thing");
    if (plural) noun = plural_noun(noun);
    push(noun);
    return out;
}

inline std::string object_np(const ObjectSpec& spec, Rng& rng) {
    AttributeFilter f;
    f.color = spec.color;
    f.shape = spec.shape;
    f.size = spec.size;
    f.material = spec.material;
    return attribute_np(f, false, rng);
}

inline std::string relation_phrase(Relation r, Rng& rng) {
    switch (r) {
        case Relation::Left: return rng.chance(0.5) ? "to the left of" : "left of";
        case Relation::Right: return rng.chance(0.5) ? "to the right of" : "right of";
        case Relation::Front: return "in front of";
        case Relation::Behind: return "behind";
        case Relation::On: return rng.chance(0.5) ? "on" : "on top of";
    }
    return "";
}

inline std::string filter_np(const ObjectFilter& f, bool plural, Rng& rng) {
    std::string out = attribute_np(f.attrs, plural, rng);
    if (f.relation)
        out += " " + relation_phrase(f.relation->rel, rng) + " the " + attribute_np(f.relation->referent, false, rng);
    return out;
}

}  // namespace gen

// ---------------------------------------------------------------------------
// Action sampling
// ---------------------------------------------------------------------------

namespace gen {

// Smallest random attribute subset of `slot`'s attributes (plus an optional
// relational clause) that uniquely matches it; nullopt if the object has an
// indistinguishable twin.
inline std::optional<ObjectFilter> unique_filter(Rng& rng, const SceneGraph& scene, int slot,
                                                 bool allow_shape = true, bool allow_color = true,
                                                 bool allow_size = true, bool allow_material = true) {
    const ObjectNode& o = scene.object(slot);
    std::vector<int> attrs;  // 0 color 1 shape 2 size 3 material
    if (allow_color) attrs.push_back(0);
    if (allow_shape) attrs.push_back(1);
    if (allow_size) attrs.push_back(2);
    if (allow_material) attrs.push_back(3);
    if (attrs.empty()) return std::nullopt;

    std::vector<std::vector<int>> subsets;
    const int n = static_cast<int>(attrs.size());
    for (int bits = 1; bits < (1 << n); ++bits) {
        std::vector<int> sub;
        for (int i = 0; i < n; ++i)
            if (bits & (1 << i)) sub.push_back(attrs[static_cast<std::size_t>(i)]);
        subsets.push_back(std::move(sub));
    }
    std::sort(subsets.begin(), subsets.end(),
              [](const auto& a, const auto& b) { return a.size() < b.size(); });
    // shuffle within each subset size for surface variety
    for (std::size_t lo = 0; lo < subsets.size();) {
        std::size_t hi = lo;
        while (hi < subsets.size() && subsets[hi].size() == subsets[lo].size()) ++hi;
        std::vector<std::vector<int>> block(subsets.begin() + static_cast<std::ptrdiff_t>(lo),
                                            subsets.begin() + static_cast<std::ptrdiff_t>(hi));
        rng.shuffle(block);
        std::copy(block.begin(), block.end(), subsets.begin() + static_cast<std::ptrdiff_t>(lo));
        lo = hi;
    }

    for (const auto& sub : subsets) {
        ObjectFilter f;
        for (int a : sub) {
            if (a == 0) f.attrs.color = o.color;
            if (a == 1) f.attrs.shape = o.shape;
            if (a == 2) f.attrs.size = o.size;
            if (a == 3) f.attrs.material = o.material;
        }
        if (resolve_referents(scene, f).size() == 1) return f;
    }
    return std::nullopt;
}

// Non-empty attribute subset of `slot`'s attributes; matches at least `slot`.
inline ObjectFilter subset_filter(Rng& rng, const SceneGraph& scene, int slot) {
    const ObjectNode& o = scene.object(slot);
    ObjectFilter f;
    for (;;) {
        f = ObjectFilter{};
        if (rng.chance(0.5)) f.attrs.color = o.color;
        if (rng.chance(0.35)) f.attrs.shape = o.shape;
        if (rng.chance(0.25)) f.attrs.size = o.size;
        if (rng.chance(0.25)) f.attrs.material = o.material;
        if (!f.attrs.empty()) return f;
    }
}

inline int pick_slot(Rng& rng, const SceneGraph& scene) {
    const auto slots = scene.slots();
    return slots[static_cast<std::size_t>(rng.below(slots.size()))];
}

struct SampledStep {
    ActionStep step;
    std::string text;  // no trailing period
};

inline std::optional<SampledStep> sample_remove_step(Rng& rng, const SceneGraph& scene) {
    const int slot = pick_slot(rng, scene);
    ObjectFilter f = subset_filter(rng, scene, slot);

    // occasionally constrain by a relation to a unique referent
    if (rng.chance(0.15)) {
        const RelationGraph rg = derive_relations(scene);
        const int ref = pick_slot(rng, scene);
        if (ref != slot) {
            std::vector<Relation> holding;
            for (Relation r : {Relation::Left, Relation::Right, Relation::Front, Relation::Behind})
                if (relation_holds(rg, r, slot, ref)) holding.push_back(r);
            auto ref_filter = unique_filter(rng, scene, ref);
            if (!holding.empty() && ref_filter && !ref_filter->relation) {
                ObjectFilter::RelClause rc;
                rc.rel = holding[static_cast<std::size_t>(rng.below(holding.size()))];
                rc.referent = ref_filter->attrs;
                f.relation = rc;
            }
        }
    }

    const auto matches = resolve_referents(scene, f);
    if (matches.empty()) return std::nullopt;

    ActionStep st;
    st.kind = ActionKind::Remove;
    st.target = f;

    static const std::vector<std::string> verbs = {"remove", "take away", "delete", "discard", "take out", "get rid of"};
    const std::string det = matches.size() > 1 ? (rng.chance(0.5) ? "all " : "every ") : "the ";
    const bool plural = matches.size() > 1 && det == "all ";
    return SampledStep{st, rng.pick(verbs) + " " + det + filter_np(f, plural, rng)};
}

inline std::optional<SampledStep> sample_add_step(Rng& rng, const SceneGraph& scene) {
    if (scene.lowest_free_slot() < 0) return std::nullopt;
    for (int attempt = 0; attempt < 20; ++attempt) {
        ObjectSpec spec;
        spec.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
        spec.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
        spec.size = static_cast<Size>(rng.uniform_int(0, kNumSizes - 1));
        spec.material = static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1));
        const int ref = pick_slot(rng, scene);
        const auto ref_filter = unique_filter(rng, scene, ref);
        if (!ref_filter) continue;
        Placement place;
        place.rel = static_cast<Relation>(rng.uniform_int(0, 4));
        place.referent = *ref_filter;
        try {
            apply_add(scene, spec, place.rel, ref);
        } catch (const ActionError&) {
            continue;
        }
        ActionStep st;
        st.kind = ActionKind::Add;
        st.spec = spec;
        st.place = place;
        static const std::vector<std::string> verbs = {"add", "put", "place", "insert", "set down", "drop"};
        const std::string text = rng.pick(verbs) + " a " + object_np(spec, rng) + " " +
                                 relation_phrase(place.rel, rng) + " the " + filter_np(*ref_filter, false, rng);
        return SampledStep{st, text};
    }
    return std::nullopt;
}

inline std::string change_text(Rng& rng, AttributeKind attr, int value, const std::string& target_phrase) {
    const std::string val = synonymize(std::string(attribute_value_name(attr, value)), rng);
    switch (attr) {
        case AttributeKind::Color:
            switch (rng.uniform_int(0, 3)) {
                case 0: return "paint " + target_phrase + " " + val;
                case 1: return "color " + target_phrase + " " + val;
                case 2: return "change the color of " + target_phrase + " to " + val;
                default: return "make " + target_phrase + " " + val;
            }
        case AttributeKind::Material:
            switch (rng.uniform_int(0, 2)) {
                case 0: return "make " + target_phrase + " " + val;
                case 1: return "change the material of " + target_phrase + " to " + val;
                default: return "turn " + target_phrase + " into " + val;
            }
        case AttributeKind::Size:
            switch (rng.uniform_int(0, 2)) {
                case 0: return "make " + target_phrase + " " + val;
                case 1: return "change the size of " + target_phrase + " to " + val;
                default: return "resize " + target_phrase + " to " + val;
            }
        case AttributeKind::Shape:
            switch (rng.uniform_int(0, 2)) {
                case 0: return "turn " + target_phrase + " into a " + val;
                case 1: return "change the shape of " + target_phrase + " to a " + val;
                default: return "make " + target_phrase + " a " + val;
            }
    }
    return "";
}

inline std::optional<SampledStep> sample_change_step(Rng& rng, const SceneGraph& scene) {
    const int slot = pick_slot(rng, scene);
    const ObjectFilter f = subset_filter(rng, scene, slot);
    const auto matches = resolve_referents(scene, f);
    if (matches.empty()) return std::nullopt;

    const auto attr = static_cast<AttributeKind>(rng.uniform_int(0, 3));
    // prefer a value no matched object already has
    std::vector<int> candidates;
    for (int v = 0; v < vocab_size(attr); ++v) {
        bool current = false;
        for (int m : matches)
            if (qdetail::attribute_of(scene.object(m), attr) == v) current = true;
        if (!current) candidates.push_back(v);
    }
    if (candidates.empty()) return std::nullopt;
    const int value = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];

    ActionStep st;
    st.kind = ActionKind::Change;
    st.target = f;
    st.attr = attr;
    st.value = value;

    const bool plural = matches.size() > 1;
    const std::string target_phrase =
        (plural ? (rng.chance(0.5) ? "all " : "every ") : "the ") +
        filter_np(f, plural && rng.chance(0.7), rng);
    return SampledStep{st, change_text(rng, attr, value, target_phrase)};
}

inline std::optional<SampledStep> sample_move_step(Rng& rng, const SceneGraph& scene) {
    if (scene.slots().size() < 2) return std::nullopt;
    for (int attempt = 0; attempt < 20; ++attempt) {
        const int target = pick_slot(rng, scene);
        const int dest = pick_slot(rng, scene);
        if (target == dest) continue;
        const auto tf = unique_filter(rng, scene, target);
        const auto df = unique_filter(rng, scene, dest);
        if (!tf || !df) continue;
        Placement place;
        place.rel = static_cast<Relation>(rng.uniform_int(0, 4));
        place.referent = *df;
        try {
            apply_move(scene, target, place.rel, dest);
        } catch (const ActionError&) {
            continue;
        }
        ActionStep st;
        st.kind = ActionKind::Move;
        st.target = tf;
        st.place = place;
        static const std::vector<std::string> verbs = {"move", "put", "place", "shift", "relocate", "set"};
        const std::string text = rng.pick(verbs) + " the " + filter_np(*tf, false, rng) + " " +
                                 relation_phrase(place.rel, rng) + " the " + filter_np(*df, false, rng);
        return SampledStep{st, text};
    }
    return std::nullopt;
}

inline std::optional<SampledStep> sample_step(Rng& rng, const SceneGraph& scene, ActionKind kind) {
    switch (kind) {
        case ActionKind::Add: return sample_add_step(rng, scene);
        case ActionKind::Remove: return sample_remove_step(rng, scene);
        case ActionKind::Change: return sample_change_step(rng, scene);
        case ActionKind::Move: return sample_move_step(rng, scene);
    }
    return std::nullopt;
}

// Pronoun-flavored second steps acting on the object produced by step 1.
inline std::optional<SampledStep> sample_pronoun_step(Rng& rng, const SceneGraph& scene, ActionKind kind,
                                                      int acted_slot) {
    switch (kind) {
        case ActionKind::Change: {
            const auto attr = static_cast<AttributeKind>(rng.uniform_int(0, 3));
            std::vector<int> candidates;
            for (int v = 0; v < vocab_size(attr); ++v)
                if (qdetail::attribute_of(scene.object(acted_slot), attr) != v) candidates.push_back(v);
            const int value = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
            ActionStep st;
            st.kind = ActionKind::Change;
            st.target_is_pronoun = true;
            st.attr = attr;
            st.value = value;
            return SampledStep{st, change_text(rng, attr, value, "it")};
        }
        case ActionKind::Move: {
            for (int attempt = 0; attempt < 20; ++attempt) {
                const int dest = pick_slot(rng, scene);
                if (dest == acted_slot) continue;
                const auto df = unique_filter(rng, scene, dest);
                if (!df) continue;
                Placement place;
                place.rel = static_cast<Relation>(rng.uniform_int(0, 4));
                place.referent = *df;
                try {
                    apply_move(scene, acted_slot, place.rel, dest);
                } catch (const ActionError&) {
                    continue;
                }
                ActionStep st;
                st.kind = ActionKind::Move;
                st.target_is_pronoun = true;
                st.place = place;
                static const std::vector<std::string> verbs = {"move", "put", "place", "shift"};
                return SampledStep{st, rng.pick(verbs) + " it " + relation_phrase(place.rel, rng) + " the " +
                                           filter_np(*df, false, rng)};
            }
            return std::nullopt;
        }
        case ActionKind::Add: {
            // "... then put a <object> on it"
            for (int attempt = 0; attempt < 10; ++attempt) {
                ObjectSpec spec;
                spec.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
                spec.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
                spec.size = static_cast<Size>(rng.uniform_int(0, kNumSizes - 1));
                spec.material = static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1));
                Placement place;
                place.rel = static_cast<Relation>(rng.uniform_int(0, 4));
                place.referent_is_pronoun = true;
                try {
                    apply_add(scene, spec, place.rel, acted_slot);
                } catch (const ActionError&) {
                    continue;
                }
                ActionStep st;
                st.kind = ActionKind::Add;
                st.spec = spec;
                st.place = place;
                static const std::vector<std::string> verbs = {"add", "put", "place"};
                return SampledStep{st, rng.pick(verbs) + " a " + object_np(spec, rng) + " " +
                                           relation_phrase(place.rel, rng) + " it"};
            }
            return std::nullopt;
        }
        case ActionKind::Remove: return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace gen

struct SampledAction {
    ActionProgram program;
    std::string text;
    std::string type_label;
    SceneGraph post_scene{kDefaultMaxObjects};
};

// One-hop action of the given kind; nullopt when the scene admits none.
// Actions that would empty the scene are rejected here: the emitted
// post-scene must itself be a valid scene.
inline std::optional<SampledAction> sample_action(Rng& rng, const SceneGraph& scene, ActionKind kind) {
    auto st = gen::sample_step(rng, scene, kind);
    if (!st) return std::nullopt;
    SampledAction out;
    out.program.steps = {st->step};
    out.text = st->text + " .";
    out.type_label = std::string(to_string(kind));
    try {
        out.post_scene = execute_action_program(scene, out.program);
    } catch (const ActionError&) {
        return std::nullopt;
    }
    if (!validate(out.post_scene).empty()) return std::nullopt;
    return out;
}

// Two chained actions; `first`/`second` give the execution order of the
// unordered kind pair. Step 2 may bind "it" to step 1's object.
inline std::optional<SampledAction> sample_action_2hop(Rng& rng, const SceneGraph& scene, ActionKind first,
                                                       ActionKind second) {
    auto s1 = gen::sample_step(rng, scene, first);
    if (!s1) return std::nullopt;

    SceneGraph mid(scene.capacity());
    int acted = -1;
    try {
        std::tie(mid, acted) = apply_step(scene, s1->step, -1);
    } catch (const ActionError&) {
        return std::nullopt;
    }
    if (mid.slots().empty()) return std::nullopt;

    std::optional<gen::SampledStep> s2;
    bool pronoun = false;
    if (acted >= 0 && mid.occupied(acted) && second != ActionKind::Remove && rng.chance(0.5)) {
        s2 = gen::sample_pronoun_step(rng, mid, second, acted);
        pronoun = s2.has_value();
    }
    if (!s2) s2 = gen::sample_step(rng, mid, second);
    if (!s2) return std::nullopt;

    SampledAction out;
    out.program.steps = {s1->step, s2->step};
    out.program.pronoun = pronoun;
    out.text = s1->text + (rng.chance(0.5) ? " then " : " and then ") + s2->text + " .";
    // canonical unordered label, kind-enum order
    const ActionKind lo = std::min(first, second);
    const ActionKind hi = std::max(first, second);
    out.type_label = std::string(to_string(lo)) + "+" + std::string(to_string(hi));
    try {
        out.post_scene = execute_action_program(scene, out.program);
    } catch (const ActionError&) {
        return std::nullopt;
    }
    if (!validate(out.post_scene).empty()) return std::nullopt;
    return out;
}

// ---------------------------------------------------------------------------
// Question sampling
// ---------------------------------------------------------------------------

enum class ReasoningType : int { Count, Exist, CompareInteger, CompareAttribute, QueryAttribute, And, Or, Not };

inline constexpr std::array<std::string_view, 8> kReasoningNames = {
    "count", "exist", "compare_integer", "compare_attribute", "query_attribute", "and", "or", "not"};

inline std::string_view to_string(ReasoningType r) { return kReasoningNames[static_cast<std::size_t>(r)]; }

struct SampledQuestion {
    QuestionProgram program;
    std::string text;
    Answer answer;
};

namespace gen {

// filter chain over scene() in fixed nesting order (color outermost)
inline QuestionNode filter_chain(const AttributeFilter& f) {
    QuestionNode node = q_scene();
    if (f.shape) node = q_filter(AttributeKind::Shape, static_cast<int>(*f.shape), std::move(node));
    if (f.material) node = q_filter(AttributeKind::Material, static_cast<int>(*f.material), std::move(node));
    if (f.size) node = q_filter(AttributeKind::Size, static_cast<int>(*f.size), std::move(node));
    if (f.color) node = q_filter(AttributeKind::Color, static_cast<int>(*f.color), std::move(node));
    return node;
}

// attribute subset of a random object, or a fully random filter (which may
// match nothing -- zero counts and "no" answers are legitimate)
inline AttributeFilter question_filter(Rng& rng, const SceneGraph& scene) {
    if (rng.chance(0.3)) {
        AttributeFilter f;
        for (;;) {
            if (rng.chance(0.5)) f.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
            if (rng.chance(0.35)) f.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
            if (rng.chance(0.25)) f.size = static_cast<Size>(rng.uniform_int(0, kNumSizes - 1));
            if (rng.chance(0.25)) f.material = static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1));
            if (!f.empty()) return f;
        }
    }
    return subset_filter(rng, scene, pick_slot(rng, scene)).attrs;
}

inline std::optional<SampledQuestion> sample_count(Rng& rng, const SceneGraph& scene) {
    QuestionNode program;
    std::string text;
    if (rng.chance(0.2)) {
        // how many objects are <rel> the <referent>?
        const int ref = pick_slot(rng, scene);
        const auto rf = unique_filter(rng, scene, ref);
        if (!rf) return std::nullopt;
        const auto rel = static_cast<Relation>(rng.uniform_int(0, 3));
        program = q_count(q_relate(rel, q_unique(filter_chain(rf->attrs))));
        text = "how many " + std::string(rng.chance(0.5) ? "objects" : "things") + " are " +
               relation_phrase(rel, rng) + " the " + attribute_np(rf->attrs, false, rng) + " ?";
    } else {
        const AttributeFilter f = question_filter(rng, scene);
        program = q_count(filter_chain(f));
        switch (rng.uniform_int(0, 3)) {
            case 0: text = "how many " + attribute_np(f, true, rng) + " are there ?"; break;
            case 1: text = "what number of " + attribute_np(f, true, rng) + " are there ?"; break;
            case 2: text = "how many " + attribute_np(f, true, rng) + " are in the scene ?"; break;
            default: text = "how many " + attribute_np(f, true, rng) + " do you see ?"; break;
        }
    }
    const Answer ans = execute_question(scene, program);
    if (ans.index() > 9) return std::nullopt;
    // never emit a count whose true value exceeds the digit range
    if (execute_set(scene, program.args[0]).size() > 9) return std::nullopt;
    return SampledQuestion{program, text, ans};
}

inline std::optional<SampledQuestion> sample_exist(Rng& rng, const SceneGraph& scene) {
    const AttributeFilter f = question_filter(rng, scene);
    const QuestionNode program = q_exist(filter_chain(f));
    std::string text;
    switch (rng.uniform_int(0, 3)) {
        case 0: text = "is there a " + attribute_np(f, false, rng) + " ?"; break;
        case 1: text = "are there any " + attribute_np(f, true, rng) + " ?"; break;
        case 2: text = "does the scene contain a " + attribute_np(f, false, rng) + " ?"; break;
        default: text = "is there any " + attribute_np(f, false, rng) + " ?"; break;
    }
    return SampledQuestion{program, text, execute_question(scene, program)};
}

inline std::optional<SampledQuestion> sample_compare_integer(Rng& rng, const SceneGraph& scene) {
    const AttributeFilter a = question_filter(rng, scene);
    const AttributeFilter b = question_filter(rng, scene);
    if (a == b) return std::nullopt;
    QuestionNode ca = q_count(filter_chain(a));
    QuestionNode cb = q_count(filter_chain(b));
    QuestionNode program;
    std::string text;
    switch (rng.uniform_int(0, 2)) {
        case 0:
            program = {QFn::GreaterThan, {std::move(ca), std::move(cb)}, ""};
            text = "are there more " + attribute_np(a, true, rng) + " than " + attribute_np(b, true, rng) + " ?";
            break;
        case 1:
            program = {QFn::LessThan, {std::move(ca), std::move(cb)}, ""};
            text = "are there fewer " + attribute_np(a, true, rng) + " than " + attribute_np(b, true, rng) + " ?";
            break;
        default:
            program = {QFn::EqualInteger, {std::move(ca), std::move(cb)}, ""};
            text = "are there the same number of " + attribute_np(a, true, rng) + " as " +
                   attribute_np(b, true, rng) + " ?";
            break;
    }
    return SampledQuestion{program, text, execute_question(scene, program)};
}

inline std::optional<SampledQuestion> sample_compare_attribute(Rng& rng, const SceneGraph& scene) {
    if (scene.slots().size() < 2) return std::nullopt;
    const auto attr = static_cast<AttributeKind>(rng.uniform_int(0, 3));
    for (int attempt = 0; attempt < 10; ++attempt) {
        const int sa = pick_slot(rng, scene);
        const int sb = pick_slot(rng, scene);
        if (sa == sb) continue;
        // identify both objects without naming the compared attribute
        const auto fa = unique_filter(rng, scene, sa, attr != AttributeKind::Shape, attr != AttributeKind::Color,
                                      attr != AttributeKind::Size, attr != AttributeKind::Material);
        const auto fb = unique_filter(rng, scene, sb, attr != AttributeKind::Shape, attr != AttributeKind::Color,
                                      attr != AttributeKind::Size, attr != AttributeKind::Material);
        if (!fa || !fb) continue;
        QuestionNode program = q_equal_attr(attr, q_query(attr, q_unique(filter_chain(fa->attrs))),
                                            q_query(attr, q_unique(filter_chain(fb->attrs))));
        const std::string na = attribute_np(fa->attrs, false, rng);
        const std::string nb = attribute_np(fb->attrs, false, rng);
        std::string text;
        switch (rng.uniform_int(0, 2)) {
            case 0:
                text = "does the " + na + " have the same " + std::string(to_string(attr)) + " as the " + nb + " ?";
                break;
            case 1:
                text = "is the " + std::string(to_string(attr)) + " of the " + na + " the same as the " + nb + " ?";
                break;
            default:
                text = "do the " + na + " and the " + nb + " have the same " + std::string(to_string(attr)) + " ?";
                break;
        }
        return SampledQuestion{program, text, execute_question(scene, program)};
    }
    return std::nullopt;
}

inline std::optional<SampledQuestion> sample_query_attribute(Rng& rng, const SceneGraph& scene) {
    const auto attr = static_cast<AttributeKind>(rng.uniform_int(0, 3));
    for (int attempt = 0; attempt < 10; ++attempt) {
        const int slot = pick_slot(rng, scene);
        const auto f = unique_filter(rng, scene, slot, attr != AttributeKind::Shape, attr != AttributeKind::Color,
                                     attr != AttributeKind::Size, attr != AttributeKind::Material);
        if (!f) continue;
        QuestionNode program = q_query(attr, q_unique(filter_chain(f->attrs)));
        const std::string np = attribute_np(f->attrs, false, rng);
        std::string text;
        switch (attr) {
            case AttributeKind::Color:
                text = rng.chance(0.5) ? "what color is the " + np + " ?" : "what is the color of the " + np + " ?";
                break;
            case AttributeKind::Shape:
                text = rng.chance(0.5) ? "what shape is the " + np + " ?" : "what is the shape of the " + np + " ?";
                break;
            case AttributeKind::Size:
                text = rng.chance(0.5) ? "what size is the " + np + " ?" : "what is the size of the " + np + " ?";
                break;
            case AttributeKind::Material:
                text = rng.chance(0.5) ? "what material is the " + np + " ?" : "what is the " + np + " made of ?";
                break;
        }
        return SampledQuestion{program, text, execute_question(scene, program)};
    }
    return std::nullopt;
}

// one-attribute predicates for the logical-combination questions
inline std::pair<AttributeFilter, std::string> single_predicate(Rng& rng, const SceneGraph& scene) {
    AttributeFilter f;
    const ObjectNode& o = scene.object(pick_slot(rng, scene));
    std::string word;
    switch (rng.uniform_int(0, 3)) {
        case 0:
            f.color = rng.chance(0.3) ? static_cast<Color>(rng.uniform_int(0, kNumColors - 1)) : o.color;
            word = std::string(to_string(*f.color));
            break;
        case 1:
            f.shape = rng.chance(0.3) ? static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1)) : o.shape;
            word = synonymize(std::string(to_string(*f.shape)), rng);
            break;
        case 2:
            f.size = rng.chance(0.3) ? static_cast<Size>(rng.uniform_int(0, kNumSizes - 1)) : o.size;
            word = synonymize(std::string(to_string(*f.size)), rng);
            break;
        default:
            f.material = rng.chance(0.3) ? static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1)) : o.material;
            word = synonymize(std::string(to_string(*f.material)), rng);
            break;
    }
    return {f, word};
}

inline std::optional<SampledQuestion> sample_logical(Rng& rng, const SceneGraph& scene, ReasoningType rt) {
    const auto [fa, wa] = single_predicate(rng, scene);
    QuestionNode program;
    std::string combo;
    if (rt == ReasoningType::Not) {
        program = q_negate(q_scene(), filter_chain(fa));
        combo = "not " + wa;
    } else {
        const auto [fb, wb] = single_predicate(rng, scene);
        if (fa == fb) return std::nullopt;
        if (rt == ReasoningType::And) {
            program = q_intersect(filter_chain(fa), filter_chain(fb));
            combo = "both " + wa + " and " + wb;
        } else {
            program = q_union(filter_chain(fa), filter_chain(fb));
            combo = "either " + wa + " or " + wb;
        }
    }
    const std::string noun = rng.chance(0.5) ? "objects" : "things";
    if (rng.chance(0.6)) {
        QuestionNode counted = q_count(program);
        if (execute_set(scene, program).size() > 9) return std::nullopt;
        const std::string text = rng.chance(0.5) ? "how many " + noun + " are " + combo + " ?"
                                                 : "what number of " + noun + " are " + combo + " ?";
        return SampledQuestion{counted, text, execute_question(scene, counted)};
    }
    QuestionNode existed = q_exist(program);
    const std::string text = "is there " + std::string(rng.chance(0.5) ? "an object" : "a thing") + " that is " +
                             combo + " ?";
    return SampledQuestion{existed, text, execute_question(scene, existed)};
}

}  // namespace gen

inline std::optional<SampledQuestion> sample_question(Rng& rng, const SceneGraph& post_scene, ReasoningType rt) {
    if (post_scene.slots().empty()) return std::nullopt;
    switch (rt) {
        case ReasoningType::Count: return gen::sample_count(rng, post_scene);
        case ReasoningType::Exist: return gen::sample_exist(rng, post_scene);
        case ReasoningType::CompareInteger: return gen::sample_compare_integer(rng, post_scene);
        case ReasoningType::CompareAttribute: return gen::sample_compare_attribute(rng, post_scene);
        case ReasoningType::QueryAttribute: return gen::sample_query_attribute(rng, post_scene);
        case ReasoningType::And:
        case ReasoningType::Or:
        case ReasoningType::Not: return gen::sample_logical(rng, post_scene, rt);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Split generation
// ---------------------------------------------------------------------------

enum class SplitMode : int { OneHop, TwoHopAction, TwoHopQuestion };

inline const std::array<std::pair<ActionKind, ActionKind>, 6>& two_hop_pairs() {
    static const std::array<std::pair<ActionKind, ActionKind>, 6> pairs = {{
        {ActionKind::Add, ActionKind::Remove},
        {ActionKind::Add, ActionKind::Change},
        {ActionKind::Add, ActionKind::Move},
        {ActionKind::Remove, ActionKind::Change},
        {ActionKind::Remove, ActionKind::Move},
        {ActionKind::Change, ActionKind::Move},
    }};
    return pairs;
}

// Deterministic single-episode generation from the (seed, split, index)
// substream; regenerating one episode equals the same episode of a full run.
inline EpisodeRecord generate_episode(std::uint64_t seed, int split_id, const std::string& split_name, int index,
                                      SplitMode mode, int n_max = kDefaultMaxObjects) {
    Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(split_id) + 1, static_cast<std::uint64_t>(index));

    const auto kind = static_cast<ActionKind>(index % 4);
    const auto pair = two_hop_pairs()[static_cast<std::size_t>(index % 6)];
    const auto reasoning = (mode == SplitMode::TwoHopQuestion)
                               ? static_cast<ReasoningType>(5 + index % 3)
                               : static_cast<ReasoningType>(index % 5);

    for (int attempt = 0; attempt < 500; ++attempt) {
        const SceneGraph scene = sample_scene(rng, n_max);
        std::optional<SampledAction> action;
        if (mode == SplitMode::TwoHopAction) {
            const bool swap = rng.chance(0.5);
            action = sample_action_2hop(rng, scene, swap ? pair.second : pair.first,
                                        swap ? pair.first : pair.second);
        } else {
            action = sample_action(rng, scene, kind);
        }
        if (!action) continue;
        const auto question = sample_question(rng, action->post_scene, reasoning);
        if (!question) continue;

        EpisodeRecord rec;
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%06d", split_name.c_str(), index);
        rec.id = idbuf;
        rec.scene = scene;
        rec.action_text = action->text;
        rec.action_program = action->program;
        rec.question_text = question->text;
        rec.question_program = question->program;
        rec.post_scene = action->post_scene;
        rec.answer = question->answer;
        rec.action_type = action->type_label;
        rec.reasoning_type = std::string(to_string(reasoning));
        return rec;
    }
    throw std::runtime_error("episode generation exhausted: " + split_name + " #" + std::to_string(index));
}

inline std::string serialize_episode(const EpisodeRecord& rec) {
    std::string out = "{\"id\":\"" + json_escape(rec.id) + "\"";
    out += ",\"scene\":" + serialize_scene(rec.scene);
    out += ",\"action_text\":\"" + json_escape(rec.action_text) + "\"";
    out += ",\"action_program\":" + serialize_action_program(rec.action_program);
    out += ",\"question_text\":\"" + json_escape(rec.question_text) + "\"";
    out += ",\"question_program\":" + serialize_question_program(rec.question_program);
    out += ",\"post_scene\":" + serialize_scene(rec.post_scene);
    out += ",\"answer\":\"" + rec.answer.text() + "\"";
    out += ",\"action_type\":\"" + rec.action_type + "\"";
    out += ",\"reasoning_type\":\"" + rec.reasoning_type + "\"";
    return out + "}";
}

inline EpisodeRecord episode_from_json(const nlohmann::json& j, int n_max = kDefaultMaxObjects) {
    EpisodeRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.scene = scene_from_json(j.at("scene"), n_max);
    rec.action_text = j.at("action_text").get<std::string>();
    rec.action_program = action_program_from_json(j.at("action_program"));
    rec.question_text = j.at("question_text").get<std::string>();
    rec.question_program = question_program_from_json(j.at("question_program"));
    rec.post_scene = scene_from_json(j.at("post_scene"), n_max);
    const auto ans = Answer::parse(j.at("answer").get<std::string>());
    if (!ans) throw ParseError("unknown answer \"" + j.at("answer").get<std::string>() + "\"");
    rec.answer = *ans;
    rec.action_type = j.at("action_type").get<std::string>();
    rec.reasoning_type = j.at("reasoning_type").get<std::string>();
    return rec;
}

inline std::vector<EpisodeRecord> load_episodes(const std::string& path, int n_max = kDefaultMaxObjects) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<EpisodeRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(episode_from_json(nlohmann::json::parse(line), n_max));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// Writes one JSONL file per split into out_dir; byte-identical given the
// same config.
inline void generate_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    const std::array<std::pair<int, SplitMode>, 5> plan = {{
        {cfg.train, SplitMode::OneHop},
        {cfg.val, SplitMode::OneHop},
        {cfg.test, SplitMode::OneHop},
        {cfg.two_hop_ta, SplitMode::TwoHopAction},
        {cfg.two_hop_qh, SplitMode::TwoHopQuestion},
    }};
    for (int split_id = 0; split_id < 5; ++split_id) {
        const std::string& name = split_names()[static_cast<std::size_t>(split_id)];
        const auto [count, mode] = plan[static_cast<std::size_t>(split_id)];
        const std::string path = out_dir + "/" + name + ".jsonl";
        std::ofstream f(path, std::ios::binary);  // LF line endings everywhere
        if (!f) throw std::runtime_error("cannot write " + path);
        for (int i = 0; i < count; ++i)
            f << serialize_episode(generate_episode(cfg.seed, split_id, name, i, mode, cfg.n_max)) << "\n";
        if (!f) throw std::runtime_error("write failed: " + path);
    }
}

}  // namespace whatif
