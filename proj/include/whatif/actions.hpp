#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "whatif/scene.hpp"
#include "whatif/scene_json.hpp"

namespace whatif {

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

// Conjunction of optional attribute constraints.
struct AttributeFilter {
    std::optional<Color> color;
    std::optional<Shape> shape;
    std::optional<Size> size;
    std::optional<Material> material;

    bool empty() const { return !color && !shape && !size && !material; }

    bool matches(const ObjectNode& o) const {
        if (color && o.color != *color) return false;
        if (shape && o.shape != *shape) return false;
        if (size && o.size != *size) return false;
        if (material && o.material != *material) return false;
        return true;
    }

    friend bool operator==(const AttributeFilter&, const AttributeFilter&) = default;
};

// Attribute conjunction plus an optional relational clause; the relational
// referent nests one level only (attributes, no further relation).
struct ObjectFilter {
    AttributeFilter attrs;
    struct RelClause {
        Relation rel = Relation::Left;
        AttributeFilter referent;
        friend bool operator==(const RelClause&, const RelClause&) = default;
    };
    std::optional<RelClause> relation;

    bool empty() const { return attrs.empty() && !relation; }

    friend bool operator==(const ObjectFilter&, const ObjectFilter&) = default;
};

// Objects satisfying all constraints, as sorted slot ids. The relational
// clause holds if some object matching the referent filter stands in the
// relation: rel(candidate, referent).
inline std::vector<int> resolve_referents(const SceneGraph& scene, const ObjectFilter& filter) {
    const RelationGraph rg = derive_relations(scene);
    std::vector<int> out;
    for (int s : scene.slots()) {
        if (!filter.attrs.matches(scene.object(s))) continue;
        if (filter.relation) {
            bool found = false;
            for (int r : scene.slots()) {
                if (r == s) continue;
                if (!filter.relation->referent.matches(scene.object(r))) continue;
                if (relation_holds(rg, filter.relation->rel, s, r)) {
                    found = true;
                    break;
                }
            }
            if (!found) continue;
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Action programs
// ---------------------------------------------------------------------------

enum class ActionKind : int { Add, Remove, Change, Move };

inline constexpr std::array<std::string_view, 4> kActionKindNames = {"add", "remove", "change", "move"};

inline std::string_view to_string(ActionKind k) { return kActionKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<ActionKind> parse_action_kind(std::string_view s) {
    return parse_enum<ActionKind>(kActionKindNames, s);
}

// Fully specified attributes of an object to add.
struct ObjectSpec {
    Color color = Color::Red;
    Shape shape = Shape::Cube;
    Size size = Size::Small;
    Material material = Material::Metal;

    friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct Placement {
    Relation rel = Relation::Left;
    ObjectFilter referent;
    bool referent_is_pronoun = false;  // "it": binds to the object acted on by step 1

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct ActionStep {
    ActionKind kind = ActionKind::Remove;
    // add
    std::optional<ObjectSpec> spec;
    std::optional<Placement> place;  // add placement, or move destination
    // remove / change / move target
    std::optional<ObjectFilter> target;
    bool target_is_pronoun = false;
    // change
    std::optional<AttributeKind> attr;
    int value = 0;  // index into attr's vocabulary

    friend bool operator==(const ActionStep&, const ActionStep&) = default;
};

struct ActionProgram {
    std::vector<ActionStep> steps;  // 1 or 2
    bool pronoun = false;           // step 2 contains an "it" reference

    friend bool operator==(const ActionProgram&, const ActionProgram&) = default;
};

enum class ActionErrorKind : int { AmbiguousReferent, SceneFull, Unplaceable, SizeRule };

class ActionError : public std::runtime_error {
public:
    ActionError(ActionErrorKind kind, const std::string& what, int step = -1)
        : std::runtime_error(step >= 0 ? "step " + std::to_string(step) + ": " + what : what),
          kind_(kind),
          step_(step) {}

    ActionErrorKind kind() const { return kind_; }
    int step() const { return step_; }  // -1 outside program execution

    static ActionError at_step(const ActionError& e, int step) {
        return ActionError(e.kind_, e.bare_what_, step);
    }

private:
    ActionErrorKind kind_;
    int step_;
    std::string bare_what_ = what();
};

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kPlacementOffset = 0.15;
inline constexpr double kNudgeStep = 0.05;

inline bool ground_position_free(const SceneGraph& scene, double x, double y, int exclude_slot) {
    for (int s : scene.slots()) {
        if (s == exclude_slot) continue;
        const ObjectNode& o = scene.object(s);
        if (o.support != kGround) continue;
        if (std::hypot(o.x - x, o.y - y) < kMinSeparation) return false;
    }
    return true;
}

// Ground position for a planar relation to the referent: offset 0.15 along
// the relation axis, then nudged 0.05 at a time (alternating +/-) along the
// perpendicular axis until the spot is free and inside [0,1].
inline std::optional<std::pair<double, double>> planar_position(const SceneGraph& scene, Relation rel,
                                                                int referent_slot, int exclude_slot) {
    const ObjectNode& ref = scene.object(referent_slot);
    const bool x_axis = (rel == Relation::Left || rel == Relation::Right);
    double primary = 0.0;
    switch (rel) {
        case Relation::Left: primary = ref.x - kPlacementOffset; break;
        case Relation::Right: primary = ref.x + kPlacementOffset; break;
        case Relation::Front: primary = ref.y - kPlacementOffset; break;
        case Relation::Behind: primary = ref.y + kPlacementOffset; break;
        case Relation::On: return std::nullopt;
    }
    primary = quantize_coord(primary);
    if (primary < 0.0 || primary > 1.0) return std::nullopt;

    const double perp0 = x_axis ? ref.y : ref.x;
    for (int k = 0;; ++k) {
        const double delta = kNudgeStep * ((k + 1) / 2) * (k % 2 == 1 ? 1.0 : -1.0);
        if (k > 0 && std::abs(delta) > 1.0) return std::nullopt;
        const double perp = quantize_coord(perp0 + delta);
        if (perp < 0.0 || perp > 1.0) continue;
        const double x = x_axis ? primary : perp;
        const double y = x_axis ? perp : primary;
        if (ground_position_free(scene, x, y, exclude_slot)) return std::make_pair(x, y);
    }
}

// Exhaustive fallback used only when an object must vacate a base and no
// nearby spot is free: first free cell on the 0.05 grid.
inline std::pair<double, double> grid_position(const SceneGraph& scene, int exclude_slot) {
    for (int xi = 0; xi <= 20; ++xi) {
        for (int yi = 0; yi <= 20; ++yi) {
            const double x = quantize_coord(xi * 0.05);
            const double y = quantize_coord(yi * 0.05);
            if (ground_position_free(scene, x, y, exclude_slot)) return {x, y};
        }
    }
    // unreachable with <= 10 objects: each blocks a 0.08-radius disc
    throw std::logic_error("no free grid cell");
}

// Reposition every stacked object onto its base's coordinates, bases first.
inline void snap_stack_coords(SceneGraph& scene) {
    for (int pass = 0; pass < scene.capacity(); ++pass) {
        bool moved = false;
        for (int s : scene.slots()) {
            ObjectNode& o = scene.object(s);
            if (o.support == kGround || !scene.occupied(o.support)) continue;
            const ObjectNode& base = scene.object(o.support);
            if (o.x != base.x || o.y != base.y) {
                o.x = base.x;
                o.y = base.y;
                moved = true;
            }
        }
        if (!moved) break;
    }
}

// Direct riders of `slot`, ascending.
inline std::vector<int> direct_riders(const SceneGraph& scene, int slot) {
    std::vector<int> out;
    for (int s : scene.slots())
        if (s != slot && scene.object(s).support == slot) out.push_back(s);
    return out;
}

// Topmost object of the stack containing `base`, never walking through
// `exclude` (used while that object is being detached).
inline int stack_top_excluding(const SceneGraph& scene, int base, int exclude) {
    int cur = base;
    for (;;) {
        int rider = -1;
        for (int s : scene.slots()) {
            if (s == exclude || s == cur) continue;
            if (scene.object(s).support == cur) {
                rider = s;
                break;
            }
        }
        if (rider < 0) return cur;
        cur = rider;
    }
}

// When `slot` vacates (is removed or moved), its direct riders land on its
// former support; with several objects removed at once, each survivor lands
// on its nearest surviving ancestor. Coordinates are already shared down the
// column, so nobody moves.
inline void reground_riders(SceneGraph& out, const SceneGraph& original, const std::vector<int>& vacated) {
    auto is_vacated = [&](int s) {
        return std::find(vacated.begin(), vacated.end(), s) != vacated.end();
    };
    for (int s : out.slots()) {
        ObjectNode& o = out.object(s);
        if (o.support == kGround || !is_vacated(o.support)) continue;
        int anchor = original.object(o.support).support;
        while (anchor != kGround && is_vacated(anchor)) anchor = original.object(anchor).support;
        o.support = anchor;
    }
}

// Move `slot` (an object violating the stacking size rule after a change)
// to a free ground position near its base; its own riders follow.
inline void dislodge_to_ground(SceneGraph& scene, int slot) {
    const int base = scene.object(slot).support;
    std::optional<std::pair<double, double>> pos;
    for (Relation r : {Relation::Right, Relation::Left, Relation::Behind, Relation::Front}) {
        pos = planar_position(scene, r, base, slot);
        if (pos) break;
    }
    if (!pos) pos = grid_position(scene, slot);
    ObjectNode& o = scene.object(slot);
    o.support = kGround;
    o.x = pos->first;
    o.y = pos->second;
    snap_stack_coords(scene);  // riders of `slot` follow it
}

inline int resolve_unique(const SceneGraph& scene, const ObjectFilter& filter, const char* role) {
    const auto matches = resolve_referents(scene, filter);
    if (matches.size() != 1)
        throw ActionError(ActionErrorKind::AmbiguousReferent,
                          std::string(role) + " matches " + std::to_string(matches.size()) + " objects");
    return matches.front();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Action execution. Every apply_* is pure: the input scene is copied, and
// the result satisfies validate().
// ---------------------------------------------------------------------------

inline SceneGraph apply_add(const SceneGraph& scene, const ObjectSpec& spec, Relation rel, int referent_slot) {
    SceneGraph out = scene;
    const int slot = out.lowest_free_slot();
    if (slot < 0) throw ActionError(ActionErrorKind::SceneFull, "no free slot");

    ObjectNode o;
    o.slot = slot;
    o.color = spec.color;
    o.shape = spec.shape;
    o.size = spec.size;
    o.material = spec.material;

    if (rel == Relation::On) {
        const int base = detail::stack_top_excluding(out, referent_slot, -1);
        const ObjectNode& b = out.object(base);
        if (!fits_on(spec.size, b.size))
            throw ActionError(ActionErrorKind::Unplaceable, "size rule forbids stacking on slot " + std::to_string(base));
        o.support = base;
        o.x = b.x;
        o.y = b.y;
    } else {
        const auto pos = detail::planar_position(out, rel, referent_slot, -1);
        if (!pos) throw ActionError(ActionErrorKind::Unplaceable, "no collision-free position");
        o.support = kGround;
        o.x = pos->first;
        o.y = pos->second;
    }
    out.put(o);
    return out;
}

inline SceneGraph apply_add(const SceneGraph& scene, const ObjectSpec& spec, const Placement& place) {
    const int ref = detail::resolve_unique(scene, place.referent, "placement referent");
    return apply_add(scene, spec, place.rel, ref);
}

inline SceneGraph apply_remove(const SceneGraph& scene, const ObjectFilter& filter) {
    const auto matches = resolve_referents(scene, filter);
    SceneGraph out = scene;
    if (matches.empty()) return out;
    for (int s : matches) out.erase(s);
    detail::reground_riders(out, scene, matches);
    return out;
}

namespace detail {

inline SceneGraph change_slots(const SceneGraph& scene, const std::vector<int>& slots, AttributeKind attr, int value) {
    if (value < 0 || value >= vocab_size(attr)) throw std::invalid_argument("attribute value out of vocabulary");
    SceneGraph out = scene;
    for (int s : slots) {
        ObjectNode& o = out.object(s);
        switch (attr) {
            case AttributeKind::Color: o.color = static_cast<Color>(value); break;
            case AttributeKind::Shape: o.shape = static_cast<Shape>(value); break;
            case AttributeKind::Size: o.size = static_cast<Size>(value); break;
            case AttributeKind::Material: o.material = static_cast<Material>(value); break;
        }
    }
    if (attr == AttributeKind::Size) {
        // a resize may break the stacking rule anywhere in a stack
        for (;;) {
            int violator = -1;
            for (int s : out.slots()) {
                const ObjectNode& o = out.object(s);
                if (o.support == kGround) continue;
                if (!fits_on(o.size, out.object(o.support).size)) {
                    violator = s;
                    break;
                }
            }
            if (violator < 0) break;
            detail::dislodge_to_ground(out, violator);
        }
    }
    return out;
}

}  // namespace detail

inline SceneGraph apply_change(const SceneGraph& scene, const ObjectFilter& filter, AttributeKind attr, int value) {
    return detail::change_slots(scene, resolve_referents(scene, filter), attr, value);
}

inline SceneGraph apply_move(const SceneGraph& scene, int target, Relation rel, int dest) {
    if (dest == target)
        throw ActionError(ActionErrorKind::AmbiguousReferent, "destination resolves to the moved object");
    SceneGraph out = scene;

    // whatever the target carried stays behind, landing on the target's base
    const int former_support = out.object(target).support;
    for (int r : detail::direct_riders(out, target)) out.object(r).support = former_support;

    ObjectNode& t = out.object(target);
    if (rel == Relation::On) {
        const int base = detail::stack_top_excluding(out, dest, target);
        const ObjectNode& b = out.object(base);
        if (!fits_on(t.size, b.size))
            throw ActionError(ActionErrorKind::SizeRule, "size rule forbids stacking on slot " + std::to_string(base));
        t.support = base;
        t.x = b.x;
        t.y = b.y;
    } else {
        const auto pos = detail::planar_position(out, rel, dest, target);
        if (!pos) throw ActionError(ActionErrorKind::Unplaceable, "no collision-free position");
        t.support = kGround;
        t.x = pos->first;
        t.y = pos->second;
    }
    return out;
}

inline SceneGraph apply_move(const SceneGraph& scene, const ObjectFilter& target_filter, const Placement& dest) {
    const int target = detail::resolve_unique(scene, target_filter, "move target");
    const int ref = detail::resolve_unique(scene, dest.referent, "move destination");
    return apply_move(scene, target, dest.rel, ref);
}

// Applies one step; returns the new scene and the slot acted on (the added,
// changed or moved object; -1 when no single object was acted on).
inline std::pair<SceneGraph, int> apply_step(const SceneGraph& scene, const ActionStep& step, int pronoun_slot) {
    auto require_pronoun = [&] {
        if (pronoun_slot < 0 || !scene.occupied(pronoun_slot))
            throw ActionError(ActionErrorKind::AmbiguousReferent, "\"it\" has no unique antecedent");
    };

    switch (step.kind) {
        case ActionKind::Add: {
            int ref;
            if (step.place->referent_is_pronoun) {
                require_pronoun();
                ref = pronoun_slot;
            } else {
                ref = detail::resolve_unique(scene, step.place->referent, "placement referent");
            }
            SceneGraph out = apply_add(scene, *step.spec, step.place->rel, ref);
            // the new object took the lowest slot that was free
            for (int s : out.slots())
                if (!scene.occupied(s)) return {out, s};
            return {out, -1};
        }
        case ActionKind::Remove: {
            if (step.target_is_pronoun) {
                require_pronoun();
                SceneGraph out = scene;
                out.erase(pronoun_slot);
                detail::reground_riders(out, scene, {pronoun_slot});
                return {out, -1};
            }
            return {apply_remove(scene, *step.target), -1};
        }
        case ActionKind::Change: {
            std::vector<int> matches;
            if (step.target_is_pronoun) {
                require_pronoun();
                matches = {pronoun_slot};
            } else {
                matches = resolve_referents(scene, *step.target);
            }
            SceneGraph out = detail::change_slots(scene, matches, *step.attr, step.value);
            return {out, matches.size() == 1 ? matches.front() : -1};
        }
        case ActionKind::Move: {
            int target;
            if (step.target_is_pronoun) {
                require_pronoun();
                target = pronoun_slot;
            } else {
                target = detail::resolve_unique(scene, *step.target, "move target");
            }
            const int ref = detail::resolve_unique(scene, step.place->referent, "move destination");
            return {apply_move(scene, target, step.place->rel, ref), target};
        }
    }
    throw std::logic_error("unknown action kind");
}

inline SceneGraph execute_action_program(const SceneGraph& scene, const ActionProgram& program) {
    SceneGraph cur = scene;
    int acted = -1;
    for (std::size_t i = 0; i < program.steps.size(); ++i) {
        try {
            auto [next, slot] = apply_step(cur, program.steps[i], acted);
            cur = std::move(next);
            acted = slot;
        } catch (const ActionError& e) {
            throw ActionError::at_step(e, static_cast<int>(i + 1));
        }
    }
    return cur;
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

inline std::string attribute_filter_fields(const AttributeFilter& f) {
    std::string out;
    auto field = [&](std::string_view key, std::string_view val) {
        if (!out.empty()) out += ",";
        out += "\"" + std::string(key) + "\":\"" + std::string(val) + "\"";
    };
    if (f.color) field("color", to_string(*f.color));
    if (f.shape) field("shape", to_string(*f.shape));
    if (f.size) field("size", to_string(*f.size));
    if (f.material) field("material", to_string(*f.material));
    return out;
}

inline std::string serialize_filter(const ObjectFilter& f) {
    std::string out = "{" + attribute_filter_fields(f.attrs);
    if (f.relation) {
        if (out.size() > 1) out += ",";
        out += "\"relation\":{\"rel\":\"" + std::string(to_string(f.relation->rel)) + "\",\"referent\":{" +
               attribute_filter_fields(f.relation->referent) + "}}";
    }
    return out + "}";
}

inline std::string serialize_action_program(const ActionProgram& p) {
    std::string out = "{\"steps\":[";
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
        const ActionStep& st = p.steps[i];
        if (i) out += ",";
        out += "{\"kind\":\"" + std::string(to_string(st.kind)) + "\"";
        switch (st.kind) {
            case ActionKind::Add:
                out += ",\"object\":{\"color\":\"" + std::string(to_string(st.spec->color)) + "\",\"shape\":\"" +
                       std::string(to_string(st.spec->shape)) + "\",\"size\":\"" + std::string(to_string(st.spec->size)) +
                       "\",\"material\":\"" + std::string(to_string(st.spec->material)) + "\"}";
                out += ",\"place\":{\"relation\":\"" + std::string(to_string(st.place->rel)) + "\",\"referent\":";
                out += st.place->referent_is_pronoun ? "\"it\"" : serialize_filter(st.place->referent);
                out += "}";
                break;
            case ActionKind::Remove:
                out += ",\"filter\":";
                out += st.target_is_pronoun ? "\"it\"" : serialize_filter(*st.target);
                break;
            case ActionKind::Change:
                out += ",\"filter\":";
                out += st.target_is_pronoun ? "\"it\"" : serialize_filter(*st.target);
                out += ",\"attribute\":\"" + std::string(to_string(*st.attr)) + "\"";
                out += ",\"value\":\"" + std::string(attribute_value_name(*st.attr, st.value)) + "\"";
                break;
            case ActionKind::Move:
                out += ",\"filter\":";
                out += st.target_is_pronoun ? "\"it\"" : serialize_filter(*st.target);
                out += ",\"destination\":{\"relation\":\"" + std::string(to_string(st.place->rel)) + "\",\"referent\":";
                out += st.place->referent_is_pronoun ? "\"it\"" : serialize_filter(st.place->referent);
                out += "}";
                break;
        }
        out += "}";
    }
    out += "],\"pronoun\":";
    out += p.pronoun ? "true" : "false";
    return out + "}";
}

inline AttributeFilter attribute_filter_from_json(const nlohmann::json& j) {
    AttributeFilter f;
    if (j.contains("color")) {
        auto v = parse_color(j["color"].get<std::string>());
        if (!v) throw ParseError("unknown color in filter");
        f.color = *v;
    }
    if (j.contains("shape")) {
        auto v = parse_shape(j["shape"].get<std::string>());
        if (!v) throw ParseError("unknown shape in filter");
        f.shape = *v;
    }
    if (j.contains("size")) {
        auto v = parse_size(j["size"].get<std::string>());
        if (!v) throw ParseError("unknown size in filter");
        f.size = *v;
    }
    if (j.contains("material")) {
        auto v = parse_material(j["material"].get<std::string>());
        if (!v) throw ParseError("unknown material in filter");
        f.material = *v;
    }
    return f;
}

inline ObjectFilter filter_from_json(const nlohmann::json& j) {
    ObjectFilter f;
    f.attrs = attribute_filter_from_json(j);
    if (j.contains("relation")) {
        const auto& jr = j["relation"];
        ObjectFilter::RelClause rc;
        auto rel = parse_relation(jr.at("rel").get<std::string>());
        if (!rel) throw ParseError("unknown relation in filter");
        rc.rel = *rel;
        rc.referent = attribute_filter_from_json(jr.at("referent"));
        f.relation = rc;
    }
    if (f.empty()) throw ParseError("filter has no constraints");
    return f;
}

inline ActionProgram action_program_from_json(const nlohmann::json& j) {
    ActionProgram p;
    p.pronoun = j.value("pronoun", false);
    for (const auto& js : j.at("steps")) {
        ActionStep st;
        auto kind = parse_action_kind(js.at("kind").get<std::string>());
        if (!kind) throw ParseError("unknown action kind");
        st.kind = *kind;
        auto read_target = [&](const nlohmann::json& jt) {
            if (jt.is_string() && jt.get<std::string>() == "it")
                st.target_is_pronoun = true;
            else
                st.target = filter_from_json(jt);
        };
        switch (st.kind) {
            case ActionKind::Add: {
                const auto& jo = js.at("object");
                ObjectSpec spec;
                spec.color = *parse_color(jo.at("color").get<std::string>());
                spec.shape = *parse_shape(jo.at("shape").get<std::string>());
                spec.size = *parse_size(jo.at("size").get<std::string>());
                spec.material = *parse_material(jo.at("material").get<std::string>());
                st.spec = spec;
                const auto& jp = js.at("place");
                Placement pl;
                pl.rel = *parse_relation(jp.at("relation").get<std::string>());
                if (jp.at("referent").is_string() && jp["referent"].get<std::string>() == "it")
                    pl.referent_is_pronoun = true;
                else
                    pl.referent = filter_from_json(jp.at("referent"));
                st.place = pl;
                break;
            }
            case ActionKind::Remove:
                read_target(js.at("filter"));
                break;
            case ActionKind::Change: {
                read_target(js.at("filter"));
                auto a = parse_enum<AttributeKind>(kAttributeNames, js.at("attribute").get<std::string>());
                if (!a) throw ParseError("unknown attribute");
                st.attr = *a;
                const std::string vname = js.at("value").get<std::string>();
                bool found = false;
                for (int v = 0; v < vocab_size(*a); ++v) {
                    if (attribute_value_name(*a, v) == vname) {
                        st.value = v;
                        found = true;
                        break;
                    }
                }
                if (!found) throw ParseError("value \"" + vname + "\" not in vocabulary of " + std::string(to_string(*a)));
                break;
            }
            case ActionKind::Move: {
                read_target(js.at("filter"));
                const auto& jp = js.at("destination");
                Placement pl;
                pl.rel = *parse_relation(jp.at("relation").get<std::string>());
                if (jp.at("referent").is_string() && jp["referent"].get<std::string>() == "it")
                    pl.referent_is_pronoun = true;
                else
                    pl.referent = filter_from_json(jp.at("referent"));
                st.place = pl;
                break;
            }
        }
        p.steps.push_back(std::move(st));
    }
    if (p.steps.empty() || p.steps.size() > 2) throw ParseError("action program must have 1 or 2 steps");
    return p;
}

}  // namespace whatif
