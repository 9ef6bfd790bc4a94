#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "whatif/vocab.hpp"

namespace whatif {

inline constexpr int kDefaultMaxObjects = 10;
inline constexpr double kMinSeparation = 0.08;
inline constexpr int kGround = -1;

// All coordinates in the system are kept on a 1e-6 grid so that printing
// with six decimals and reading back is an exact identity.
inline double quantize_coord(double v) { return std::nearbyint(v * 1e6) / 1e6; }

struct ObjectNode {
    int slot = 0;
    Color color = Color::Red;
    Shape shape = Shape::Cube;
    Size size = Size::Small;
    Material material = Material::Metal;
    double x = 0.0;  // increases rightward
    double y = 0.0;  // increases toward "behind"
    int support = kGround;  // kGround or the slot id of the base object

    friend bool operator==(const ObjectNode&, const ObjectNode&) = default;
};

// Symbolic scene: a fixed bank of object slots, each possibly occupied.
// Slot identity is meaningful and survives action execution.
class SceneGraph {
public:
    explicit SceneGraph(int capacity = kDefaultMaxObjects) : slots_(static_cast<std::size_t>(capacity)) {}

    int capacity() const { return static_cast<int>(slots_.size()); }

    int object_count() const {
        int n = 0;
        for (const auto& s : slots_)
            if (s) ++n;
        return n;
    }

    bool occupied(int slot) const {
        return slot >= 0 && slot < capacity() && slots_[static_cast<std::size_t>(slot)].has_value();
    }

    const ObjectNode& object(int slot) const { return *slots_.at(static_cast<std::size_t>(slot)); }
    ObjectNode& object(int slot) { return *slots_.at(static_cast<std::size_t>(slot)); }

    std::vector<int> slots() const {
        std::vector<int> out;
        for (int i = 0; i < capacity(); ++i)
            if (slots_[static_cast<std::size_t>(i)]) out.push_back(i);
        return out;
    }

    void put(const ObjectNode& node) {
        slots_.at(static_cast<std::size_t>(node.slot)) = node;
    }

    void erase(int slot) { slots_.at(static_cast<std::size_t>(slot)).reset(); }

    int lowest_free_slot() const {
        for (int i = 0; i < capacity(); ++i)
            if (!slots_[static_cast<std::size_t>(i)]) return i;
        return -1;
    }

    // Slot of the topmost object in `slot`'s stack (walks direct riders;
    // the lowest-id rider is followed if several exist).
    int stack_top(int slot) const {
        int cur = slot;
        for (;;) {
            int rider = -1;
            for (int s : slots()) {
                if (s != cur && object(s).support == cur) {
                    rider = s;
                    break;
                }
            }
            if (rider < 0) return cur;
            cur = rider;
        }
    }

    // GROUND-rooted ancestor of the stack containing `slot`; -1 on a cycle.
    int stack_root(int slot) const {
        int cur = slot;
        for (int guard = 0; guard <= capacity(); ++guard) {
            const ObjectNode& o = object(cur);
            if (o.support == kGround) return cur;
            if (!occupied(o.support)) return -1;
            cur = o.support;
        }
        return -1;
    }

    friend bool operator==(const SceneGraph&, const SceneGraph&) = default;

private:
    std::vector<std::optional<ObjectNode>> slots_;
};

// ---------------------------------------------------------------------------
// Spatial relations
// ---------------------------------------------------------------------------

// Pairwise planar relations plus the direct support target per object.
// left(a,b) <=> a.x < b.x strictly; behind(a,b) <=> a.y > b.y strictly.
// Members of the same stack carry no planar relation to each other.
struct RelationGraph {
    int capacity = 0;
    std::vector<std::uint8_t> left, right, front, behind;  // capacity*capacity, row-major [a][b]
    std::vector<int> on;                                   // kGround or base slot; -2 for empty slots

    bool pair(const std::vector<std::uint8_t>& m, int a, int b) const {
        return m[static_cast<std::size_t>(a * capacity + b)] != 0;
    }
    bool is_left(int a, int b) const { return pair(left, a, b); }
    bool is_right(int a, int b) const { return pair(right, a, b); }
    bool is_front(int a, int b) const { return pair(front, a, b); }
    bool is_behind(int a, int b) const { return pair(behind, a, b); }

    friend bool operator==(const RelationGraph&, const RelationGraph&) = default;
};

inline RelationGraph derive_relations(const SceneGraph& scene) {
    const int cap = scene.capacity();
    RelationGraph rg;
    rg.capacity = cap;
    const std::size_t n2 = static_cast<std::size_t>(cap * cap);
    rg.left.assign(n2, 0);
    rg.right.assign(n2, 0);
    rg.front.assign(n2, 0);
    rg.behind.assign(n2, 0);
    rg.on.assign(static_cast<std::size_t>(cap), -2);

    const auto slots = scene.slots();
    for (int a : slots) rg.on[static_cast<std::size_t>(a)] = scene.object(a).support;

    for (int a : slots) {
        for (int b : slots) {
            if (a == b) continue;
            if (scene.stack_root(a) == scene.stack_root(b) && scene.stack_root(a) != -1) continue;
            const ObjectNode& oa = scene.object(a);
            const ObjectNode& ob = scene.object(b);
            const std::size_t idx = static_cast<std::size_t>(a * cap + b);
            if (oa.x < ob.x) rg.left[idx] = 1;
            if (oa.x > ob.x) rg.right[idx] = 1;
            if (oa.y < ob.y) rg.front[idx] = 1;
            if (oa.y > ob.y) rg.behind[idx] = 1;
        }
    }
    return rg;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string rule;        // stable identifier, e.g. "support-cycle"
    std::vector<int> slots;  // slots involved
    std::string detail;

    std::string to_string() const {
        std::ostringstream os;
        os << rule << " [";
        for (std::size_t i = 0; i < slots.size(); ++i) os << (i ? "," : "") << slots[i];
        os << "]";
        if (!detail.empty()) os << " " << detail;
        return os.str();
    }
};

inline std::vector<Violation> validate(const SceneGraph& scene) {
    std::vector<Violation> out;
    const auto slots = scene.slots();

    if (slots.empty()) out.push_back({"empty-scene", {}, "scene must contain at least one object"});

    for (int s : slots) {
        const ObjectNode& o = scene.object(s);
        if (o.slot != s) out.push_back({"slot-mismatch", {s}, "node slot field disagrees with its index"});
        if (!(o.x >= 0.0 && o.x <= 1.0 && o.y >= 0.0 && o.y <= 1.0))
            out.push_back({"coord-range", {s}, "coordinates outside [0,1]"});
        if (o.support != kGround) {
            if (o.support == s) {
                out.push_back({"self-support", {s}, ""});
            } else if (!scene.occupied(o.support)) {
                out.push_back({"dangling-support", {s, o.support}, "support target not occupied"});
            } else {
                const ObjectNode& base = scene.object(o.support);
                if (!fits_on(o.size, base.size))
                    out.push_back({"size-support", {s, o.support}, "larger object resting on smaller base"});
                if (o.x != base.x || o.y != base.y)
                    out.push_back({"stack-coords", {s, o.support}, "stacked object not at its base's position"});
            }
        }
    }

    // cycles: follow chains with a step budget
    for (int s : slots) {
        int cur = s;
        bool cyclic = true;
        for (int guard = 0; guard <= scene.capacity(); ++guard) {
            const ObjectNode& o = scene.object(cur);
            if (o.support == kGround || !scene.occupied(o.support) || o.support == cur) {
                cyclic = false;
                break;
            }
            cur = o.support;
        }
        if (cyclic) out.push_back({"support-cycle", {s}, ""});
    }

    for (std::size_t i = 0; i < slots.size(); ++i) {
        for (std::size_t j = i + 1; j < slots.size(); ++j) {
            const ObjectNode& a = scene.object(slots[i]);
            const ObjectNode& b = scene.object(slots[j]);
            if (a.support != kGround || b.support != kGround) continue;
            const double d = std::hypot(a.x - b.x, a.y - b.y);
            if (d < kMinSeparation)
                out.push_back({"min-sep", {slots[i], slots[j]}, "ground objects closer than 0.08"});
        }
    }
    return out;
}

inline bool is_valid(const SceneGraph& scene) { return validate(scene).empty(); }

enum class Relation : int { Left, Right, Front, Behind, On };

inline constexpr std::array<std::string_view, 5> kRelationNames = {"left", "right", "front", "behind", "on"};

inline std::string_view to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

inline std::optional<Relation> parse_relation(std::string_view s) {
    return parse_enum<Relation>(kRelationNames, s);
}

// True iff relation r holds between a and b: planar relations read the pair
// matrices; On means a rests directly on b.
inline bool relation_holds(const RelationGraph& rg, Relation r, int a, int b) {
    switch (r) {
        case Relation::Left: return rg.is_left(a, b);
        case Relation::Right: return rg.is_right(a, b);
        case Relation::Front: return rg.is_front(a, b);
        case Relation::Behind: return rg.is_behind(a, b);
        case Relation::On: return rg.on[static_cast<std::size_t>(a)] == b;
    }
    return false;
}

// Structural equality used for grading: occupied slots, per-slot attributes
// and support, and the derived relation graph. Raw coordinates are ignored.
inline bool scenes_equivalent(const SceneGraph& a, const SceneGraph& b) {
    if (a.capacity() != b.capacity()) return false;
    const auto sa = a.slots();
    if (sa != b.slots()) return false;
    for (int s : sa) {
        const ObjectNode& oa = a.object(s);
        const ObjectNode& ob = b.object(s);
        if (oa.color != ob.color || oa.shape != ob.shape || oa.size != ob.size || oa.material != ob.material)
            return false;
        if (oa.support != ob.support) return false;
    }
    return derive_relations(a) == derive_relations(b);
}

}  // namespace whatif
