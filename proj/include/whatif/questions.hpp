#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "whatif/scene.hpp"
#include "whatif/scene_json.hpp"

namespace whatif {

// ---------------------------------------------------------------------------
// Question functional programs: a typed AST executed against a scene-graph.
// ---------------------------------------------------------------------------

enum class QFn : int {
    Scene,
    FilterColor,
    FilterShape,
    FilterSize,
    FilterMaterial,
    Unique,
    Relate,
    Count,
    Exist,
    QueryColor,
    QueryShape,
    QuerySize,
    QueryMaterial,
    SameColor,
    SameShape,
    SameSize,
    SameMaterial,
    EqualInteger,
    GreaterThan,
    LessThan,
    EqualColor,
    EqualShape,
    EqualSize,
    EqualMaterial,
    Union,
    Intersect,
    NegateFilter,
};

inline constexpr std::array<std::string_view, 27> kQFnNames = {
    "scene",         "filter_color", "filter_shape", "filter_size", "filter_material", "unique",     "relate",
    "count",         "exist",        "query_color",  "query_shape", "query_size",      "query_material",
    "same_color",    "same_shape",   "same_size",    "same_material",
    "equal_integer", "greater_than", "less_than",    "equal_color", "equal_shape",     "equal_size",
    "equal_material", "union",       "intersect",    "negate_filter"};

inline std::string_view to_string(QFn f) { return kQFnNames[static_cast<std::size_t>(f)]; }

inline std::optional<QFn> parse_qfn(std::string_view s) {
    for (std::size_t i = 0; i < kQFnNames.size(); ++i)
        if (kQFnNames[i] == s) return static_cast<QFn>(static_cast<int>(i));
    return std::nullopt;
}

struct QuestionNode {
    QFn fn = QFn::Scene;
    std::vector<QuestionNode> args;
    std::string param;  // filter value, or relate relation name

    friend bool operator==(const QuestionNode&, const QuestionNode&) = default;
};

using QuestionProgram = QuestionNode;

enum class QuestionErrorKind : int { TypeError, UniqueViolation };

class QuestionError : public std::runtime_error {
public:
    QuestionError(QuestionErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    QuestionErrorKind kind() const { return kind_; }

private:
    QuestionErrorKind kind_;
};

namespace qdetail {

struct AttrValue {
    AttributeKind kind;
    int index;
    friend bool operator==(const AttrValue&, const AttrValue&) = default;
};

// evaluation results: object set (sorted slots), single object, integer, boolean, attribute value
using Value = std::variant<std::vector<int>, int, long, bool, AttrValue>;

[[noreturn]] inline void type_error(QFn fn, const char* expected) {
    throw QuestionError(QuestionErrorKind::TypeError,
                        std::string(to_string(fn)) + ": expected " + expected + " argument");
}

inline std::vector<int> as_set(const Value& v, QFn fn) {
    if (auto p = std::get_if<std::vector<int>>(&v)) return *p;
    type_error(fn, "an object-set");
}

inline int as_object(const Value& v, QFn fn) {
    if (auto p = std::get_if<int>(&v)) return *p;
    type_error(fn, "a single object");
}

inline long as_int(const Value& v, QFn fn) {
    if (auto p = std::get_if<long>(&v)) return *p;
    type_error(fn, "an integer");
}

inline AttrValue as_attr(const Value& v, QFn fn) {
    if (auto p = std::get_if<AttrValue>(&v)) return *p;
    type_error(fn, "an attribute value");
}

inline int attribute_of(const ObjectNode& o, AttributeKind a) {
    switch (a) {
        case AttributeKind::Color: return static_cast<int>(o.color);
        case AttributeKind::Shape: return static_cast<int>(o.shape);
        case AttributeKind::Size: return static_cast<int>(o.size);
        case AttributeKind::Material: return static_cast<int>(o.material);
    }
    throw std::logic_error("attribute kind");
}

inline void expect_arity(const QuestionNode& n, std::size_t arity) {
    if (n.args.size() != arity)
        throw QuestionError(QuestionErrorKind::TypeError, std::string(to_string(n.fn)) + ": expected " +
                                                              std::to_string(arity) + " argument(s), got " +
                                                              std::to_string(n.args.size()));
}

inline int parse_filter_value(QFn fn, AttributeKind a, const std::string& name) {
    for (int v = 0; v < vocab_size(a); ++v)
        if (attribute_value_name(a, v) == name) return v;
    throw QuestionError(QuestionErrorKind::TypeError,
                        std::string(to_string(fn)) + ": value \"" + name + "\" not in vocabulary");
}

inline Value eval(const SceneGraph& scene, const RelationGraph& rg, const QuestionNode& n) {
    switch (n.fn) {
        case QFn::Scene: {
            expect_arity(n, 0);
            return scene.slots();
        }
        case QFn::FilterColor:
        case QFn::FilterShape:
        case QFn::FilterSize:
        case QFn::FilterMaterial: {
            expect_arity(n, 1);
            const AttributeKind a = n.fn == QFn::FilterColor    ? AttributeKind::Color
                                    : n.fn == QFn::FilterShape  ? AttributeKind::Shape
                                    : n.fn == QFn::FilterSize   ? AttributeKind::Size
                                                                : AttributeKind::Material;
            const int want = parse_filter_value(n.fn, a, n.param);
            std::vector<int> out;
            for (int s : as_set(eval(scene, rg, n.args[0]), n.fn))
                if (attribute_of(scene.object(s), a) == want) out.push_back(s);
            return out;
        }
        case QFn::Unique: {
            expect_arity(n, 1);
            const auto& set = as_set(eval(scene, rg, n.args[0]), n.fn);
            if (set.size() != 1)
                throw QuestionError(QuestionErrorKind::UniqueViolation,
                                    "unique: set has " + std::to_string(set.size()) + " members");
            return set.front();
        }
        case QFn::Relate: {
            expect_arity(n, 1);
            const int obj = as_object(eval(scene, rg, n.args[0]), n.fn);
            const auto rel = parse_relation(n.param);
            if (!rel) throw QuestionError(QuestionErrorKind::TypeError, "relate: unknown relation \"" + n.param + "\"");
            std::vector<int> out;
            for (int s : scene.slots()) {
                if (s == obj) continue;
                if (relation_holds(rg, *rel, s, obj)) out.push_back(s);
            }
            return out;
        }
        case QFn::Count: {
            expect_arity(n, 1);
            return static_cast<long>(as_set(eval(scene, rg, n.args[0]), n.fn).size());
        }
        case QFn::Exist: {
            expect_arity(n, 1);
            return !as_set(eval(scene, rg, n.args[0]), n.fn).empty();
        }
        case QFn::QueryColor:
        case QFn::QueryShape:
        case QFn::QuerySize:
        case QFn::QueryMaterial: {
            expect_arity(n, 1);
            const AttributeKind a = n.fn == QFn::QueryColor    ? AttributeKind::Color
                                    : n.fn == QFn::QueryShape  ? AttributeKind::Shape
                                    : n.fn == QFn::QuerySize   ? AttributeKind::Size
                                                               : AttributeKind::Material;
            const int obj = as_object(eval(scene, rg, n.args[0]), n.fn);
            return AttrValue{a, attribute_of(scene.object(obj), a)};
        }
        case QFn::SameColor:
        case QFn::SameShape:
        case QFn::SameSize:
        case QFn::SameMaterial: {
            expect_arity(n, 1);
            const AttributeKind a = n.fn == QFn::SameColor    ? AttributeKind::Color
                                    : n.fn == QFn::SameShape  ? AttributeKind::Shape
                                    : n.fn == QFn::SameSize   ? AttributeKind::Size
                                                              : AttributeKind::Material;
            const int obj = as_object(eval(scene, rg, n.args[0]), n.fn);
            const int want = attribute_of(scene.object(obj), a);
            std::vector<int> out;
            for (int s : scene.slots())
                if (s != obj && attribute_of(scene.object(s), a) == want) out.push_back(s);
            return out;
        }
        case QFn::EqualInteger: {
            expect_arity(n, 2);
            return as_int(eval(scene, rg, n.args[0]), n.fn) == as_int(eval(scene, rg, n.args[1]), n.fn);
        }
        case QFn::GreaterThan: {
            expect_arity(n, 2);
            return as_int(eval(scene, rg, n.args[0]), n.fn) > as_int(eval(scene, rg, n.args[1]), n.fn);
        }
        case QFn::LessThan: {
            expect_arity(n, 2);
            return as_int(eval(scene, rg, n.args[0]), n.fn) < as_int(eval(scene, rg, n.args[1]), n.fn);
        }
        case QFn::EqualColor:
        case QFn::EqualShape:
        case QFn::EqualSize:
        case QFn::EqualMaterial: {
            expect_arity(n, 2);
            const AttrValue a = as_attr(eval(scene, rg, n.args[0]), n.fn);
            const AttrValue b = as_attr(eval(scene, rg, n.args[1]), n.fn);
            if (a.kind != b.kind)
                throw QuestionError(QuestionErrorKind::TypeError, "attribute comparison across kinds");
            return a == b;
        }
        case QFn::Union: {
            expect_arity(n, 2);
            const auto a = as_set(eval(scene, rg, n.args[0]), n.fn);
            const auto b = as_set(eval(scene, rg, n.args[1]), n.fn);
            std::vector<int> out;
            std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
            return out;
        }
        case QFn::Intersect: {
            expect_arity(n, 2);
            const auto a = as_set(eval(scene, rg, n.args[0]), n.fn);
            const auto b = as_set(eval(scene, rg, n.args[1]), n.fn);
            std::vector<int> out;
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
            return out;
        }
        case QFn::NegateFilter: {
            // complement of args[1] within args[0]
            expect_arity(n, 2);
            const auto universe = as_set(eval(scene, rg, n.args[0]), n.fn);
            const auto sub = as_set(eval(scene, rg, n.args[1]), n.fn);
            std::vector<int> out;
            std::set_difference(universe.begin(), universe.end(), sub.begin(), sub.end(), std::back_inserter(out));
            return out;
        }
    }
    throw std::logic_error("unknown question function");
}

}  // namespace qdetail

// Deterministic execution of a question program; the root must produce an
// integer, boolean or attribute value. Counts are clamped into the digit
// range of the answer space.
inline Answer execute_question(const SceneGraph& scene, const QuestionProgram& program) {
    const RelationGraph rg = derive_relations(scene);
    const qdetail::Value v = qdetail::eval(scene, rg, program);
    if (auto p = std::get_if<long>(&v)) return Answer::from_count(*p);
    if (auto p = std::get_if<bool>(&v)) return Answer::yes_no(*p);
    if (auto p = std::get_if<qdetail::AttrValue>(&v)) {
        switch (p->kind) {
            case AttributeKind::Color: return Answer::of(static_cast<Color>(p->index));
            case AttributeKind::Shape: return Answer::of(static_cast<Shape>(p->index));
            case AttributeKind::Size: return Answer::of(static_cast<Size>(p->index));
            case AttributeKind::Material: return Answer::of(static_cast<Material>(p->index));
        }
    }
    throw QuestionError(QuestionErrorKind::TypeError, "program root does not produce an answer");
}

// Selected set of a set-typed subprogram; used by property tests.
inline std::vector<int> execute_set(const SceneGraph& scene, const QuestionNode& node) {
    const RelationGraph rg = derive_relations(scene);
    return qdetail::as_set(qdetail::eval(scene, rg, node), node.fn);
}

// ---------------------------------------------------------------------------
// JSON wire format: nested {"fn": ..., "args": [...]} nodes, with "value"
// for filter parameters and "relation" for relate.
// ---------------------------------------------------------------------------

inline std::string serialize_question_program(const QuestionNode& n) {
    std::string out = "{\"fn\":\"" + std::string(to_string(n.fn)) + "\"";
    if (!n.param.empty()) {
        out += (n.fn == QFn::Relate) ? ",\"relation\":\"" : ",\"value\":\"";
        out += n.param + "\"";
    }
    out += ",\"args\":[";
    for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ",";
        out += serialize_question_program(n.args[i]);
    }
    return out + "]}";
}

inline QuestionNode question_program_from_json(const nlohmann::json& j) {
    QuestionNode n;
    const auto fn = parse_qfn(j.at("fn").get<std::string>());
    if (!fn) throw ParseError("unknown question function \"" + j.at("fn").get<std::string>() + "\"");
    n.fn = *fn;
    if (j.contains("value")) n.param = j["value"].get<std::string>();
    if (j.contains("relation")) n.param = j["relation"].get<std::string>();
    if (j.contains("args"))
        for (const auto& a : j["args"]) n.args.push_back(question_program_from_json(a));
    return n;
}

// convenience builders used by the generator and tests
inline QuestionNode q_scene() { return {QFn::Scene, {}, ""}; }
inline QuestionNode q_filter(AttributeKind a, int value, QuestionNode arg) {
    const QFn fn = a == AttributeKind::Color   ? QFn::FilterColor
                   : a == AttributeKind::Shape ? QFn::FilterShape
                   : a == AttributeKind::Size  ? QFn::FilterSize
                                               : QFn::FilterMaterial;
    return {fn, {std::move(arg)}, std::string(attribute_value_name(a, value))};
}
inline QuestionNode q_count(QuestionNode arg) { return {QFn::Count, {std::move(arg)}, ""}; }
inline QuestionNode q_exist(QuestionNode arg) { return {QFn::Exist, {std::move(arg)}, ""}; }
inline QuestionNode q_unique(QuestionNode arg) { return {QFn::Unique, {std::move(arg)}, ""}; }
inline QuestionNode q_relate(Relation r, QuestionNode obj) {
    return {QFn::Relate, {std::move(obj)}, std::string(to_string(r))};
}
inline QuestionNode q_query(AttributeKind a, QuestionNode obj) {
    const QFn fn = a == AttributeKind::Color   ? QFn::QueryColor
                   : a == AttributeKind::Shape ? QFn::QueryShape
                   : a == AttributeKind::Size  ? QFn::QuerySize
                                               : QFn::QueryMaterial;
    return {fn, {std::move(obj)}, ""};
}
inline QuestionNode q_equal_attr(AttributeKind a, QuestionNode lhs, QuestionNode rhs) {
    const QFn fn = a == AttributeKind::Color   ? QFn::EqualColor
                   : a == AttributeKind::Shape ? QFn::EqualShape
                   : a == AttributeKind::Size  ? QFn::EqualSize
                                               : QFn::EqualMaterial;
    return {fn, {std::move(lhs), std::move(rhs)}, ""};
}
inline QuestionNode q_union(QuestionNode a, QuestionNode b) { return {QFn::Union, {std::move(a), std::move(b)}, ""}; }
inline QuestionNode q_intersect(QuestionNode a, QuestionNode b) {
    return {QFn::Intersect, {std::move(a), std::move(b)}, ""};
}
inline QuestionNode q_negate(QuestionNode universe, QuestionNode subset) {
    return {QFn::NegateFilter, {std::move(universe), std::move(subset)}, ""};
}

}  // namespace whatif
