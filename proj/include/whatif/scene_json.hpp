#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "whatif/scene.hpp"

namespace whatif {

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string json_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

// Scene document, fixed field order, 6-decimal coordinates. The writer is
// hand-rolled so re-serialization is byte-identical.
inline std::string serialize_scene(const SceneGraph& scene) {
    std::string out = "{\"objects\":[";
    bool first = true;
    for (int s : scene.slots()) {
        const ObjectNode& o = scene.object(s);
        if (!first) out += ",";
        first = false;
        out += "{\"slot\":" + std::to_string(o.slot);
        out += ",\"color\":\"" + std::string(to_string(o.color)) + "\"";
        out += ",\"shape\":\"" + std::string(to_string(o.shape)) + "\"";
        out += ",\"size\":\"" + std::string(to_string(o.size)) + "\"";
        out += ",\"material\":\"" + std::string(to_string(o.material)) + "\"";
        out += ",\"x\":" + format_coord(o.x);
        out += ",\"y\":" + format_coord(o.y);
        out += ",\"support\":";
        out += (o.support == kGround) ? "\"ground\"" : std::to_string(o.support);
        out += "}";
    }
    out += "]}";
    return out;
}

inline SceneGraph scene_from_json(const nlohmann::json& doc, int capacity = kDefaultMaxObjects) {
    if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array())
        throw ParseError("scene document: missing \"objects\" array");
    SceneGraph scene(capacity);
    for (const auto& jo : doc["objects"]) {
        ObjectNode o;
        try {
            o.slot = jo.at("slot").get<int>();
            const auto color = parse_color(jo.at("color").get<std::string>());
            const auto shape = parse_shape(jo.at("shape").get<std::string>());
            const auto size = parse_size(jo.at("size").get<std::string>());
            const auto material = parse_material(jo.at("material").get<std::string>());
            if (!color) throw ParseError("unknown color \"" + jo.at("color").get<std::string>() + "\"");
            if (!shape) throw ParseError("unknown shape \"" + jo.at("shape").get<std::string>() + "\"");
            if (!size) throw ParseError("unknown size \"" + jo.at("size").get<std::string>() + "\"");
            if (!material) throw ParseError("unknown material \"" + jo.at("material").get<std::string>() + "\"");
            o.color = *color;
            o.shape = *shape;
            o.size = *size;
            o.material = *material;
            o.x = jo.at("x").get<double>();
            o.y = jo.at("y").get<double>();
            const auto& sup = jo.at("support");
            if (sup.is_string()) {
                if (sup.get<std::string>() != "ground")
                    throw ParseError("support must be \"ground\" or a slot id");
                o.support = kGround;
            } else {
                o.support = sup.get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("scene object: ") + e.what());
        }
        if (o.slot < 0 || o.slot >= scene.capacity())
            throw ParseError("slot " + std::to_string(o.slot) + " out of range");
        if (scene.occupied(o.slot)) throw ParseError("duplicate slot " + std::to_string(o.slot));
        scene.put(o);
    }
    auto violations = validate(scene);
    if (!violations.empty())
        throw ParseError("scene violates invariants: " + violations.front().to_string());
    return scene;
}

inline SceneGraph deserialize_scene(const std::string& text, int capacity = kDefaultMaxObjects) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed scene document: ") + e.what());
    }
    return scene_from_json(doc, capacity);
}

}  // namespace whatif
