#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace whatif {

// Closed, ordered attribute vocabularies. The one-hot layouts, the JSON
// wire format and the 27-way answer space all index into these tables,
// so the order here is load-bearing and must never change.

enum class Color : int { Red, Green, Gray, Blue, Brown, Yellow, Purple, Cyan };
enum class Shape : int { Cylinder, Sphere, Cube };
enum class Size : int { Small, Big };
enum class Material : int { Metal, Rubber };

inline constexpr int kNumColors = 8;
inline constexpr int kNumShapes = 3;
inline constexpr int kNumSizes = 2;
inline constexpr int kNumMaterials = 2;

inline constexpr std::array<std::string_view, kNumColors> kColorNames = {
    "red", "green", "gray", "blue", "brown", "yellow", "purple", "cyan"};
inline constexpr std::array<std::string_view, kNumShapes> kShapeNames = {"cylinder", "sphere", "cube"};
inline constexpr std::array<std::string_view, kNumSizes> kSizeNames = {"small", "big"};
inline constexpr std::array<std::string_view, kNumMaterials> kMaterialNames = {"metal", "rubber"};

enum class AttributeKind : int { Color, Shape, Size, Material };

inline constexpr std::array<std::string_view, 4> kAttributeNames = {"color", "shape", "size", "material"};

inline int vocab_size(AttributeKind a) {
    switch (a) {
        case AttributeKind::Color: return kNumColors;
        case AttributeKind::Shape: return kNumShapes;
        case AttributeKind::Size: return kNumSizes;
        case AttributeKind::Material: return kNumMaterials;
    }
    return 0;
}

inline std::string_view attribute_value_name(AttributeKind a, int index) {
    switch (a) {
        case AttributeKind::Color: return kColorNames.at(static_cast<std::size_t>(index));
        case AttributeKind::Shape: return kShapeNames.at(static_cast<std::size_t>(index));
        case AttributeKind::Size: return kSizeNames.at(static_cast<std::size_t>(index));
        case AttributeKind::Material: return kMaterialNames.at(static_cast<std::size_t>(index));
    }
    throw std::out_of_range("attribute kind");
}

template <class Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::array<std::string_view, N>& names, std::string_view s) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<Enum>(static_cast<int>(i));
    }
    return std::nullopt;
}

inline std::optional<Color> parse_color(std::string_view s) { return parse_enum<Color>(kColorNames, s); }
inline std::optional<Shape> parse_shape(std::string_view s) { return parse_enum<Shape>(kShapeNames, s); }
inline std::optional<Size> parse_size(std::string_view s) { return parse_enum<Size>(kSizeNames, s); }
inline std::optional<Material> parse_material(std::string_view s) { return parse_enum<Material>(kMaterialNames, s); }

inline std::string_view to_string(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
inline std::string_view to_string(Shape s) { return kShapeNames[static_cast<std::size_t>(s)]; }
inline std::string_view to_string(Size s) { return kSizeNames[static_cast<std::size_t>(s)]; }
inline std::string_view to_string(Material m) { return kMaterialNames[static_cast<std::size_t>(m)]; }
inline std::string_view to_string(AttributeKind a) { return kAttributeNames[static_cast<std::size_t>(a)]; }

// `top` may rest on `base` iff the base is at least as large.
inline bool fits_on(Size top, Size base) { return static_cast<int>(base) >= static_cast<int>(top); }

// ---------------------------------------------------------------------------
// 27-way answer space: digits 0-9, yes/no, then every attribute value in
// vocabulary order.
// ---------------------------------------------------------------------------

inline constexpr int kNumAnswers = 27;

namespace detail {
inline const std::array<std::string, kNumAnswers>& answer_names() {
    static const std::array<std::string, kNumAnswers> names = [] {
        std::array<std::string, kNumAnswers> n;
        int k = 0;
        for (int d = 0; d <= 9; ++d) n[k++] = std::to_string(d);
        n[k++] = "yes";
        n[k++] = "no";
        for (auto s : kShapeNames) n[k++] = std::string(s);
        for (auto s : kSizeNames) n[k++] = std::string(s);
        for (auto s : kMaterialNames) n[k++] = std::string(s);
        for (auto s : kColorNames) n[k++] = std::string(s);
        return n;
    }();
    return names;
}
}  // namespace detail

// One of the 27 canonical answers, held as its index.
class Answer {
public:
    Answer() : index_(0) {}

    static Answer from_index(int i) {
        if (i < 0 || i >= kNumAnswers) throw std::out_of_range("answer index " + std::to_string(i));
        return Answer(i);
    }

    static std::optional<Answer> parse(std::string_view s) {
        const auto& names = detail::answer_names();
        for (int i = 0; i < kNumAnswers; ++i) {
            if (names[static_cast<std::size_t>(i)] == s) return Answer(i);
        }
        return std::nullopt;
    }

    // Counts above 9 have no digit in the answer space and are clamped.
    static Answer from_count(long n) {
        if (n < 0) n = 0;
        if (n > 9) n = 9;
        return Answer(static_cast<int>(n));
    }

    static Answer yes_no(bool b) { return Answer(b ? 10 : 11); }
    static Answer of(Color c) { return Answer(19 + static_cast<int>(c)); }
    static Answer of(Shape s) { return Answer(12 + static_cast<int>(s)); }
    static Answer of(Size s) { return Answer(15 + static_cast<int>(s)); }
    static Answer of(Material m) { return Answer(17 + static_cast<int>(m)); }

    int index() const { return index_; }
    const std::string& text() const { return detail::answer_names()[static_cast<std::size_t>(index_)]; }

    friend bool operator==(const Answer& a, const Answer& b) = default;

private:
    explicit Answer(int i) : index_(i) {}
    int index_;
};

inline int answer_index(const Answer& a) { return a.index(); }
inline Answer index_answer(int i) { return Answer::from_index(i); }

}  // namespace whatif
