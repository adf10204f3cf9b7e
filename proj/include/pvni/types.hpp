#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pvni {

using Vector = std::vector<double>;

/// Big Five traits in the fixed O,C,E,A,N order used by every output.
enum class Trait { O = 0, C = 1, E = 2, A = 3, N = 4 };
inline constexpr std::size_t kNumTraits = 5;
inline constexpr std::array<Trait, kNumTraits> kAllTraits = {Trait::O, Trait::C, Trait::E,
                                                             Trait::A, Trait::N};

enum class Condition { Pos, Neg, Neu };
enum class VariantKind { Questionnaire, Roleplay };

std::string_view to_string(Trait t);
std::string_view to_string(Condition c);
std::string_view to_string(VariantKind k);
std::string_view trait_name(Trait t);  // "Openness", ...

std::optional<Trait> parse_trait(std::string_view s);
std::optional<Condition> parse_condition(std::string_view s);
std::optional<VariantKind> parse_variant_kind(std::string_view s);

inline std::size_t index(Trait t) { return static_cast<std::size_t>(t); }

/// One prompt-variant group: (variant_kind, variant_id).
struct VariantKey {
  VariantKind kind = VariantKind::Questionnaire;
  long long id = 0;

  friend auto operator<=>(const VariantKey&, const VariantKey&) = default;
};

std::string to_string(const VariantKey& key);

}  // namespace pvni
