#include "pvni/types.hpp"

namespace pvni {

std::string_view to_string(Trait t) {
  switch (t) {
    case Trait::O: return "O";
    case Trait::C: return "C";
    case Trait::E: return "E";
    case Trait::A: return "A";
    case Trait::N: return "N";
  }
  return "?";
}

std::string_view trait_name(Trait t) {
  switch (t) {
    case Trait::O: return "Openness";
    case Trait::C: return "Conscientiousness";
    case Trait::E: return "Extraversion";
    case Trait::A: return "Agreeableness";
    case Trait::N: return "Neuroticism";
  }
  return "?";
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Pos: return "pos";
    case Condition::Neg: return "neg";
    case Condition::Neu: return "neu";
  }
  return "?";
}

std::string_view to_string(VariantKind k) {
  switch (k) {
    case VariantKind::Questionnaire: return "questionnaire";
    case VariantKind::Roleplay: return "roleplay";
  }
  return "?";
}

std::optional<Trait> parse_trait(std::string_view s) {
  for (Trait t : kAllTraits) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

std::optional<Condition> parse_condition(std::string_view s) {
  if (s == "pos") return Condition::Pos;
  if (s == "neg") return Condition::Neg;
  if (s == "neu") return Condition::Neu;
  return std::nullopt;
}

std::optional<VariantKind> parse_variant_kind(std::string_view s) {
  if (s == "questionnaire") return VariantKind::Questionnaire;
  if (s == "roleplay" || s == "role-play" || s == "role_play") return VariantKind::Roleplay;
  return std::nullopt;
}

std::string to_string(const VariantKey& key) {
  return std::string(to_string(key.kind)) + "_" + std::to_string(key.id);
}

}  // namespace pvni
