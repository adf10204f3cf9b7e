#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvni {

/// Coarse failure class; the CLI maps each to a distinct exit code.
enum class ErrorCategory { kUsage, kIngestion, kEstimation, kTheory, kReport };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define PVNI_DEFINE_ERROR(Name, Category)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message)                             \
        : Error(ErrorCategory::Category, #Name, message) {}               \
  }

// record-store
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCategory::kIngestion, "ParseError",
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};
PVNI_DEFINE_ERROR(SchemaError, kIngestion);
PVNI_DEFINE_ERROR(EmptyDataset, kIngestion);
PVNI_DEFINE_ERROR(NoMatchingRecords, kEstimation);

// persona-geometry
PVNI_DEFINE_ERROR(DimensionMismatch, kEstimation);
PVNI_DEFINE_ERROR(DegeneratePersonaVector, kEstimation);
PVNI_DEFINE_ERROR(NotUnitNorm, kEstimation);
PVNI_DEFINE_ERROR(MissingTrait, kEstimation);

// judge-anchoring
PVNI_DEFINE_ERROR(NonFiniteLogprob, kEstimation);
PVNI_DEFINE_ERROR(EmptyRollouts, kEstimation);
PVNI_DEFINE_ERROR(MissingCondition, kEstimation);
PVNI_DEFINE_ERROR(OutOfRangeScore, kEstimation);

// theory-lab
PVNI_DEFINE_ERROR(InfeasibleGram, kTheory);
PVNI_DEFINE_ERROR(SameTrait, kTheory);
PVNI_DEFINE_ERROR(RegimeMismatch, kTheory);
PVNI_DEFINE_ERROR(ConditionViolated, kTheory);

// stability-report
PVNI_DEFINE_ERROR(EmptyScores, kReport);
PVNI_DEFINE_ERROR(DuplicateKey, kReport);

// cli
PVNI_DEFINE_ERROR(ConfigError, kUsage);

#undef PVNI_DEFINE_ERROR

}  // namespace pvni
