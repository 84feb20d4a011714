#pragma once

#include <stdexcept>
#include <string>

namespace icr {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define ICR_DEFINE_ERROR(Name)                          \
  class Name : public Error {                           \
   public:                                              \
    explicit Name(const std::string& message)           \
        : Error(#Name, message) {}                      \
  }

ICR_DEFINE_ERROR(InvalidArgument);
ICR_DEFINE_ERROR(DimensionMismatch);
ICR_DEFINE_ERROR(ZeroVector);
ICR_DEFINE_ERROR(NetworkError);
ICR_DEFINE_ERROR(AuthError);
ICR_DEFINE_ERROR(EmptyCompletion);
ICR_DEFINE_ERROR(MissingPlaceholder);
ICR_DEFINE_ERROR(MalformedInstruction);
ICR_DEFINE_ERROR(MissingEmbedding);
ICR_DEFINE_ERROR(DegenerateCentroid);
ICR_DEFINE_ERROR(EmptyIndex);
ICR_DEFINE_ERROR(UnknownTokenizer);
ICR_DEFINE_ERROR(BudgetInfeasible);
ICR_DEFINE_ERROR(MissingArtifact);
ICR_DEFINE_ERROR(JudgeParseError);
ICR_DEFINE_ERROR(UnknownModel);
ICR_DEFINE_ERROR(SeparationDetected);
ICR_DEFINE_ERROR(RankDeficient);
ICR_DEFINE_ERROR(ConfigError);
ICR_DEFINE_ERROR(MonotonicityViolation);
ICR_DEFINE_ERROR(LeafLimitExceeded);
ICR_DEFINE_ERROR(IoError);

#undef ICR_DEFINE_ERROR

}  // namespace icr
