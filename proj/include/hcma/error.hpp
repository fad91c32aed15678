#pragma once

#include <stdexcept>
#include <string>

namespace hcma {

// Base class for every error raised by the library. Each subclass maps to one
// failure mode of a public operation so callers can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HCMA_DEFINE_ERROR(Name)        \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

HCMA_DEFINE_ERROR(BehindCameraError);
HCMA_DEFINE_ERROR(DegenerateInputError);
HCMA_DEFINE_ERROR(PlacementError);
HCMA_DEFINE_ERROR(ParseError);
HCMA_DEFINE_ERROR(UnknownVocabularyError);
HCMA_DEFINE_ERROR(DegenerateCropError);
HCMA_DEFINE_ERROR(DimensionMismatchError);
HCMA_DEFINE_ERROR(ContractError);
HCMA_DEFINE_ERROR(ConfigError);
HCMA_DEFINE_ERROR(InvalidIndicatorError);
HCMA_DEFINE_ERROR(NumericError);
HCMA_DEFINE_ERROR(LabelMismatchError);
HCMA_DEFINE_ERROR(ContextMissingError);
HCMA_DEFINE_ERROR(CompatibilityError);
HCMA_DEFINE_ERROR(IoError);

#undef HCMA_DEFINE_ERROR

}  // namespace hcma
