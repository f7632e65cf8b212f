#pragma once

#include <stdexcept>
#include <string>

namespace lntune {

// Every failure the library reports derives from Error so callers (the CLI
// in particular) can map them onto exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LNTUNE_DEFINE_ERROR(Name)         \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

LNTUNE_DEFINE_ERROR(ZeroVector)
LNTUNE_DEFINE_ERROR(InvalidFeature)
LNTUNE_DEFINE_ERROR(NoPositivePairs)
LNTUNE_DEFINE_ERROR(ClassMissing)
LNTUNE_DEFINE_ERROR(SingleClass)
LNTUNE_DEFINE_ERROR(EmptyVideo)
LNTUNE_DEFINE_ERROR(WeightsUnavailable)
LNTUNE_DEFINE_ERROR(UnsupportedPolicy)
LNTUNE_DEFINE_ERROR(ShapeMismatch)
LNTUNE_DEFINE_ERROR(MissingSourceLinks)
LNTUNE_DEFINE_ERROR(NoFaceFound)
LNTUNE_DEFINE_ERROR(CorruptCheckpoint)
LNTUNE_DEFINE_ERROR(FingerprintMismatch)
LNTUNE_DEFINE_ERROR(ConfigError)
LNTUNE_DEFINE_ERROR(NonFiniteLoss)
LNTUNE_DEFINE_ERROR(ManifestError)
LNTUNE_DEFINE_ERROR(IoError)

#undef LNTUNE_DEFINE_ERROR

}  // namespace lntune
