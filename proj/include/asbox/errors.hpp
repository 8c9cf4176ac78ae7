#pragma once

#include <stdexcept>
#include <string>

namespace asbox {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ASBOX_DEFINE_ERROR(Name)            \
    class Name : public Error {             \
    public:                                 \
        using Error::Error;                 \
    }

ASBOX_DEFINE_ERROR(ConfigError);
ASBOX_DEFINE_ERROR(RangeError);
ASBOX_DEFINE_ERROR(QuotaExceeded);
ASBOX_DEFINE_ERROR(DuplicateKey);
ASBOX_DEFINE_ERROR(MissingKey);
ASBOX_DEFINE_ERROR(UnsatisfiableRequest);
ASBOX_DEFINE_ERROR(NonNormalized);
ASBOX_DEFINE_ERROR(GlanceCapExceeded);
ASBOX_DEFINE_ERROR(InvalidStimulus);
ASBOX_DEFINE_ERROR(UnknownBias);
ASBOX_DEFINE_ERROR(InvalidBudget);
ASBOX_DEFINE_ERROR(OpenTask);
ASBOX_DEFINE_ERROR(MalformedExpression);
ASBOX_DEFINE_ERROR(InvalidScenario);
ASBOX_DEFINE_ERROR(SnapshotCorrupt);
ASBOX_DEFINE_ERROR(AccessDenied);

#undef ASBOX_DEFINE_ERROR

}  // namespace asbox
