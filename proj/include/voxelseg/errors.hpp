#ifndef VOXELSEG_ERRORS_HPP
#define VOXELSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace voxelseg {

// Process exit codes used by the CLI: 0 success, 1 user/config error,
// 2 data/format error, 3 internal invariant violation.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    internal = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

#define VOXELSEG_DEFINE_ERROR(Name, Kind)                    \
    class Name : public Error {                              \
    public:                                                  \
        explicit Name(const std::string& msg)                \
            : Error(ErrorKind::Kind, std::string(#Name ": ") + msg) {} \
    }

VOXELSEG_DEFINE_ERROR(IoError, data);
VOXELSEG_DEFINE_ERROR(BadMagic, data);
VOXELSEG_DEFINE_ERROR(BadHeaderSize, data);
VOXELSEG_DEFINE_ERROR(HeaderPairUnsupported, data);
VOXELSEG_DEFINE_ERROR(UnsupportedDatatype, data);
VOXELSEG_DEFINE_ERROR(TruncatedPayload, data);
VOXELSEG_DEFINE_ERROR(CorruptArchive, data);
VOXELSEG_DEFINE_ERROR(VersionMismatch, data);
VOXELSEG_DEFINE_ERROR(MalformedCsv, data);
VOXELSEG_DEFINE_ERROR(UnexpectedLabel, data);
VOXELSEG_DEFINE_ERROR(NonFiniteInput, data);
VOXELSEG_DEFINE_ERROR(ShapeMismatch, internal);
VOXELSEG_DEFINE_ERROR(WindowOutOfBounds, usage);
VOXELSEG_DEFINE_ERROR(EmptyDataset, usage);
VOXELSEG_DEFINE_ERROR(BadConfig, usage);
VOXELSEG_DEFINE_ERROR(BadRate, usage);
VOXELSEG_DEFINE_ERROR(OddSpatialDim, internal);
VOXELSEG_DEFINE_ERROR(LabelOutOfRange, data);
VOXELSEG_DEFINE_ERROR(StaleCache, internal);
VOXELSEG_DEFINE_ERROR(NonFiniteLoss, internal);

#undef VOXELSEG_DEFINE_ERROR

} // namespace voxelseg

#endif
