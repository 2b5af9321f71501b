#ifndef ACCSTEER_ERROR_HPP
#define ACCSTEER_ERROR_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace accsteer {

/// Broad failure classes. The CLI maps them onto its exit codes.
enum class ErrorClass { validation, data, internal };

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ErrorClass cls = ErrorClass::data)
        : std::runtime_error(what), class_(cls) {}

    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

/// Bad parameters or configuration supplied by the caller.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what, ErrorClass::validation) {}
};

/// Anything wrong with the data itself.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, ErrorClass::data) {}
};

// Activation file format problems.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
public:
    UnsupportedVersionError(const std::string& what, unsigned version)
        : FormatError(what), version_(version) {}
    unsigned version() const noexcept { return version_; }

private:
    unsigned version_;
};

class TruncatedError : public FormatError {
public:
    TruncatedError(const std::string& what, std::uint64_t expected, std::uint64_t actual)
        : FormatError(what), expected_(expected), actual_(actual) {}
    std::uint64_t expected_bytes() const noexcept { return expected_; }
    std::uint64_t actual_bytes() const noexcept { return actual_; }

private:
    std::uint64_t expected_;
    std::uint64_t actual_;
};

class ShapeMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

/// A record carries NaN or Inf somewhere.
class NonFiniteError : public DataError {
public:
    NonFiniteError(const std::string& what, std::size_t layer, std::size_t flat_index)
        : DataError(what), layer_(layer), flat_index_(flat_index) {}
    std::size_t layer() const noexcept { return layer_; }
    std::size_t flat_index() const noexcept { return flat_index_; }

private:
    std::size_t layer_;
    std::size_t flat_index_;
};

class DimensionMismatchError : public DataError {
public:
    using DataError::DataError;
};

/// Mean-shift of two indistinguishable groups, or a zero-norm input to cosine.
class ZeroDirectionError : public DataError {
public:
    using DataError::DataError;
};

/// The encoder cannot do what was asked (e.g. resume a precomputed run).
class CapabilityError : public DataError {
public:
    using DataError::DataError;
};

/// Pairing and split failures: unknown accent, no matches, too few speakers.
class PairingError : public DataError {
public:
    using DataError::DataError;
};

class TranscriberError : public DataError {
public:
    using DataError::DataError;
};

} // namespace accsteer

#endif // ACCSTEER_ERROR_HPP
