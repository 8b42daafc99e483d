#pragma once

#include <stdexcept>
#include <string>

namespace bzsl {

// Base class for all library errors. Subclasses map 1:1 onto the failure
// kinds surfaced by the public API so callers can catch selectively.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotPositiveDefinite : Error { using Error::Error; };
struct DimensionMismatch   : Error { using Error::Error; };
struct DomainError         : Error { using Error::Error; };

struct IoError         : Error { using Error::Error; };
struct FormatError     : Error { using Error::Error; };
struct NonFiniteValue  : Error { using Error::Error; };
struct EmptyClass      : Error { using Error::Error; };
struct DegenerateSplit : Error { using Error::Error; };
struct DimensionError  : Error { using Error::Error; };

struct UnmatchedSample : Error { using Error::Error; };
struct EmptyInput      : Error { using Error::Error; };

struct InsufficientClasses : Error { using Error::Error; };
struct KTooLarge           : Error { using Error::Error; };
struct UniquenessExhausted : Error { using Error::Error; };
struct NonPositiveDof      : Error { using Error::Error; };

struct LengthMismatch : Error { using Error::Error; };
struct EmptyGrid      : Error { using Error::Error; };
struct InvalidSpec    : Error { using Error::Error; };

// Configuration / argument errors (CLI exit code 2 territory).
struct ConfigError : Error { using Error::Error; };

} // namespace bzsl
