#pragma once

#include <stdexcept>
#include <string>

namespace lca {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric errors. These map to CLI exit code 3.
struct RankDeficient : Error { using Error::Error; };
struct NotSymmetric : Error { using Error::Error; };
struct NotPSD : Error { using Error::Error; };
struct NumericFailure : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct DescentViolation : Error { using Error::Error; };

// Usage and I/O errors. These map to CLI exit code 2.
struct ShapeMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };
struct TooSmall : Error { using Error::Error; };
struct UnsupportedMethod : Error { using Error::Error; };

} // namespace lca
