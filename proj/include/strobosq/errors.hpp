#pragma once

#include <stdexcept>
#include <string>

namespace strobosq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// params
struct PoleError : Error { using Error::Error; };
struct ZeroDetuning : Error { using Error::Error; };
struct RegimeError : Error { using Error::Error; };

// dynamics / spectral
struct GridError : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };

// fitting
struct UnknownModel : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct SingularJacobian : FitError { using FitError::FitError; };

// configuration and file formats
struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

}  // namespace strobosq
