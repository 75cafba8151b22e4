#pragma once

#include <stdexcept>
#include <string>

namespace fine {

// Base of every error the library raises. Harness maps these onto exit codes.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Wrong extents, mismatched shapes, bad configuration values.
class ShapeError : public Error
{
public:
  using Error::Error;
};

// Non-power-of-two FFT extents and other sizing problems.
class SizeError : public Error
{
public:
  using Error::Error;
};

// Wrong element type for an operation (e.g. real input to the FFT).
class TypeError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

// NaN/Inf, divergence, non-convergence.
class NumericalError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

enum class LoadErrorKind { BadMagic, Truncated, UnknownDType, Unreadable };

class LoadError : public IoError
{
public:
  LoadError(LoadErrorKind kind, const std::string &what)
    : IoError(what)
    , kind_(kind)
  {
  }
  LoadErrorKind kind() const noexcept { return kind_; }

private:
  LoadErrorKind kind_;
};

} // namespace fine
