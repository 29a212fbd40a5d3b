#pragma once

#include <stdexcept>
#include <string>

namespace spinboost {

/// Bad input: out-of-domain parameters, shape mismatches, malformed configs.
class InvalidArgument : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical check inside the library failed. Indicates broken conventions
/// rather than bad input.
class ConsistencyError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

class NotImplemented : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// An integrator did not reach the requested accuracy. The partial estimate
/// and its error are carried along so callers can still report them.
class AccuracyError : public std::runtime_error
{
  public:
    AccuracyError(std::string const& what, double estimate, double error)
        : std::runtime_error(what), estimate_(estimate), error_(error)
    {
    }

    double estimate() const noexcept { return estimate_; }
    double error() const noexcept { return error_; }

  private:
    double estimate_;
    double error_;
};

} // namespace spinboost
