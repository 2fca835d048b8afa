#pragma once

#include <stdexcept>
#include <string>

namespace hsps {

// Base of every error raised by the library. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside a model's validity range (wavelength, temperature, table span).
class RangeError : public Error {
public:
    using Error::Error;
};

// Mathematically undefined request, e.g. no physical idler or a zero denominator.
class DomainError : public Error {
public:
    using Error::Error;
};

class NoPhasematchError : public Error {
public:
    NoPhasematchError(const std::string& what, double dk_lower, double dk_upper)
        : Error(what), dk_at_lower(dk_lower), dk_at_upper(dk_upper) {}
    double dk_at_lower;
    double dk_at_upper;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

class NumericalDegeneracyError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace hsps
