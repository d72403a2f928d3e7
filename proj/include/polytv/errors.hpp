#pragma once

#include <stdexcept>
#include <string>

namespace polytv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class PointOnBoundary : public Error {
public:
    using Error::Error;
};

class QuadratureNotConverged : public Error {
public:
    using Error::Error;
};

class NotSimple : public Error {
public:
    using Error::Error;
};

class ResampleBrokeSimplicity : public Error {
public:
    using Error::Error;
};

class NoContourFound : public Error {
public:
    using Error::Error;
};

class DegenerateAngle : public Error {
public:
    using Error::Error;
};

class StalledAtNonSimple : public Error {
public:
    using Error::Error;
};

class AssumptionViolated : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace polytv
