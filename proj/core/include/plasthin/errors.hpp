#pragma once

#include <stdexcept>
#include <string>

namespace plasthin {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class ConstraintViolation : public Error { public: using Error::Error; };
class UnsupportedGrid : public Error { public: using Error::Error; };
class AssemblyError : public Error { public: using Error::Error; };
class PreconditionError : public Error { public: using Error::Error; };

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), m_residual(last_residual) {}
    double last_residual() const { return m_residual; }

private:
    double m_residual;
};

} // namespace plasthin
