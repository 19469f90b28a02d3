#ifndef COXMESH_ERRORS_HPP
#define COXMESH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace coxmesh {

/// Base class for all coxmesh errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input / domain errors (CLI exit code 2).
class InvalidDomain : public Error {
public:
    using Error::Error;
};
class PointOutsideDomain : public Error {
public:
    PointOutsideDomain(const std::string& msg, std::size_t index)
        : Error(msg), point_index(index) {}
    std::size_t point_index;
};
class InvalidEffort : public Error {
public:
    using Error::Error;
};
class BuildError : public Error {
public:
    using Error::Error;
};
class UnsupportedDegree : public Error {
public:
    using Error::Error;
};
class UnsupportedSmoothness : public Error {
public:
    using Error::Error;
};

// Simulation guard (CLI exit code 3).
class TooIntense : public Error {
public:
    using Error::Error;
};

// Numerical failures (CLI exit code 4).
class RefinementFailure : public Error {
public:
    using Error::Error;
};
class DegenerateTriangle : public Error {
public:
    using Error::Error;
};
class AssemblyError : public Error {
public:
    using Error::Error;
};
class EtaOverflow : public Error {
public:
    using Error::Error;
};
class NoConvergence : public Error {
public:
    using Error::Error;
};
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};
class HyperOptFailure : public Error {
public:
    using Error::Error;
};

} // namespace coxmesh

#endif
