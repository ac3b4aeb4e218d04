#pragma once

#include <stdexcept>
#include <string>

namespace projsplit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! Shapes of vectors, maps or block lists do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

//! Invalid parameters detected before any iteration runs.
class ConfigError : public Error {
public:
    using Error::Error;
};

//! Failure while iterating; carries the iteration index (0 when unknown).
class SolverError : public Error {
public:
    SolverError(const std::string& what, long iteration = 0)
        : Error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

//! The backtracking inner loop hit its trial cap.
class BacktrackError : public SolverError {
public:
    using SolverError::SolverError;
};

class NonFiniteError : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace projsplit
