// error.hpp — exception hierarchy shared by the xychain headers
//
// The CLI maps each family onto a process exit code:
//   ConfigError -> 2, CapExceeded -> 3, AnalysisError -> 4.

#pragma once

#include <stdexcept>
#include <string>

namespace xychain {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters, malformed inputs, violated preconditions.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A dense or combinatorial method was asked to run above its size cap.
class CapExceeded : public Error {
public:
    CapExceeded(const std::string& what, int requested, int cap)
        : Error(what + ": N=" + std::to_string(requested) + " exceeds cap " + std::to_string(cap)),
          requested_(requested), cap_(cap) {}

    int requested() const noexcept { return requested_; }
    int cap() const noexcept { return cap_; }

private:
    int requested_;
    int cap_;
};

// Bogolyubov angle undefined because E_q = 0.
class DegenerateAngle : public Error {
public:
    using Error::Error;
};

// A numerical self-check failed (residual, imaginary residue, normalization).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Detectors could not produce a report from the given trajectory.
class AnalysisError : public Error {
public:
    using Error::Error;
};

}  // namespace xychain
