#pragma once

#include <stdexcept>
#include <string>

namespace ssonmf {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration documents and flags.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Raised when a stochastic factorization produced no admissible candidate.
class NoCandidateError : public Error {
public:
    using Error::Error;
};

}  // namespace ssonmf
