#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace popcheck {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " (at offset " + std::to_string(position) + ")"), position_(position)
    {
    }

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ModelError : public Error {
public:
    using Error::Error;
};

// A propensity is positive in a state whose successor leaves the natural numbers.
class WellFormednessViolation : public ModelError {
public:
    using ModelError::ModelError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class CertificateError : public Error {
public:
    using Error::Error;
};

class NoFiniteMaximum : public CertificateError {
public:
    using CertificateError::CertificateError;
};

class ReducibleWindow : public CertificateError {
public:
    using CertificateError::CertificateError;
};

class WindowTooLarge : public CertificateError {
public:
    using CertificateError::CertificateError;
};

} // namespace popcheck
