#ifndef RTFEST_ERROR_HPP
#define RTFEST_ERROR_HPP

#include <stdexcept>
#include <string>

namespace rtfest {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Iterative eigensolver / SVD did not converge or got non-finite input.
class DecompositionError : public Error {
public:
    DecompositionError(const std::string& what, double norm, double diag_ratio)
        : Error(what), norm_(norm), diag_ratio_(diag_ratio) {}

    double input_norm() const noexcept { return norm_; }
    // max|diag| / min|diag| of the input, a cheap conditioning hint.
    double diagonal_ratio() const noexcept { return diag_ratio_; }

private:
    double norm_;
    double diag_ratio_;
};

class SingularNoiseCovariance : public Error {
public:
    using Error::Error;
};

class NotPsdError : public Error {
public:
    using Error::Error;
};

class InvalidScenario : public Error {
public:
    using Error::Error;
};

class DegenerateReference : public Error {
public:
    DegenerateReference(const std::string& what, std::size_t bin) : Error(what), bin_(bin) {}
    std::size_t bin() const noexcept { return bin_; }

private:
    std::size_t bin_;
};

class RankDeficiency : public Error {
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

class InsufficientAudio : public Error {
public:
    using Error::Error;
};

}  // namespace rtfest

#endif
