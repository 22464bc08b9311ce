#pragma once

// Shared value types and the error hierarchy used across the library.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace aimreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Point of a hybrid time domain: flow time t and jump count j.
struct HybridTime {
    double t = 0.0;
    std::size_t j = 0;

    friend bool operator==(const HybridTime&, const HybridTime&) = default;
};

/// Time-varying vector field, x' = field(t, x).
using VectorField = std::function<Vector(double, const Vector&)>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments to a numerical routine (bad shape, non-finite entries).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A configuration violates a documented invariant.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// Evaluation of the p1* Lie derivatives too close to the wave peaks.
class BranchPointError : public Error {
public:
    using Error::Error;
};

/// State became non-finite during integration.
class IntegrationBlowup : public Error {
public:
    IntegrationBlowup(HybridTime at, Vector state, const std::string& what)
        : Error(what), at_(at), state_(std::move(state)) {}

    const HybridTime& at() const noexcept { return at_; }
    const Vector& state() const noexcept { return state_; }

private:
    HybridTime at_;
    Vector state_;
};

}  // namespace aimreg
