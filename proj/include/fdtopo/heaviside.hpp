#pragma once

#include <cmath>
#include <stdexcept>

namespace fdtopo {

/// Regularizations of the Heaviside function used to weight the elasticity
/// coefficients on the hold-all domain.
///
///   Smooth     H(r) = 1 - exp(-r/eps)/2  (r >= 0),  exp(r/eps)/2  (r < 0)
///   Clamped    Smooth with the negative branch floored at 1e-4
///   Step       1 (r >= 0), eps (r < 0)
///   Reference  1 (r >= 0), 1e-9 (r < 0); near-characteristic function used
///              as the reference solve in the eps-studies
enum class HeavisideVariant { Smooth, Clamped, Step, Reference };

inline constexpr double kClampedFloor = 1e-4;
inline constexpr double kReferenceFloor = 1e-9;

class HeavisideKernel {
  public:
    explicit HeavisideKernel(double epsilon, HeavisideVariant variant = HeavisideVariant::Smooth)
        : epsilon_(epsilon), variant_(variant) {
        if (!(epsilon > 0.0)) {
            throw std::invalid_argument("HeavisideKernel: epsilon must be positive");
        }
    }

    double epsilon() const { return epsilon_; }
    HeavisideVariant variant() const { return variant_; }

    double value(double r) const {
        switch (variant_) {
            case HeavisideVariant::Smooth:
                return smooth(r);
            case HeavisideVariant::Clamped:
                return r >= 0.0 ? smooth(r) : std::max(kClampedFloor, smooth(r));
            case HeavisideVariant::Step:
                return r >= 0.0 ? 1.0 : epsilon_;
            default:
                return r >= 0.0 ? 1.0 : kReferenceFloor;
        }
    }

    /// (H^eps)'(r) = exp(-|r|/eps) / (2 eps), defined for the Smooth variant
    /// only; the others are not differentiable.
    double derivative(double r) const {
        if (variant_ != HeavisideVariant::Smooth) {
            throw std::logic_error("HeavisideKernel::derivative: only the Smooth variant is differentiable");
        }
        return 0.5 / epsilon_ * std::exp(-std::abs(r) / epsilon_);
    }

    HeavisideKernel with_variant(HeavisideVariant v) const { return HeavisideKernel(epsilon_, v); }

  private:
    double smooth(double r) const {
        const double t = r / epsilon_;
        return r >= 0.0 ? 1.0 - 0.5 * std::exp(-t) : 0.5 * std::exp(t);
    }

    double epsilon_;
    HeavisideVariant variant_;
};

/// Odd saturation R(r) = c(1 - exp(-r)) for r >= 0, c(-1 + exp(r)) for r < 0.
/// Strictly increasing with range (-c, c) and r*R(r) >= 0.
class Saturation {
  public:
    explicit Saturation(double c = 1.0) : c_(c) {
        if (!(c > 0.0)) throw std::invalid_argument("Saturation: c must be positive");
    }

    double cap() const { return c_; }

    double operator()(double r) const {
        return r >= 0.0 ? c_ * (1.0 - std::exp(-r)) : c_ * (-1.0 + std::exp(r));
    }

  private:
    double c_;
};

}  // namespace fdtopo
