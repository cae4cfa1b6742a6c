#pragma once

#include <cstddef>
#include <stdexcept>

namespace vrmc {

/// Step-size schedule: either a fixed h > 0 or the decaying
/// h_l = 1 / (a + b*l) with a > 0, b >= 0 (non-increasing in l).
class StepSizeSchedule {
public:
    static StepSizeSchedule fixed(double h) {
        if (!(h > 0.0)) {
            throw std::invalid_argument("step size must be positive");
        }
        return StepSizeSchedule(Kind::fixed, h, 0.0);
    }

    static StepSizeSchedule decay(double a, double b) {
        if (!(a > 0.0) || b < 0.0) {
            throw std::invalid_argument("decay schedule needs a > 0 and b >= 0");
        }
        return StepSizeSchedule(Kind::decay, a, b);
    }

    double at(std::size_t l) const {
        if (kind_ == Kind::fixed) {
            return p0_;
        }
        return 1.0 / (p0_ + p1_ * static_cast<double>(l));
    }

    bool is_fixed() const noexcept { return kind_ == Kind::fixed; }

private:
    enum class Kind { fixed, decay };

    StepSizeSchedule(Kind kind, double p0, double p1) : kind_(kind), p0_(p0), p1_(p1) {}

    Kind kind_;
    double p0_;
    double p1_;
};

}  // namespace vrmc
