#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "esp/error.hpp"
#include "esp/grid.hpp"

namespace esp {

/// One ScalarField per class, all of the same shape. Tag distinguishes
/// feature stacks from segmentation functions at the type level.
template <class Tag>
class ClassStack {
public:
    ClassStack() = default;
    explicit ClassStack(std::vector<ScalarField> fields) : fields_(std::move(fields)) {
        for (const auto& f : fields_) {
            if (!f.same_shape(fields_.front())) throw DimensionMismatch("class stack: class fields differ in shape");
        }
    }
    ClassStack(std::size_t classes, std::size_t height, std::size_t width, double fill = 0.0)
        : fields_(classes, ScalarField(height, width, fill)) {}

    std::size_t classes() const noexcept { return fields_.size(); }
    std::size_t height() const noexcept { return fields_.empty() ? 0 : fields_.front().height(); }
    std::size_t width() const noexcept { return fields_.empty() ? 0 : fields_.front().width(); }
    std::size_t pixels() const noexcept { return height() * width(); }

    ScalarField& operator[](std::size_t i) { return fields_[i]; }
    const ScalarField& operator[](std::size_t i) const { return fields_[i]; }

    auto begin() noexcept { return fields_.begin(); }
    auto end() noexcept { return fields_.end(); }
    auto begin() const noexcept { return fields_.begin(); }
    auto end() const noexcept { return fields_.end(); }

    bool all_finite() const noexcept {
        for (const auto& f : fields_)
            if (!f.all_finite()) return false;
        return true;
    }

    friend bool operator==(const ClassStack&, const ClassStack&) = default;

private:
    std::vector<ScalarField> fields_;
};

struct FeatureTag {};
struct SegmentationTag {};

/// Per-class similarity o_i(x): larger means pixel x fits class i better.
using FeatureStack = ClassStack<FeatureTag>;

/// Per-pixel class probabilities u_i(x) on the simplex.
using SegmentationState = ClassStack<SegmentationTag>;

/// Largest |sum_i u_i(x) - 1| and whether every component lies in [0, 1].
struct SimplexCheck {
    double max_sum_error = 0.0;
    bool in_unit_interval = true;
};

inline SimplexCheck check_simplex(const SegmentationState& u) {
    SimplexCheck out;
    for (std::size_t p = 0; p < u.pixels(); ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.classes(); ++i) {
            const double v = u[i][p];
            if (!(v >= 0.0 && v <= 1.0)) out.in_unit_interval = false;
            s += v;
        }
        out.max_sum_error = std::max(out.max_sum_error, std::abs(s - 1.0));
    }
    return out;
}

} // namespace esp
