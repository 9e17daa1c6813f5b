#pragma once

#include <cmath>
#include <cstddef>

namespace qwalk {

// Kahan compensated accumulator. add() tracks the rounding error of each
// addition; value() returns the compensated sum.
class KahanSum {
public:
    constexpr KahanSum() = default;

    constexpr void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }

    // Fold another accumulator in, keeping its compensation term.
    constexpr void merge(const KahanSum& other) {
        add(other.sum_);
        add(-other.comp_);
    }

    constexpr double value() const { return sum_ - comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Sample mean and standard error of the mean from streamed sums.
// n < 2 or variance indistinguishable from cancellation noise gives 0.
struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(const KahanSum& sum, const KahanSum& sumsq, std::size_t n) {
    MeanStderr out;
    if (n == 0) return out;
    const double s = sum.value();
    const double s2 = sumsq.value();
    out.mean = s / static_cast<double>(n);
    if (n < 2) return out;
    double var = s2 - s * s / static_cast<double>(n);
    // Below this floor the difference is pure cancellation noise; identical
    // realizations (e.g. the no-disorder limit) then report exactly zero.
    if (var <= 64.0 * 2.220446049250313e-16 * std::abs(s2)) var = 0.0;
    var /= static_cast<double>(n - 1);
    out.stderr_ = std::sqrt(var / static_cast<double>(n));
    return out;
}

}  // namespace qwalk
