#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace milstein {

/// Thrown for malformed inputs: bad sizes, mismatched dimensions, unknown names.
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Uniform grid on [0, 1]: `coarse_n` coarse cells, each split into
/// `fine_factor` fine cells. Times are always computed from integer indices.
struct Grid {
    int coarse_n = 1;
    int fine_factor = 1;
    int fine_count = 1;

    double time(int fine_index) const noexcept {
        return static_cast<double>(fine_index) / static_cast<double>(fine_count);
    }
    double fine_step() const noexcept { return 1.0 / static_cast<double>(fine_count); }
    int coarse_index_to_fine(int k) const noexcept { return k * fine_factor; }

    /// True when `n` coarse cells can be laid on this fine grid.
    bool supports(int n) const noexcept { return n >= 1 && fine_count % n == 0; }

    /// Fine cells per coarse cell for a coarse grid of `n` cells.
    int stride(int n) const {
        if (!supports(n)) {
            throw InvalidArgument("coarse grid " + std::to_string(n) +
                                  " does not divide fine grid " + std::to_string(fine_count));
        }
        return fine_count / n;
    }

    friend bool operator==(const Grid&, const Grid&) = default;
};

inline constexpr std::int64_t kMaxFineCount = std::int64_t{1} << 26;

inline Grid make_grid(int coarse_n, int fine_factor) {
    if (coarse_n < 1 || fine_factor < 1) {
        throw InvalidArgument("grid sizes must be positive");
    }
    const std::int64_t count = std::int64_t{coarse_n} * fine_factor;
    if (count > kMaxFineCount) {
        throw InvalidArgument("fine grid of " + std::to_string(count) + " points is too large");
    }
    return Grid{coarse_n, fine_factor, static_cast<int>(count)};
}

/// Fine index of n(t) for t = time(fine_index), on a coarse grid whose cells
/// hold `stride` fine cells. Uses n(t) = k/n for k/n < t <= (k+1)/n, so a
/// coarse point maps to the previous coarse point; anchor(0) = 0.
inline int coarse_anchor(int fine_index, int stride, int fine_count) {
    if (fine_index < 0 || fine_index > fine_count) {
        throw InvalidArgument("fine index " + std::to_string(fine_index) + " outside [0, " +
                              std::to_string(fine_count) + "]");
    }
    if (fine_index == 0) return 0;
    return ((fine_index - 1) / stride) * stride;
}

inline int coarse_anchor(const Grid& grid, int fine_index) {
    return coarse_anchor(fine_index, grid.fine_factor, grid.fine_count);
}

} // namespace milstein
