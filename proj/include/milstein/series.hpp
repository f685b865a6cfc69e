#pragma once

#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "milstein/grid.hpp"

namespace milstein {

enum class StatKind { Z, M, N, NY, QV, U, C, Path };

inline std::string to_string(StatKind k) {
    switch (k) {
    case StatKind::Z: return "Z";
    case StatKind::M: return "M";
    case StatKind::N: return "N";
    case StatKind::NY: return "NY";
    case StatKind::QV: return "QV";
    case StatKind::U: return "U";
    case StatKind::C: return "C";
    case StatKind::Path: return "path";
    }
    return "?";
}

/// Tensor-valued samples of a functional. Row k sits at time k / points_per_unit,
/// where points_per_unit is the fine count for fine series and n for coarse ones.
struct StatSeries {
    StatKind kind = StatKind::Z;
    bool fine = true;
    int steps = 1;              // rows - 1
    std::vector<int> shape;     // empty for scalars
    std::vector<double> values; // rows x size()

    int size() const noexcept {
        return std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>());
    }
    int rows() const noexcept { return steps + 1; }
    double time(int k) const noexcept { return static_cast<double>(k) / steps; }
    double at(int k, int idx = 0) const noexcept {
        return values[static_cast<std::size_t>(k) * static_cast<std::size_t>(size()) +
                      static_cast<std::size_t>(idx)];
    }
    std::span<const double> row(int k) const noexcept {
        const auto s = static_cast<std::size_t>(size());
        return {values.data() + static_cast<std::size_t>(k) * s, s};
    }
    double final_value(int idx = 0) const noexcept { return at(steps, idx); }

    static StatSeries zeros(StatKind kind, int steps, std::vector<int> shape, bool fine = true) {
        StatSeries s;
        s.kind = kind;
        s.fine = fine;
        s.steps = steps;
        s.shape = std::move(shape);
        s.values.assign(static_cast<std::size_t>(s.rows()) * static_cast<std::size_t>(s.size()), 0.0);
        return s;
    }
};

} // namespace milstein
