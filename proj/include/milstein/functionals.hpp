#pragma once

// Discretization functionals of a realized driver path:
//   Z^n_t   = \int_0^t Y^(n)_s dY_s^T
//   M^{np}_t = \int_0^t Z^(n)_s dY^p_s
//   N^{np}_t = \int_0^t Y^(n)_s Y^(n)T_s dY^p_s
// plus N^n(Y) in cube-sum form, empirical brackets, and the limits of n^2 N and
// n^2 M for finite-variation drivers.

#include <cmath>
#include <algorithm>
#include <functional>
#include <stdexcept>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "milstein/iterated.hpp"
#include "milstein/paths.hpp"
#include "milstein/series.hpp"

namespace milstein {

/// Z (d x d), M, N and \int C^(n) dY^p (each d x d x d, index [p][a][b]) on the
/// fine grid for one coarse grid.
struct FunctionalSet {
    int coarse_n = 1;
    FineRule rule = FineRule::bridge;
    StatSeries z, m, n, cdy;

    static int index(int d, int p, int a, int b) noexcept { return (p * d + a) * d + b; }
};

inline FunctionalSet compute_functionals(const PathBundle& bundle, int coarse_n,
                                         FineRule rule = FineRule::bridge) {
    const int d = bundle.dim_d;
    const int steps = bundle.grid.fine_count;
    FunctionalSet fs;
    fs.coarse_n = coarse_n;
    fs.rule = rule;
    fs.z = StatSeries::zeros(StatKind::Z, steps, {d, d});
    fs.m = StatSeries::zeros(StatKind::M, steps, {d, d, d});
    fs.n = StatSeries::zeros(StatKind::N, steps, {d, d, d});
    fs.cdy = StatSeries::zeros(StatKind::C, steps, {d, d, d});
    const auto d2 = static_cast<std::size_t>(d * d), d3 = d2 * static_cast<std::size_t>(d);
    walk_cells(bundle, coarse_n, rule,
               [&](int j, const CellState& st, std::span<const double> delta,
                   std::span<const double> c, double h, std::span<const double> dz) {
                   const auto cur = static_cast<std::size_t>(j), nxt = cur + 1;
                   for (std::size_t k = 0; k < d2; ++k)
                       fs.z.values[nxt * d2 + k] = fs.z.values[cur * d2 + k] + dz[k];
                   for (int p = 0; p < d; ++p)
                       for (int a = 0; a < d; ++a)
                           for (int b = 0; b < d; ++b) {
                               const auto k = static_cast<std::size_t>(FunctionalSet::index(d, p, a, b));
                               fs.m.values[nxt * d3 + k] =
                                   fs.m.values[cur * d3 + k] + st.dm(p, a, b, delta, c, h, rule);
                               fs.n.values[nxt * d3 + k] =
                                   fs.n.values[cur * d3 + k] + st.dn(p, a, b, delta, c, h, rule);
                               fs.cdy.values[nxt * d3 + k] =
                                   fs.cdy.values[cur * d3 + k] + st.dcy(p, a, b, delta, c, h, rule);
                           }
               });
    return fs;
}

inline StatSeries z_functional(const PathBundle& b, int n, FineRule rule = FineRule::bridge) {
    return compute_functionals(b, n, rule).z;
}
inline StatSeries m_functional(const PathBundle& b, int n, FineRule rule = FineRule::bridge) {
    return compute_functionals(b, n, rule).m;
}
inline StatSeries n_functional(const PathBundle& b, int n, FineRule rule = FineRule::bridge) {
    return compute_functionals(b, n, rule).n;
}

/// One coordinate of W (`brownian` = true) or of Y as a fine series.
inline StatSeries path_series(const PathBundle& b, int component, bool brownian = false) {
    auto s = StatSeries::zeros(StatKind::Path, b.grid.fine_count, {});
    for (int k = 0; k <= b.grid.fine_count; ++k)
        s.values[static_cast<std::size_t>(k)] = brownian ? b.w_at(k, component) : b.y_at(k, component);
    return s;
}

/// [A^ia, B^ib]_t = sum of products of fine increments up to t.
inline StatSeries empirical_qv(const StatSeries& a, int ia, const StatSeries& b, int ib) {
    if (a.steps != b.steps || a.fine != b.fine) {
        throw InvalidArgument("empirical_qv: series live on different grids");
    }
    if (ia < 0 || ia >= a.size() || ib < 0 || ib >= b.size()) {
        throw InvalidArgument("empirical_qv: component index out of range");
    }
    auto out = StatSeries::zeros(StatKind::QV, a.steps, {}, a.fine);
    double acc = 0.0;
    for (int k = 0; k < a.steps; ++k) {
        acc += (a.at(k + 1, ia) - a.at(k, ia)) * (b.at(k + 1, ib) - b.at(k, ib));
        out.values[static_cast<std::size_t>(k + 1)] = acc;
    }
    return out;
}

/// Terminal value of empirical_qv without materializing the series.
inline double qv_final(const StatSeries& a, int ia, const StatSeries& b, int ib) {
    if (a.steps != b.steps) throw InvalidArgument("qv_final: series live on different grids");
    double acc = 0.0;
    for (int k = 0; k < a.steps; ++k)
        acc += (a.at(k + 1, ia) - a.at(k, ia)) * (b.at(k + 1, ib) - b.at(k, ib));
    return acc;
}

/// Cube-sum form of 3 N^n_t(Y) for a scalar fine path y sampled at
/// fine_count + 1 points: sum over completed coarse cells of the cubed increment
/// plus the cube of the last partial increment, with the cells taken at
/// min(i/n, t).
inline double ny_cubesum(std::span<const double> y, const Grid& grid, int coarse_n, int fine_index) {
    if (y.size() != static_cast<std::size_t>(grid.fine_count + 1)) {
        throw InvalidArgument("ny_cubesum: path does not match the grid");
    }
    if (fine_index < 0 || fine_index > grid.fine_count) {
        throw InvalidArgument("ny_cubesum: time index out of range");
    }
    const int stride = grid.stride(coarse_n);
    double acc = 0.0;
    for (int start = 0; start < fine_index; start += stride) {
        const int end = std::min(start + stride, fine_index);
        const double inc = y[static_cast<std::size_t>(end)] - y[static_cast<std::size_t>(start)];
        acc += inc * inc * inc;
    }
    return acc;
}

/// \int_0^1 Y^(n) d[Y]_s for a scalar driver, by the same fine rule as the
/// functionals (model bracket under bridge, realized bracket under ito).
inline double offset_bracket_integral(const PathBundle& b, int coarse_n, FineRule rule) {
    if (b.dim_d != 1) throw InvalidArgument("offset_bracket_integral needs a scalar driver");
    double acc = 0.0;
    walk_cells(b, coarse_n, rule,
               [&](int, const CellState& st, std::span<const double> delta,
                   std::span<const double> c, double h, std::span<const double>) {
                   if (rule == FineRule::bridge) acc += c[0] * h * (st.off(0) + 0.5 * delta[0]);
                   else acc += st.off(0) * delta[0] * delta[0];
               });
    return acc;
}

/// Limits of n^2 N^{k}_{ij} and n^2 M^{k}_{ij} for Y_t = \int_0^t y_s ds:
/// (1/3 \int y^i y^j y^k, 1/6 \int y^i y^j y^k) over [0, t].
struct FvLimit {
    double n = 0.0;
    double m = 0.0;
    double error_estimate = 0.0;
};

inline FvLimit fv_limit_oracle(const std::function<std::vector<double>(double)>& density, int i,
                               int j, int k, double t = 1.0) {
    if (!density) throw InvalidArgument("fv_limit_oracle: no density");
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double s) {
            const auto y = density(s);
            return y.at(static_cast<std::size_t>(i)) * y.at(static_cast<std::size_t>(j)) *
                   y.at(static_cast<std::size_t>(k));
        },
        0.0, t, 15, 1e-14, &err);
    if (!std::isfinite(v) || err > 1e-10 * std::max(1.0, std::abs(v))) {
        throw std::runtime_error("fv_limit_oracle: quadrature did not converge");
    }
    return {v / 3.0, v / 6.0, err};
}

} // namespace milstein
