#pragma once

// One-step schemes on a coupled PathBundle: Euler, the general Milstein scheme,
// its (a, b) form for Ito equations, and a fine-grid reference solution.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "milstein/iterated.hpp"
#include "milstein/model.hpp"
#include "milstein/series.hpp"

namespace milstein {

enum class SchemeId { euler, milstein, milstein_ito54, reference };
enum class GridLevel { coarse, fine };

inline std::string to_string(SchemeId s) {
    switch (s) {
    case SchemeId::euler: return "euler";
    case SchemeId::milstein: return "milstein";
    case SchemeId::milstein_ito54: return "milstein54";
    case SchemeId::reference: return "reference";
    }
    return "?";
}

inline SchemeId parse_scheme(const std::string& s) {
    if (s == "euler") return SchemeId::euler;
    if (s == "milstein") return SchemeId::milstein;
    if (s == "milstein54") return SchemeId::milstein_ito54;
    if (s == "reference") return SchemeId::reference;
    throw InvalidArgument("unknown scheme '" + s + "' (expected euler, milstein or milstein54)");
}

inline constexpr double kDivergenceBound = 1e100;

struct SchemeOutput {
    SchemeId scheme = SchemeId::euler;
    GridLevel level = GridLevel::coarse;
    int coarse_n = 1; // points are k / coarse_n for coarse output
    int dim_q = 1;
    std::vector<double> values; // (points) x q
    bool diverged = false;
    int first_bad = -1;

    int points() const noexcept { return static_cast<int>(values.size()) / dim_q; }
    double at(int k, int i) const noexcept { return values[static_cast<std::size_t>(k * dim_q + i)]; }
    double final_value(int i = 0) const noexcept { return at(points() - 1, i); }
};

namespace detail {

inline bool bad_value(double v) noexcept { return !std::isfinite(v) || std::abs(v) > kDivergenceBound; }

// Appends x to out and flags the first bad point. Returns false once diverged.
inline bool push_state(SchemeOutput& out, const std::vector<double>& x) {
    const int k = out.points();
    out.values.insert(out.values.end(), x.begin(), x.end());
    for (double v : x) {
        if (bad_value(v)) {
            out.diverged = true;
            out.first_bad = k;
            return false;
        }
    }
    return true;
}

// Stops a diverged run by padding the remaining points with NaN.
inline void pad_nan(SchemeOutput& out, int total_points) {
    out.values.resize(static_cast<std::size_t>(total_points * out.dim_q),
                      std::numeric_limits<double>::quiet_NaN());
}

} // namespace detail

/// Euler steps on the coarse grid; with `interpolate` the continuous-type
/// interpolant X_{n(t)} + f(X_{n(t)}) (Y_t - Y_{n(t)}) is reported at fine points.
inline SchemeOutput euler(const SdeProblem& problem, const PathBundle& bundle, int coarse_n,
                          bool interpolate = false) {
    check_problem(problem);
    const int stride = bundle.grid.stride(coarse_n);
    const int q = problem.dim_q(), d = problem.dim_d();
    SchemeOutput out;
    out.scheme = SchemeId::euler;
    out.level = interpolate ? GridLevel::fine : GridLevel::coarse;
    out.coarse_n = coarse_n;
    out.dim_q = q;
    const int total = interpolate ? bundle.grid.fine_count + 1 : coarse_n + 1;
    out.values.reserve(static_cast<std::size_t>(total * q));
    std::vector<double> x = problem.x0, next(static_cast<std::size_t>(q));
    std::vector<double> f(static_cast<std::size_t>(q * d));
    if (!detail::push_state(out, x)) return detail::pad_nan(out, total), out;
    for (int k = 0; k < coarse_n; ++k) {
        problem.field.f(x, f);
        const int j0 = k * stride;
        const int first = interpolate ? j0 + 1 : j0 + stride;
        for (int j = first; j <= j0 + stride; ++j) {
            for (int i = 0; i < q; ++i) {
                double v = x[static_cast<std::size_t>(i)];
                for (int a = 0; a < d; ++a)
                    v += f[static_cast<std::size_t>(i * d + a)] * (bundle.y_at(j, a) - bundle.y_at(j0, a));
                next[static_cast<std::size_t>(i)] = v;
            }
            if (!detail::push_state(out, next)) return detail::pad_nan(out, total), out;
        }
        x = next;
    }
    return out;
}

/// Milstein steps: per coarse cell X^i += f^i dY + sum_{a,b} h^i_{ab} I_{ba},
/// h^i = (Df^i)^T f, with I the cell's iterated integral built from the fine
/// increments by `rule`.
inline SchemeOutput milstein(const SdeProblem& problem, const PathBundle& bundle, int coarse_n,
                             FineRule rule = FineRule::bridge, bool interpolate = false) {
    check_problem(problem);
    const int stride = bundle.grid.stride(coarse_n);
    const int q = problem.dim_q(), d = problem.dim_d();
    SchemeOutput out;
    out.scheme = SchemeId::milstein;
    out.level = interpolate ? GridLevel::fine : GridLevel::coarse;
    out.coarse_n = coarse_n;
    out.dim_q = q;
    const int total = interpolate ? bundle.grid.fine_count + 1 : coarse_n + 1;
    out.values.reserve(static_cast<std::size_t>(total * q));

    std::vector<double> x = problem.x0, next(static_cast<std::size_t>(q));
    FieldJet jet(q, d);
    std::vector<double> h;
    if (!detail::push_state(out, x)) return detail::pad_nan(out, total), out;

    auto emit = [&](const CellState& st, int j_end, std::span<const double> dz_last) {
        // Value of the scheme at fine point j_end given the cell state before the
        // last fine cell and that cell's dz.
        const int j0 = (j_end - 1) / stride * stride;
        for (int i = 0; i < q; ++i) {
            double v = x[static_cast<std::size_t>(i)];
            for (int a = 0; a < d; ++a) v += jet.F(i, a) * (bundle.y_at(j_end, a) - bundle.y_at(j0, a));
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    v += h[static_cast<std::size_t>((i * d + a) * d + b)] *
                         (st.z(b, a) + dz_last[static_cast<std::size_t>(b * d + a)]);
            next[static_cast<std::size_t>(i)] = v;
        }
    };

    bool ok = true;
    walk_cells(bundle, coarse_n, rule,
               [&](int j, const CellState& st, std::span<const double>, std::span<const double>,
                   double, std::span<const double> dz) {
                   if (!ok) return;
                   if (j % stride == 0) {
                       problem.field.evaluate(x, jet);
                       h = h_tensor(jet);
                   }
                   const bool cell_end = (j + 1) % stride == 0;
                   if (!interpolate && !cell_end) return;
                   emit(st, j + 1, dz);
                   ok = detail::push_state(out, next);
                   if (cell_end) x = next;
               });
    if (!ok) detail::pad_nan(out, total);
    return out;
}

/// The Ito form of the Milstein step for dX = a dW + b dt:
///   X + a dW + b dt + a a' ((dW)^2 - dt)/2 + b b' dt^2/2
///     + a' b \int s^(n) dW + a b' \int W^(n) ds,
/// coefficients at the cell's left end; the two cross integrals come from the
/// fine increments by `rule`.
inline SchemeOutput milstein_ito54(const SdeProblem& problem, const PathBundle& bundle,
                                   int coarse_n, FineRule rule = FineRule::bridge) {
    check_problem(problem);
    if (!problem.ito || problem.dim_d() != 2 || problem.dim_q() != 1) {
        throw InvalidArgument("milstein54 needs an (a, b) model on the (W, t) embedding, got '" +
                              problem.name + "'");
    }
    const auto& c = *problem.ito;
    const auto cells = coarse_cell_integrals(bundle, coarse_n, rule);
    const int stride = bundle.grid.stride(coarse_n);
    SchemeOutput out;
    out.scheme = SchemeId::milstein_ito54;
    out.coarse_n = coarse_n;
    out.dim_q = 1;
    const int total = coarse_n + 1;
    out.values.reserve(static_cast<std::size_t>(total));
    std::vector<double> x = problem.x0;
    if (!detail::push_state(out, x)) return detail::pad_nan(out, total), out;
    for (int k = 0; k < coarse_n; ++k) {
        const int j0 = k * stride, j1 = j0 + stride;
        const double dw = bundle.y_at(j1, 0) - bundle.y_at(j0, 0);
        const double dt = bundle.grid.time(j1) - bundle.grid.time(j0);
        const double* I = cells.data() + static_cast<std::size_t>(k * 4);
        const double s_dw = I[2]; // \int s^(n) dW
        const double w_ds = I[1]; // \int W^(n) ds
        const double xv = x[0];
        const double a = c.a(xv), da = c.da(xv), b = c.b(xv), db = c.db(xv);
        x[0] = xv + a * dw + b * dt + 0.5 * a * da * (dw * dw - dt) + 0.5 * b * db * dt * dt +
               da * b * s_dw + a * db * w_ds;
        if (!detail::push_state(out, x)) return detail::pad_nan(out, total), out;
    }
    return out;
}

/// Stand-in for the exact solution on the fine grid: the closed form when the
/// problem has one, otherwise Milstein with one coarse cell per fine cell.
inline SchemeOutput reference(const SdeProblem& problem, const PathBundle& bundle,
                              FineRule rule = FineRule::bridge) {
    SchemeOutput out;
    if (problem.closed_form) {
        out.scheme = SchemeId::reference;
        out.level = GridLevel::fine;
        out.coarse_n = bundle.grid.fine_count;
        out.dim_q = problem.dim_q();
        out.values = problem.closed_form(bundle);
        if (out.values.size() != static_cast<std::size_t>((bundle.grid.fine_count + 1) * out.dim_q)) {
            throw InvalidArgument("closed form of '" + problem.name + "' returned the wrong size");
        }
        for (int k = 0; k < out.points(); ++k)
            for (int i = 0; i < out.dim_q; ++i)
                if (detail::bad_value(out.at(k, i)) && !out.diverged) {
                    out.diverged = true;
                    out.first_bad = k;
                }
        return out;
    }
    out = milstein(problem, bundle, bundle.grid.fine_count, rule);
    out.scheme = SchemeId::reference;
    out.level = GridLevel::fine;
    return out;
}

inline SchemeOutput run_scheme(SchemeId scheme, const SdeProblem& problem, const PathBundle& bundle,
                               int coarse_n, FineRule rule = FineRule::bridge) {
    switch (scheme) {
    case SchemeId::euler: return euler(problem, bundle, coarse_n);
    case SchemeId::milstein: return milstein(problem, bundle, coarse_n, rule);
    case SchemeId::milstein_ito54: return milstein_ito54(problem, bundle, coarse_n, rule);
    case SchemeId::reference: return reference(problem, bundle, rule);
    }
    throw InvalidArgument("unknown scheme");
}

/// alpha (X^n - X) at the scheme's points; a fine-level scheme is compared at
/// every fine point, a coarse one at the coarse points.
inline StatSeries error_process(const SchemeOutput& scheme, const SchemeOutput& ref, double alpha) {
    if (ref.level != GridLevel::fine || ref.dim_q != scheme.dim_q) {
        throw InvalidArgument("error_process: reference must be a fine-grid solution of the same dimension");
    }
    const int fine_count = ref.points() - 1;
    const int steps = scheme.points() - 1;
    if (steps < 1 || fine_count % steps != 0) {
        throw InvalidArgument("error_process: scheme grid does not match the reference grid");
    }
    const int stride = fine_count / steps;
    const int q = scheme.dim_q;
    auto out = StatSeries::zeros(StatKind::U, steps, q == 1 ? std::vector<int>{} : std::vector<int>{q},
                                 scheme.level == GridLevel::fine);
    for (int k = 0; k <= steps; ++k)
        for (int i = 0; i < q; ++i)
            out.values[static_cast<std::size_t>(k * q + i)] = alpha * (scheme.at(k, i) - ref.at(k * stride, i));
    return out;
}

enum class Normalization { sqrt_n, n, n_squared };

inline double normalization(Normalization kind, int n) {
    const double x = n;
    switch (kind) {
    case Normalization::sqrt_n: return std::sqrt(x);
    case Normalization::n: return x;
    case Normalization::n_squared: return x * x;
    }
    return x;
}

} // namespace milstein
