#pragma once

// SDE problems X_t = x0 + \int_0^t f(X_s) dY_s. The coefficient f: R^q -> R^{q x d}
// comes with analytic first and second derivatives; finite differences are
// only used by the checks below, never as a fallback.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "milstein/grid.hpp"
#include "milstein/paths.hpp"

namespace milstein {

/// f, Df and Hf evaluated at one point, flat row-major storage.
struct FieldJet {
    int q = 1;
    int d = 1;
    std::vector<double> f;  // q*d
    std::vector<double> df; // q*q*d
    std::vector<double> hf; // q*d*q*q

    FieldJet() = default;
    FieldJet(int dim_q, int dim_d)
        : q(dim_q), d(dim_d), f(static_cast<std::size_t>(dim_q * dim_d)),
          df(static_cast<std::size_t>(dim_q * dim_q * dim_d)),
          hf(static_cast<std::size_t>(dim_q * dim_d * dim_q * dim_q)) {}

    /// f^{ij}
    double F(int i, int j) const noexcept { return f[static_cast<std::size_t>(i * d + j)]; }
    /// f_k^{ij} = d f^{ij} / d x_k, i.e. entry (k, j) of Df^i.
    double Df(int i, int k, int j) const noexcept {
        return df[static_cast<std::size_t>((i * q + k) * d + j)];
    }
    /// entry (k, l) of the Hessian of f^{ij}.
    double Hf(int i, int j, int k, int l) const noexcept {
        return hf[static_cast<std::size_t>(((i * d + j) * q + k) * q + l)];
    }
};

/// Coefficient field. Each callback writes into a preallocated span laid out as
/// in FieldJet; callbacks must be pure and reentrant.
struct CoefficientField {
    using Callback = std::function<void(std::span<const double>, std::span<double>)>;

    int dim_q = 1;
    int dim_d = 1;
    Callback f;
    Callback df;
    Callback hf;
    double growth_bound = 1.0;

    void evaluate(std::span<const double> x, FieldJet& jet) const {
        if (jet.q != dim_q || jet.d != dim_d) jet = FieldJet(dim_q, dim_d);
        f(x, jet.f);
        df(x, jet.df);
        hf(x, jet.hf);
    }

    FieldJet jet(std::span<const double> x) const {
        FieldJet j(dim_q, dim_d);
        evaluate(x, j);
        return j;
    }
};

/// h^i = (Df^i)^T f, returned as q blocks of d x d, h^i_{ab} = sum_k f_k^{ia} f^{kb}.
inline std::vector<double> h_tensor(const FieldJet& jet) {
    const int q = jet.q, d = jet.d;
    std::vector<double> h(static_cast<std::size_t>(q * d * d), 0.0);
    for (int i = 0; i < q; ++i)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double acc = 0.0;
                for (int k = 0; k < q; ++k) acc += jet.Df(i, k, a) * jet.F(k, b);
                h[static_cast<std::size_t>((i * d + a) * d + b)] = acc;
            }
    return h;
}

inline std::vector<double> h_tensor(const CoefficientField& field, std::span<const double> x) {
    const auto jet = field.jet(x);
    for (double v : jet.f)
        if (!std::isfinite(v)) throw InvalidArgument("h_tensor: non-finite f");
    auto h = h_tensor(jet);
    for (double v : h)
        if (!std::isfinite(v)) throw InvalidArgument("h_tensor: non-finite result");
    return h;
}

/// G^{ij} = f^T Hf^{ij} + sum_k f_k^{ij} (Df^k)^T, stored as q*d blocks of
/// d x q; for q = d = 1 this is f f'' + (f')^2.
inline std::vector<double> g_tensor(const FieldJet& jet) {
    const int q = jet.q, d = jet.d;
    std::vector<double> g(static_cast<std::size_t>(q * d * d * q), 0.0);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < d; ++j)
            for (int a = 0; a < d; ++a)
                for (int l = 0; l < q; ++l) {
                    double acc = 0.0;
                    for (int m = 0; m < q; ++m) acc += jet.F(m, a) * jet.Hf(i, j, m, l);
                    for (int k = 0; k < q; ++k) acc += jet.Df(i, k, j) * jet.Df(k, l, a);
                    g[static_cast<std::size_t>(((i * d + j) * d + a) * q + l)] = acc;
                }
    return g;
}

inline std::vector<double> g_tensor(const CoefficientField& field, std::span<const double> x) {
    return g_tensor(field.jet(x));
}

/// Scalar coefficients of dX = a(X) dW + b(X) dt with their derivatives.
struct ItoCoefficients {
    std::function<double(double)> a, da, d2a;
    std::function<double(double)> b, db, d2b;
};

/// Maps (a, b) onto f = (a(x), b(x)) driven by Y = (W, t)^T.
inline CoefficientField embed_ito(const ItoCoefficients& c, double growth_bound) {
    CoefficientField field;
    field.dim_q = 1;
    field.dim_d = 2;
    field.growth_bound = growth_bound;
    field.f = [c](std::span<const double> x, std::span<double> out) {
        out[0] = c.a(x[0]);
        out[1] = c.b(x[0]);
    };
    field.df = [c](std::span<const double> x, std::span<double> out) {
        out[0] = c.da(x[0]);
        out[1] = c.db(x[0]);
    };
    field.hf = [c](std::span<const double> x, std::span<double> out) {
        out[0] = c.d2a(x[0]);
        out[1] = c.d2b(x[0]);
    };
    return field;
}

struct SdeProblem {
    std::string name;
    CoefficientField field;
    DriverSpec driver;
    std::vector<double> x0;
    /// Exact X on the bundle's fine grid, (fine_count+1) x q, when known.
    std::function<std::vector<double>(const PathBundle&)> closed_form;
    /// Set for problems built from the (a, b) embedding.
    std::optional<ItoCoefficients> ito;
    /// Density y of a finite-variation driver Y_t = \int_0^t y_s ds.
    std::function<std::vector<double>(double)> fv_density;
    /// Known variance of the limit U_1, when it has a closed form.
    std::optional<double> limit_variance;

    int dim_q() const noexcept { return field.dim_q; }
    int dim_d() const noexcept { return field.dim_d; }
};

inline void check_problem(const SdeProblem& p) {
    if (p.field.dim_d != p.driver.dim_d) {
        throw InvalidArgument("problem '" + p.name + "': field has d=" +
                              std::to_string(p.field.dim_d) + " but driver has d=" +
                              std::to_string(p.driver.dim_d));
    }
    if (static_cast<int>(p.x0.size()) != p.field.dim_q) {
        throw InvalidArgument("problem '" + p.name + "': x0 has the wrong dimension");
    }
}

namespace detail {

inline CoefficientField linear_scalar_field() {
    CoefficientField field;
    field.f = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
    field.df = [](std::span<const double>, std::span<double> out) { out[0] = 1.0; };
    field.hf = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    return field;
}

// Applies g(t, w) pointwise along the bundle using W's first coordinate.
template <class G>
std::vector<double> along_path(const PathBundle& b, G&& g) {
    std::vector<double> x(static_cast<std::size_t>(b.grid.fine_count + 1));
    for (int k = 0; k <= b.grid.fine_count; ++k) x[static_cast<std::size_t>(k)] = g(b.grid.time(k), b.w_at(k, 0));
    return x;
}

} // namespace detail

inline SdeProblem make_ito_problem(std::string name, ItoCoefficients coeffs, double x0,
                                   double growth_bound) {
    SdeProblem p;
    p.name = std::move(name);
    p.field = embed_ito(coeffs, growth_bound);
    p.driver = drivers::ito_embedding();
    p.x0 = {x0};
    p.ito = std::move(coeffs);
    return p;
}

namespace models {

/// dX = X dW, X_0 = 1.
inline SdeProblem gbm() {
    SdeProblem p;
    p.name = "gbm";
    p.field = detail::linear_scalar_field();
    p.driver = drivers::brownian(1);
    p.x0 = {1.0};
    p.closed_form = [](const PathBundle& b) {
        return detail::along_path(b, [](double t, double w) { return std::exp(w - 0.5 * t); });
    };
    // E[U_1^2] solves m' = m + e^t / 6, m(0) = 0.
    p.limit_variance = std::numbers::e / 6.0;
    return p;
}

/// dX = alpha X dW + beta X dt through the (W, t) embedding.
inline SdeProblem gbm_drift(double alpha = 1.0, double beta = 1.0) {
    ItoCoefficients c;
    c.a = [alpha](double x) { return alpha * x; };
    c.da = [alpha](double) { return alpha; };
    c.d2a = [](double) { return 0.0; };
    c.b = [beta](double x) { return beta * x; };
    c.db = [beta](double) { return beta; };
    c.d2b = [](double) { return 0.0; };
    auto p = make_ito_problem("gbm-drift", std::move(c), 1.0, std::abs(alpha) + std::abs(beta));
    p.closed_form = [alpha, beta](const PathBundle& b) {
        return detail::along_path(b, [=](double t, double w) {
            return std::exp((beta - 0.5 * alpha * alpha) * t + alpha * w);
        });
    };
    return p;
}

/// X' = X driven by Y_t = t, X_1 = e.
inline SdeProblem det_exp() {
    SdeProblem p;
    p.name = "det-exp";
    p.field = detail::linear_scalar_field();
    p.driver = drivers::time();
    p.x0 = {1.0};
    p.closed_form = [](const PathBundle& b) {
        return detail::along_path(b, [](double t, double) { return std::exp(t); });
    };
    p.fv_density = [](double) { return std::vector<double>{1.0}; };
    return p;
}

/// X' = s X driven by Y_t = t^2 / 2. The reference is exp(Y) along the
/// tabulated driver, the exact solution for the piecewise-linear path.
inline SdeProblem fv_ramp() {
    SdeProblem p;
    p.name = "fv-ramp";
    p.field = detail::linear_scalar_field();
    p.driver = {1, 1, [](double) { return std::vector<double>{0.0}; },
                [](double s) { return std::vector<double>{s}; }, "ramp-drift"};
    p.x0 = {1.0};
    p.closed_form = [](const PathBundle& b) {
        std::vector<double> x(static_cast<std::size_t>(b.grid.fine_count + 1));
        for (int k = 0; k <= b.grid.fine_count; ++k) x[static_cast<std::size_t>(k)] = std::exp(b.y_at(k, 0));
        return x;
    };
    p.fv_density = [](double s) { return std::vector<double>{s}; };
    return p;
}

/// dX = vol dW - kappa X dt, X_0 = 1.
inline SdeProblem ou(double vol = 1.0, double kappa = 1.0) {
    ItoCoefficients c;
    c.a = [vol](double) { return vol; };
    c.da = [](double) { return 0.0; };
    c.d2a = [](double) { return 0.0; };
    c.b = [kappa](double x) { return -kappa * x; };
    c.db = [kappa](double) { return -kappa; };
    c.d2b = [](double) { return 0.0; };
    return make_ito_problem("ou", std::move(c), 1.0, std::abs(vol) + std::abs(kappa));
}

/// dX = (1 + sin(X)/2) dW + cos(X) dt; both a'' and b'' are nonzero.
inline SdeProblem ito_trig() {
    ItoCoefficients c;
    c.a = [](double x) { return 1.0 + 0.5 * std::sin(x); };
    c.da = [](double x) { return 0.5 * std::cos(x); };
    c.d2a = [](double x) { return -0.5 * std::sin(x); };
    c.b = [](double x) { return std::cos(x); };
    c.db = [](double x) { return -std::sin(x); };
    c.d2b = [](double x) { return -std::cos(x); };
    return make_ito_problem("ito-trig", std::move(c), 1.0, 2.5);
}

/// q = d = 2 linear field f(x) = [A1 x | A2 x] with non-commuting A1, A2, driven
/// by a 2-d Brownian motion, so the Levy area enters the scheme.
inline SdeProblem linear2d() {
    // A1 = [[0.5, 0], [0, -0.3]], A2 = [[0, 0.4], [-0.4, 0]]
    static constexpr double A[2][2][2] = {{{0.5, 0.0}, {0.0, -0.3}}, {{0.0, 0.4}, {-0.4, 0.0}}};
    SdeProblem p;
    p.name = "linear2d";
    p.field.dim_q = 2;
    p.field.dim_d = 2;
    p.field.growth_bound = 1.0;
    // f^{ij}(x) = (A_j x)_i
    p.field.f = [](std::span<const double> x, std::span<double> out) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out[i * 2 + j] = A[j][i][0] * x[0] + A[j][i][1] * x[1];
    };
    p.field.df = [](std::span<const double>, std::span<double> out) {
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k)
                for (int j = 0; j < 2; ++j) out[(i * 2 + k) * 2 + j] = A[j][i][k];
    };
    p.field.hf = [](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    p.driver = drivers::brownian(2);
    p.x0 = {1.0, 0.5};
    return p;
}

} // namespace models

inline const std::map<std::string, std::function<SdeProblem()>>& builtin_models() {
    static const std::map<std::string, std::function<SdeProblem()>> registry = {
        {"gbm", [] { return models::gbm(); }},
        {"gbm-drift", [] { return models::gbm_drift(); }},
        {"det-exp", [] { return models::det_exp(); }},
        {"fv-ramp", [] { return models::fv_ramp(); }},
        {"ou", [] { return models::ou(); }},
        {"ito-trig", [] { return models::ito_trig(); }},
        {"linear2d", [] { return models::linear2d(); }},
    };
    return registry;
}

inline SdeProblem make_model(const std::string& name) {
    const auto& reg = builtin_models();
    const auto it = reg.find(name);
    if (it == reg.end()) throw InvalidArgument("unknown model '" + name + "'");
    auto p = it->second();
    check_problem(p);
    return p;
}

/// max |Df - centered FD of f| at x with step h.
inline double fd_gradient_error(const CoefficientField& field, std::span<const double> x, double h) {
    const int q = field.dim_q, d = field.dim_d;
    const auto jet = field.jet(x);
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    FieldJet plus(q, d), minus(q, d);
    double err = 0.0;
    for (int k = 0; k < q; ++k) {
        xp = {x.begin(), x.end()};
        xm = {x.begin(), x.end()};
        xp[k] += h;
        xm[k] -= h;
        field.f(xp, plus.f);
        field.f(xm, minus.f);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < d; ++j) {
                const double fd = (plus.F(i, j) - minus.F(i, j)) / (2.0 * h);
                err = std::max(err, std::abs(fd - jet.Df(i, k, j)));
            }
    }
    return err;
}

/// max |Hf - centered FD of Df| at x with step h.
inline double fd_hessian_error(const CoefficientField& field, std::span<const double> x, double h) {
    const int q = field.dim_q, d = field.dim_d;
    const auto jet = field.jet(x);
    std::vector<double> xp, xm;
    FieldJet plus(q, d), minus(q, d);
    double err = 0.0;
    for (int l = 0; l < q; ++l) {
        xp = {x.begin(), x.end()};
        xm = {x.begin(), x.end()};
        xp[l] += h;
        xm[l] -= h;
        field.df(xp, plus.df);
        field.df(xm, minus.df);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < q; ++k) {
                    const double fd = (plus.Df(i, k, j) - minus.Df(i, k, j)) / (2.0 * h);
                    err = std::max(err, std::abs(fd - jet.Hf(i, j, k, l)));
                }
    }
    return err;
}

/// max over i, j of the largest entry of Hf^{ij} - (Hf^{ij})^T.
inline double hessian_asymmetry(const CoefficientField& field, std::span<const double> x) {
    const auto jet = field.jet(x);
    double err = 0.0;
    for (int i = 0; i < jet.q; ++i)
        for (int j = 0; j < jet.d; ++j)
            for (int k = 0; k < jet.q; ++k)
                for (int l = 0; l < jet.q; ++l)
                    err = std::max(err, std::abs(jet.Hf(i, j, k, l) - jet.Hf(i, j, l, k)));
    return err;
}

/// ||f(x)|| / (1 + ||x||), Frobenius / Euclidean norms.
inline double growth_ratio(const CoefficientField& field, std::span<const double> x) {
    const auto jet = field.jet(x);
    double fn = 0.0, xn = 0.0;
    for (double v : jet.f) fn += v * v;
    for (double v : x) xn += v * v;
    return std::sqrt(fn) / (1.0 + std::sqrt(xn));
}

} // namespace milstein
