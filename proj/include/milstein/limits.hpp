#pragma once

// Simulation of the limit objects of the normalized Milstein error: the limits
// M and N of n M^n and n N^n, the drift-corrected N, the linear SDE for the
// limit error U, its explicit scalar Ito form, and the deterministic ODE limit
// of n^2 U^n for finite-variation drivers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "milstein/functionals.hpp"
#include "milstein/model.hpp"
#include "milstein/paths.hpp"
#include "milstein/random.hpp"
#include "milstein/schemes.hpp"
#include "milstein/series.hpp"

namespace milstein {

/// m^3 Brownian motions B^{puv} and m Brownian motions Wbar^p, independent of
/// the driver's W.
struct AuxiliaryNoise {
    Grid grid;
    int dim_m = 1;
    std::vector<double> b;    // (fine_count+1) x m^3, flat index (p*m + u)*m + v
    std::vector<double> wbar; // (fine_count+1) x m

    int b_count() const noexcept { return dim_m * dim_m * dim_m; }
    double b_at(int k, int p, int u, int v) const noexcept {
        return b[static_cast<std::size_t>(k * b_count() + (p * dim_m + u) * dim_m + v)];
    }
    double wbar_at(int k, int p) const noexcept { return wbar[static_cast<std::size_t>(k * dim_m + p)]; }
};

inline AuxiliaryNoise sample_aux(const Grid& grid, int dim_m, std::uint64_t seed, std::uint64_t draw) {
    AuxiliaryNoise aux;
    aux.grid = grid;
    aux.dim_m = dim_m;
    aux.b = sample_brownian(grid, dim_m * dim_m * dim_m, StreamKey{seed, draw, stream::kAuxB});
    aux.wbar = sample_brownian(grid, dim_m, StreamKey{seed, draw, stream::kAuxWbar});
    return aux;
}

/// V^{puv} = (B^{puv} + B^{pvu}) / sqrt 2 + (sqrt3/2 W^p + Wbar^p / 2) 1(u = v).
inline double v_at(const AuxiliaryNoise& aux, const PathBundle& bundle, int k, int p, int u, int v) {
    double x = std::numbers::sqrt2 / 2.0 * (aux.b_at(k, p, u, v) + aux.b_at(k, p, v, u));
    if (u == v) x += 0.5 * std::numbers::sqrt3 * bundle.w_at(k, p) + 0.5 * aux.wbar_at(k, p);
    return x;
}

struct LimitMN {
    StatSeries m; // index FunctionalSet::index(d, j, a, b)
    StatSeries n;
};

/// Left-point sums of
///   M^j = 1/sqrt6 sum_p \int sigma sigma^{jp} dB^p sigma^T,
///   N^j = 1/sqrt3 sum_p \int sigma sigma^{jp} dV^p sigma^T.
inline LimitMN simulate_mn(const PathBundle& bundle, const AuxiliaryNoise& aux) {
    if (!bundle.driver) throw InvalidArgument("simulate_mn: bundle has no driver table");
    if (aux.dim_m != bundle.dim_m || aux.grid.fine_count != bundle.grid.fine_count) {
        throw InvalidArgument("simulate_mn: auxiliary noise does not match the bundle");
    }
    const DriverTable& table = *bundle.driver;
    const int d = bundle.dim_d, m = bundle.dim_m, steps = bundle.grid.fine_count;
    const auto d3 = static_cast<std::size_t>(d * d * d);
    LimitMN out{StatSeries::zeros(StatKind::M, steps, {d, d, d}),
                StatSeries::zeros(StatKind::N, steps, {d, d, d})};
    const double km = 1.0 / std::sqrt(6.0), kn = 1.0 / std::sqrt(3.0);
    std::vector<double> db(static_cast<std::size_t>(m * m * m)), dv(db.size());
    // sandwich[a][b] for one (p,u,v) = sigma^{au} sigma^{bv}
    for (int k = 0; k < steps; ++k) {
        for (int p = 0; p < m; ++p)
            for (int u = 0; u < m; ++u)
                for (int v = 0; v < m; ++v) {
                    const auto idx = static_cast<std::size_t>((p * m + u) * m + v);
                    db[idx] = aux.b_at(k + 1, p, u, v) - aux.b_at(k, p, u, v);
                    dv[idx] = v_at(aux, bundle, k + 1, p, u, v) - v_at(aux, bundle, k, p, u, v);
                }
        const auto cur = static_cast<std::size_t>(k) * d3, nxt = cur + d3;
        for (int j = 0; j < d; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double sm = 0.0, sn = 0.0;
                    for (int p = 0; p < m; ++p) {
                        const double sjp = table.sigma(k, j, p);
                        if (sjp == 0.0) continue;
                        for (int u = 0; u < m; ++u) {
                            const double sau = table.sigma(k, a, u);
                            if (sau == 0.0) continue;
                            for (int v = 0; v < m; ++v) {
                                const double w = sjp * sau * table.sigma(k, b, v);
                                const auto idx = static_cast<std::size_t>((p * m + u) * m + v);
                                sm += w * db[idx];
                                sn += w * dv[idx];
                            }
                        }
                    }
                    const auto i = static_cast<std::size_t>(FunctionalSet::index(d, j, a, b));
                    out.m.values[nxt + i] = out.m.values[cur + i] + km * sm;
                    out.n.values[nxt + i] = out.n.values[cur + i] + kn * sn;
                }
    }
    return out;
}

/// N-bar^j = N^j + 1/2 \int c a^j ds, left-point in s.
inline StatSeries drift_correct(const StatSeries& n, const DriverTable& table) {
    StatSeries out = n;
    if (!table.has_drift()) return out;
    const int d = table.dim_d();
    if (n.size() != d * d * d || n.steps != table.grid().fine_count) {
        throw InvalidArgument("drift_correct: series does not match the driver");
    }
    const double h = table.grid().fine_step();
    const auto d3 = static_cast<std::size_t>(d * d * d);
    std::vector<double> acc(d3, 0.0);
    for (int k = 0; k < n.steps; ++k) {
        for (int j = 0; j < d; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    acc[static_cast<std::size_t>(FunctionalSet::index(d, j, a, b))] +=
                        0.5 * table.c(k, a, b) * table.drift(k, j) * h;
        for (std::size_t i = 0; i < d3; ++i) out.values[(static_cast<std::size_t>(k) + 1) * d3 + i] += acc[i];
    }
    return out;
}

namespace detail {

// P^{ij}_{ab} = sum_k f_k^{ij} h^k_{ab} and Q^{ij}_{ab} = (f^T Hf^{ij} f)_{ab},
// both flat [((i*d + j)*d + a)*d + b].
inline void error_coefficients(const FieldJet& jet, std::vector<double>& P, std::vector<double>& Q) {
    const int q = jet.q, d = jet.d;
    const auto h = h_tensor(jet);
    P.assign(static_cast<std::size_t>(q * d * d * d), 0.0);
    Q.assign(P.size(), 0.0);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < d; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double p = 0.0, s = 0.0;
                    for (int k = 0; k < q; ++k) {
                        p += jet.Df(i, k, j) * h[static_cast<std::size_t>((k * d + a) * d + b)];
                        for (int l = 0; l < q; ++l) s += jet.F(k, a) * jet.Hf(i, j, k, l) * jet.F(l, b);
                    }
                    const auto idx = static_cast<std::size_t>(((i * d + j) * d + a) * d + b);
                    P[idx] = p;
                    Q[idx] = s;
                }
}

} // namespace detail

/// Left-point Euler integration of
///   dU^i = sum_{k,j} U^k f_k^{ij}(X) dY^j - sum_j tr(P^{ij} dM^j) - 1/2 sum_j tr(Q^{ij} dN^j)
/// along the reference path x_ref ((fine_count+1) x q).
inline StatSeries simulate_u(const SdeProblem& problem, const PathBundle& bundle,
                             const std::vector<double>& x_ref, const StatSeries& m, const StatSeries& n) {
    const int q = problem.dim_q(), d = problem.dim_d(), steps = bundle.grid.fine_count;
    if (bundle.dim_d != d) throw InvalidArgument("simulate_u: driver dimension does not match the field");
    if (x_ref.size() != static_cast<std::size_t>((steps + 1) * q)) {
        throw InvalidArgument("simulate_u: reference path does not match the grid");
    }
    if (m.steps != steps || n.steps != steps || m.size() != d * d * d || n.size() != d * d * d) {
        throw InvalidArgument("simulate_u: M or N does not match the grid");
    }
    auto u = StatSeries::zeros(StatKind::U, steps, {q});
    FieldJet jet(q, d);
    std::vector<double> P, Q, next(static_cast<std::size_t>(q));
    for (int k = 0; k < steps; ++k) {
        problem.field.evaluate({x_ref.data() + static_cast<std::size_t>(k * q), static_cast<std::size_t>(q)}, jet);
        detail::error_coefficients(jet, P, Q);
        const auto cur = u.row(k);
        for (int i = 0; i < q; ++i) {
            double du = 0.0;
            for (int j = 0; j < d; ++j) {
                double lin = 0.0;
                for (int l = 0; l < q; ++l) lin += cur[static_cast<std::size_t>(l)] * jet.Df(i, l, j);
                du += lin * bundle.dy(k, j);
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        const auto fi = FunctionalSet::index(d, j, a, b);
                        const auto idx = static_cast<std::size_t>(((i * d + j) * d + a) * d + b);
                        du -= P[idx] * (m.at(k + 1, fi) - m.at(k, fi));
                        du -= 0.5 * Q[idx] * (n.at(k + 1, fi) - n.at(k, fi));
                    }
            }
            next[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)] + du;
        }
        std::copy(next.begin(), next.end(), u.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * q));
    }
    return u;
}

struct LimitRealization {
    LimitMN mn;          // n holds the drift-corrected N
    StatSeries u;
    std::vector<double> x_ref;
    PathBundle bundle;
};

inline constexpr int kDefaultLimitFineCount = 4096;

/// One draw of (M, N-bar, U) for `problem` on a grid of `fine_count` cells.
/// The driver W uses stream kLimitDriver, the auxiliary noise kAuxB / kAuxWbar.
inline LimitRealization limit_draw(const SdeProblem& problem, std::shared_ptr<const DriverTable> table,
                                   std::uint64_t seed, std::uint64_t draw) {
    LimitRealization r;
    r.bundle = make_bundle(std::move(table), seed, draw, stream::kLimitDriver);
    const auto aux = sample_aux(r.bundle.grid, r.bundle.dim_m, seed, draw);
    r.mn = simulate_mn(r.bundle, aux);
    r.mn.n = drift_correct(r.mn.n, *r.bundle.driver);
    r.x_ref = reference(problem, r.bundle).values;
    r.u = simulate_u(problem, r.bundle, r.x_ref, r.mn.m, r.mn.n);
    return r;
}

inline std::shared_ptr<const DriverTable> limit_table(const SdeProblem& problem, int fine_count) {
    return std::make_shared<const DriverTable>(problem.driver, make_grid(1, fine_count));
}

/// Left-point Euler integration of the explicit limit of dX = a dW + b dt:
///   dU = U (a' dW + b' ds) - a^2 b''/4 ds - a a'^2 dB1/sqrt6
///        - a^2 a'' (dB1/sqrt6 + dB2/sqrt48 + dW/4)
/// with B1 = B^{111} and B2 = Wbar^1 of `aux`.
inline StatSeries ito_limit_sde(const SdeProblem& problem, const PathBundle& bundle,
                                const std::vector<double>& x_ref, const AuxiliaryNoise& aux) {
    if (!problem.ito) throw InvalidArgument("ito_limit_sde: '" + problem.name + "' is not an Ito model");
    const auto& c = *problem.ito;
    const int steps = bundle.grid.fine_count;
    if (x_ref.size() != static_cast<std::size_t>(steps + 1)) {
        throw InvalidArgument("ito_limit_sde: reference path does not match the grid");
    }
    const double h = bundle.grid.fine_step();
    auto u = StatSeries::zeros(StatKind::U, steps, {1});
    for (int k = 0; k < steps; ++k) {
        const double x = x_ref[static_cast<std::size_t>(k)];
        const double a = c.a(x), da = c.da(x), d2a = c.d2a(x), db = c.db(x), d2b = c.d2b(x);
        const double dw = bundle.dw(k, 0);
        const double db1 = aux.b_at(k + 1, 0, 0, 0) - aux.b_at(k, 0, 0, 0);
        const double db2 = aux.wbar_at(k + 1, 0) - aux.wbar_at(k, 0);
        const double cur = u.at(k);
        u.values[static_cast<std::size_t>(k + 1)] =
            cur + cur * (da * dw + db * h) - 0.25 * a * a * d2b * h - a * da * da * db1 / std::sqrt(6.0) -
            a * a * d2a * (db1 / std::sqrt(6.0) + db2 / std::sqrt(48.0) + 0.25 * dw);
    }
    return u;
}

struct FvOdeResult {
    std::vector<double> times;
    std::vector<double> x; // points x q
    std::vector<double> u; // points x q, Richardson-corrected at the final step count
    int dim_q = 1;
    int steps = 0;
    double error_estimate = 0.0;

    double final_u(int i = 0) const { return u[u.size() - static_cast<std::size_t>(dim_q - i)]; }
    double final_x(int i = 0) const { return x[x.size() - static_cast<std::size_t>(dim_q - i)]; }
};

/// Limit of n^2 U^n for a driver dY = y(s) ds:
///   X' = f(X) y,  U^i' = sum_{k,j} U^k f_k^{ij} y^j - 1/6 sum_j y^j y^T G^{ij} f y.
/// Classical RK4 on a uniform grid, halving the step until two successive
/// final values agree to `tol`.
inline FvOdeResult fv_limit_ode(const SdeProblem& problem, double tol = 1e-10) {
    if (!problem.fv_density) throw InvalidArgument("fv_limit_ode: '" + problem.name + "' has no drift density");
    const int q = problem.dim_q(), d = problem.dim_d();
    using State = std::vector<double>;
    auto rhs = [&](const State& s, State& ds, double t) {
        const auto y = problem.fv_density(t);
        const auto jet = problem.field.jet({s.data(), static_cast<std::size_t>(q)});
        const auto g = g_tensor(jet);
        // (G^{ij} f)_{ab}
        for (int i = 0; i < q; ++i) {
            double dx = 0.0, du = 0.0;
            for (int j = 0; j < d; ++j) {
                const double yj = y[static_cast<std::size_t>(j)];
                dx += jet.F(i, j) * yj;
                for (int k = 0; k < q; ++k) du += s[static_cast<std::size_t>(q + k)] * jet.Df(i, k, j) * yj;
                double quad = 0.0;
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        double gf = 0.0;
                        for (int l = 0; l < q; ++l)
                            gf += g[static_cast<std::size_t>(((i * d + j) * d + a) * q + l)] * jet.F(l, b);
                        quad += y[static_cast<std::size_t>(a)] * gf * y[static_cast<std::size_t>(b)];
                    }
                du -= yj * quad / 6.0;
            }
            ds[static_cast<std::size_t>(i)] = dx;
            ds[static_cast<std::size_t>(q + i)] = du;
        }
    };
    auto solve = [&](int steps, std::vector<double>& times, std::vector<State>& states) {
        boost::numeric::odeint::runge_kutta4<State> stepper;
        State s(static_cast<std::size_t>(2 * q), 0.0);
        std::copy(problem.x0.begin(), problem.x0.end(), s.begin());
        times.clear();
        states.clear();
        boost::numeric::odeint::integrate_n_steps(
            stepper, rhs, s, 0.0, 1.0 / steps, steps, [&](const State& st, double t) {
                times.push_back(t);
                states.push_back(st);
            });
    };
    std::vector<double> t_prev, t_cur;
    std::vector<State> s_prev, s_cur;
    int steps = 64;
    solve(steps, t_prev, s_prev);
    for (; steps <= (1 << 20); steps *= 2) {
        solve(2 * steps, t_cur, s_cur);
        double diff = 0.0;
        for (int i = 0; i < 2 * q; ++i)
            diff = std::max(diff, std::abs(s_cur.back()[static_cast<std::size_t>(i)] -
                                           s_prev.back()[static_cast<std::size_t>(i)]));
        if (diff <= tol) {
            FvOdeResult r;
            r.dim_q = q;
            r.steps = 2 * steps;
            r.error_estimate = diff / 15.0;
            r.times = t_cur;
            for (std::size_t k = 0; k < s_cur.size(); ++k) {
                for (int i = 0; i < q; ++i) r.x.push_back(s_cur[k][static_cast<std::size_t>(i)]);
                for (int i = 0; i < q; ++i) {
                    double v = s_cur[k][static_cast<std::size_t>(q + i)];
                    if (k % 2 == 0) v += (v - s_prev[k / 2][static_cast<std::size_t>(q + i)]) / 15.0;
                    r.u.push_back(v);
                }
            }
            return r;
        }
        t_prev = std::move(t_cur);
        s_prev = std::move(s_cur);
    }
    throw std::runtime_error("fv_limit_ode: no convergence to " + std::to_string(tol));
}

} // namespace milstein
