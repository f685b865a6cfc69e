#pragma once

// Fine-cell increments of the iterated integrals
//   Z = \int Y^(n) dY^T,  M^p = \int Z^(n) dY^p,  N^p = \int Y^(n) Y^(n)T dY^p,
// where Y^(n)_s = Y_s - Y_{n(s)} and Z^(n) likewise. Inside a fine cell the
// integrand is known only at the left end; two rules are offered.
//
//   ito     left-point sums.
//   bridge  exact integrals along the linear interpolant of Y, minus half the
//           covariation with the model density c at the cell's left end.
//
// The bridge rule is exact for d = 1 Brownian cells (it reproduces
// ((dW)^2 - dt)/2) and for piecewise-linear finite-variation paths.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "milstein/grid.hpp"
#include "milstein/paths.hpp"

namespace milstein {

enum class FineRule { bridge, ito };

inline std::string to_string(FineRule r) { return r == FineRule::bridge ? "bridge" : "ito"; }

inline FineRule parse_fine_rule(const std::string& s) {
    if (s == "bridge") return FineRule::bridge;
    if (s == "ito") return FineRule::ito;
    throw InvalidArgument("unknown fine rule '" + s + "' (expected bridge or ito)");
}

/// State carried through one coarse cell: the offsets Y^(n), Z^(n) and the
/// running bracket C^(n) at the left end of the current fine cell.
class CellState {
  public:
    explicit CellState(int d)
        : d_(d), off_(static_cast<std::size_t>(d), 0.0), z_(static_cast<std::size_t>(d * d), 0.0),
          c_(static_cast<std::size_t>(d * d), 0.0) {}

    void reset() noexcept {
        std::fill(off_.begin(), off_.end(), 0.0);
        std::fill(z_.begin(), z_.end(), 0.0);
        std::fill(c_.begin(), c_.end(), 0.0);
    }

    int dim() const noexcept { return d_; }
    double off(int a) const noexcept { return off_[static_cast<std::size_t>(a)]; }
    double z(int a, int b) const noexcept { return z_[static_cast<std::size_t>(a * d_ + b)]; }
    double bracket(int a, int b) const noexcept { return c_[static_cast<std::size_t>(a * d_ + b)]; }

    /// Increment of Z^(n) over a fine cell, written into dz (d x d).
    void dz(std::span<const double> delta, std::span<const double> c, double h, FineRule rule,
            std::span<double> out) const noexcept {
        for (int a = 0; a < d_; ++a)
            for (int b = 0; b < d_; ++b) {
                double v = off(a) * delta[b];
                if (rule == FineRule::bridge) v += 0.5 * (delta[a] * delta[b] - c[a * d_ + b] * h);
                out[a * d_ + b] = v;
            }
    }

    /// Moves to the right end of the cell given its dz.
    void advance(std::span<const double> delta, std::span<const double> c, double h, FineRule rule,
                 std::span<const double> dz_cell) noexcept {
        for (int a = 0; a < d_; ++a)
            for (int b = 0; b < d_; ++b) {
                const auto ab = static_cast<std::size_t>(a * d_ + b);
                z_[ab] += dz_cell[ab];
                c_[ab] += rule == FineRule::bridge ? c[ab] * h : delta[a] * delta[b];
            }
        for (int a = 0; a < d_; ++a) off_[static_cast<std::size_t>(a)] += delta[a];
    }

    /// dM^p_{ab} over the cell.
    double dm(int p, int a, int b, std::span<const double> delta, std::span<const double> c,
              double h, FineRule rule) const noexcept {
        if (rule == FineRule::ito) return z(a, b) * delta[p];
        const double ya = off(a), da = delta[a], db = delta[b], dp = delta[p];
        return z(a, b) * dp + 0.5 * ya * db * dp + da * db * dp / 6.0 -
               0.25 * c[a * d_ + b] * h * dp - 0.5 * h * (ya + 0.5 * da) * c[b * d_ + p];
    }

    /// dN^p_{ab} over the cell.
    double dn(int p, int a, int b, std::span<const double> delta, std::span<const double> c,
              double h, FineRule rule) const noexcept {
        const double ya = off(a), yb = off(b);
        if (rule == FineRule::ito) return ya * yb * delta[p];
        const double da = delta[a], db = delta[b], dp = delta[p];
        return ya * yb * dp + 0.5 * (ya * db + da * yb) * dp + da * db * dp / 3.0 -
               0.5 * h * (c[a * d_ + p] * (yb + 0.5 * db) + (ya + 0.5 * da) * c[b * d_ + p]);
    }

    /// Increment of \int C^(n) dY^p, with C^(n) the bracket since the cell start
    /// (model bracket under bridge, realized bracket under ito).
    double dcy(int p, int a, int b, std::span<const double> delta, std::span<const double> c,
               double h, FineRule rule) const noexcept {
        double cab = bracket(a, b);
        if (rule == FineRule::bridge) cab += 0.5 * c[a * d_ + b] * h;
        return cab * delta[p];
    }

  private:
    int d_;
    std::vector<double> off_;
    std::vector<double> z_;
    std::vector<double> c_;
};

/// Fine cells walked in order with their increments delta_j = Y_{j+1} - Y_j and
/// density c_j, resetting the cell state at every coarse point.
template <class Visit>
void walk_cells(const PathBundle& bundle, int coarse_n, FineRule rule, Visit&& visit) {
    const int stride = bundle.grid.stride(coarse_n);
    const int d = bundle.dim_d;
    const double h = bundle.grid.fine_step();
    CellState state(d);
    std::vector<double> delta(static_cast<std::size_t>(d));
    std::vector<double> dz(static_cast<std::size_t>(d * d));
    for (int j = 0; j < bundle.grid.fine_count; ++j) {
        if (j % stride == 0) state.reset();
        for (int a = 0; a < d; ++a) delta[static_cast<std::size_t>(a)] = bundle.dy(j, a);
        const auto c = bundle.driver->c_block(j);
        state.dz(delta, c, h, rule, dz);
        visit(j, static_cast<const CellState&>(state), std::span<const double>(delta), c, h,
              std::span<const double>(dz));
        state.advance(delta, c, h, rule, dz);
    }
}

/// I_K = \int_{K/n}^{(K+1)/n} (Y_s - Y_{K/n}) dY_s^T for every coarse cell,
/// flat n x d x d.
inline std::vector<double> coarse_cell_integrals(const PathBundle& bundle, int coarse_n,
                                                 FineRule rule) {
    const int d = bundle.dim_d;
    const int stride = bundle.grid.stride(coarse_n);
    std::vector<double> out(static_cast<std::size_t>(coarse_n * d * d), 0.0);
    walk_cells(bundle, coarse_n, rule,
               [&](int j, const CellState&, std::span<const double>, std::span<const double>,
                   double, std::span<const double> dz) {
                   double* cell = out.data() + static_cast<std::size_t>((j / stride) * d * d);
                   for (int k = 0; k < d * d; ++k) cell[k] += dz[k];
               });
    return out;
}

} // namespace milstein
