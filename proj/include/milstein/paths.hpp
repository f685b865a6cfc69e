#pragma once

// Brownian paths on a fine grid and the driving semimartingale
//   Y_t = \int_0^t sigma_s dW_s + \int_0^t a_s ds
// built from them. One PathBundle is the unit of coupling: every scheme and
// every functional evaluated for a given path index reads the same bundle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "milstein/grid.hpp"
#include "milstein/random.hpp"

namespace milstein {

/// Driver description. `sigma(s)` returns the d x m matrix row-major, `drift(s)`
/// returns a_s in R^d; an empty drift means a = 0.
struct DriverSpec {
    int dim_d = 1;
    int dim_m = 1;
    std::function<std::vector<double>(double)> sigma;
    std::function<std::vector<double>(double)> drift;
    std::string label;

    bool has_drift() const noexcept { return static_cast<bool>(drift); }
};

namespace drivers {

/// Y = W, a d-dimensional standard Brownian motion.
inline DriverSpec brownian(int d = 1) {
    return {d, d,
            [d](double) {
                std::vector<double> s(static_cast<std::size_t>(d * d), 0.0);
                for (int i = 0; i < d; ++i) s[static_cast<std::size_t>(i * d + i)] = 1.0;
                return s;
            },
            {},
            d == 1 ? "brownian" : "brownian" + std::to_string(d)};
}

/// Y_t = t. One (unused) Brownian coordinate keeps m >= 1.
inline DriverSpec time() {
    return {1, 1, [](double) { return std::vector<double>{0.0}; },
            [](double) { return std::vector<double>{1.0}; }, "time"};
}

/// Y = (W, t)^T, the embedding of dX = a dW + b dt.
inline DriverSpec ito_embedding() {
    return {2, 1, [](double) { return std::vector<double>{1.0, 0.0}; },
            [](double) { return std::vector<double>{0.0, 1.0}; }, "ito"};
}

/// Scalar Y_t = \int_0^t s dW_s.
inline DriverSpec ramp_volatility() {
    return {1, 1, [](double s) { return std::vector<double>{s}; }, {}, "ramp"};
}

} // namespace drivers

/// sigma, a and c = sigma sigma^T tabulated at the left end of every fine cell.
/// Shared read-only by all paths on the same grid.
class DriverTable {
  public:
    DriverTable(const DriverSpec& spec, const Grid& grid)
        : grid_(grid), d_(spec.dim_d), m_(spec.dim_m), has_drift_(spec.has_drift()) {
        if (d_ < 1 || m_ < 1) throw InvalidArgument("driver dimensions must be positive");
        if (!spec.sigma) throw InvalidArgument("driver '" + spec.label + "' has no sigma");
        const auto cells = static_cast<std::size_t>(grid.fine_count);
        const auto du = static_cast<std::size_t>(d_);
        const auto mu = static_cast<std::size_t>(m_);
        sigma_.resize(cells * du * mu);
        drift_.assign(cells * du, 0.0);
        c_.assign(cells * du * du, 0.0);
        for (int j = 0; j < grid.fine_count; ++j) {
            const double t = grid.time(j);
            const auto s = spec.sigma(t);
            if (s.size() != du * mu) {
                throw InvalidArgument("driver '" + spec.label + "': sigma has wrong size");
            }
            for (double v : s) {
                if (!std::isfinite(v)) {
                    throw InvalidArgument("driver '" + spec.label +
                                          "': non-finite sigma at t=" + std::to_string(t));
                }
            }
            std::copy(s.begin(), s.end(), sigma_.begin() + static_cast<std::ptrdiff_t>(j * du * mu));
            if (has_drift_) {
                const auto a = spec.drift(t);
                if (a.size() != du) {
                    throw InvalidArgument("driver '" + spec.label + "': drift has wrong size");
                }
                for (std::size_t i = 0; i < du; ++i) {
                    if (!std::isfinite(a[i])) {
                        throw InvalidArgument("driver '" + spec.label +
                                              "': non-finite drift at t=" + std::to_string(t));
                    }
                    drift_[j * du + i] = a[i];
                }
            }
            double* cj = c_.data() + j * du * du;
            const double* sj = sigma_.data() + j * du * mu;
            for (std::size_t a = 0; a < du; ++a)
                for (std::size_t b = 0; b < du; ++b) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < mu; ++p) acc += sj[a * mu + p] * sj[b * mu + p];
                    cj[a * du + b] = acc;
                }
        }
        identity_ = d_ == m_ && !has_drift_;
        for (std::size_t j = 0; identity_ && j < cells; ++j)
            for (std::size_t a = 0; a < du; ++a)
                for (std::size_t p = 0; p < mu; ++p)
                    if (sigma_[(j * du + a) * mu + p] != (a == p ? 1.0 : 0.0)) identity_ = false;
    }

    const Grid& grid() const noexcept { return grid_; }
    int dim_d() const noexcept { return d_; }
    int dim_m() const noexcept { return m_; }
    bool has_drift() const noexcept { return has_drift_; }
    /// sigma = I everywhere and a = 0.
    bool is_identity() const noexcept { return identity_; }

    /// sigma^{ap} at the left end of fine cell j.
    double sigma(int j, int a, int p) const noexcept { return sigma_[(j * d_ + a) * m_ + p]; }
    double drift(int j, int a) const noexcept { return drift_[j * d_ + a]; }
    double c(int j, int a, int b) const noexcept { return c_[(j * d_ + a) * d_ + b]; }
    std::span<const double> c_block(int j) const noexcept {
        return {c_.data() + static_cast<std::size_t>(j * d_ * d_), static_cast<std::size_t>(d_ * d_)};
    }

  private:
    Grid grid_;
    int d_;
    int m_;
    bool has_drift_;
    bool identity_ = false;
    std::vector<double> sigma_;
    std::vector<double> drift_;
    std::vector<double> c_;
};

struct DriverDiagnostics {
    double min_c_eigenvalue = 0.0;
    double max_asymmetry = 0.0;
    double c_cubed_integral = 0.0;  // \int ||c_s||^3 ds, Frobenius norm
    double drift_sq_integral = 0.0; // \int ||a_s||^2 ds
};

/// Samples the driver at the left ends of `samples` equal cells and checks c is
/// symmetric PSD and that the integrability gates are finite.
inline DriverDiagnostics validate_driver(const DriverSpec& spec, int samples = 1024) {
    const Grid probe = make_grid(samples, 1);
    const DriverTable table(spec, probe);
    DriverDiagnostics diag;
    diag.min_c_eigenvalue = std::numeric_limits<double>::infinity();
    const int d = spec.dim_d;
    for (int j = 0; j < samples; ++j) {
        Eigen::MatrixXd c(d, d);
        double fro = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                c(a, b) = table.c(j, a, b);
                fro += c(a, b) * c(a, b);
            }
        diag.max_asymmetry = std::max(diag.max_asymmetry, (c - c.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
        diag.min_c_eigenvalue = std::min(diag.min_c_eigenvalue, eig.eigenvalues().minCoeff());
        diag.c_cubed_integral += std::pow(std::sqrt(fro), 3) / samples;
        double a2 = 0.0;
        for (int a = 0; a < d; ++a) a2 += table.drift(j, a) * table.drift(j, a);
        diag.drift_sq_integral += a2 / samples;
    }
    const double scale = std::max(1.0, std::sqrt(diag.c_cubed_integral));
    if (diag.min_c_eigenvalue < -1e-12 * scale || diag.max_asymmetry > 1e-12 * scale) {
        throw InvalidArgument("driver '" + spec.label + "': c = sigma sigma^T is not symmetric PSD");
    }
    if (!std::isfinite(diag.c_cubed_integral) || !std::isfinite(diag.drift_sq_integral)) {
        throw InvalidArgument("driver '" + spec.label + "' fails the integrability gates");
    }
    return diag;
}

/// Fine-grid samples of one coupled realization. Row k of each array holds the
/// value at time k / fine_count.
struct PathBundle {
    Grid grid;
    int dim_m = 1;
    int dim_d = 1;
    std::vector<double> w;     // (fine_count+1) x m
    std::vector<double> y;     // (fine_count+1) x d
    std::vector<double> a_int; // (fine_count+1) x d
    StreamKey seed_key;        // component = stream base of W
    std::shared_ptr<const DriverTable> driver;

    double w_at(int k, int p) const noexcept { return w[static_cast<std::size_t>(k * dim_m + p)]; }
    double y_at(int k, int a) const noexcept { return y[static_cast<std::size_t>(k * dim_d + a)]; }
    double a_at(int k, int a) const noexcept { return a_int[static_cast<std::size_t>(k * dim_d + a)]; }
    double dy(int j, int a) const noexcept { return y_at(j + 1, a) - y_at(j, a); }
    double dw(int j, int p) const noexcept { return w_at(j + 1, p) - w_at(j, p); }
};

/// m independent Brownian coordinates on the fine grid; coordinate p uses
/// stream component key.component + p.
inline std::vector<double> sample_brownian(const Grid& grid, int dim_m, const StreamKey& key) {
    const auto n = static_cast<std::size_t>(grid.fine_count);
    const auto m = static_cast<std::size_t>(dim_m);
    std::vector<double> w((n + 1) * m, 0.0);
    std::vector<double> z(n);
    const double scale = std::sqrt(grid.fine_step());
    for (std::size_t p = 0; p < m; ++p) {
        NormalStream(StreamKey{key.master_seed, key.path_index,
                               key.component + static_cast<std::uint32_t>(p)})
            .fill(z, scale);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += z[k];
            w[(k + 1) * m + p] = acc;
        }
    }
    return w;
}

/// Left-point construction of (Y, A) from W. With sigma = I and a = 0 the
/// result reproduces W bit for bit.
inline std::pair<std::vector<double>, std::vector<double>>
build_driver(const DriverTable& table, std::span<const double> w) {
    const int n = table.grid().fine_count;
    const int d = table.dim_d();
    const int m = table.dim_m();
    if (w.size() != static_cast<std::size_t>((n + 1) * m)) {
        throw InvalidArgument("Brownian path does not match the driver's grid or dimension");
    }
    const double h = table.grid().fine_step();
    std::vector<double> a_int(static_cast<std::size_t>((n + 1) * d), 0.0);
    // Identity driver: Y is W itself, not a re-summation of its increments.
    if (table.is_identity()) return {std::vector<double>(w.begin(), w.end()), std::move(a_int)};
    std::vector<double> y(static_cast<std::size_t>((n + 1) * d), 0.0);
    std::vector<double> dw(static_cast<std::size_t>(m));
    for (int j = 0; j < n; ++j) {
        for (int p = 0; p < m; ++p) dw[p] = w[(j + 1) * m + p] - w[j * m + p];
        for (int a = 0; a < d; ++a) {
            double inc = 0.0;
            for (int p = 0; p < m; ++p) inc += table.sigma(j, a, p) * dw[p];
            const auto cur = static_cast<std::size_t>(j * d + a);
            const auto next = static_cast<std::size_t>((j + 1) * d + a);
            if (table.has_drift()) {
                const double da = table.drift(j, a) * h;
                a_int[next] = a_int[cur] + da;
                y[next] = y[cur] + inc + da;
            } else {
                y[next] = y[cur] + inc;
            }
        }
    }
    return {std::move(y), std::move(a_int)};
}

inline PathBundle make_bundle(std::shared_ptr<const DriverTable> table, std::uint64_t master_seed,
                              std::uint64_t path_index,
                              std::uint32_t component_base = stream::kDriver) {
    PathBundle b;
    b.grid = table->grid();
    b.dim_m = table->dim_m();
    b.dim_d = table->dim_d();
    b.seed_key = StreamKey{master_seed, path_index, component_base};
    b.w = sample_brownian(b.grid, b.dim_m, b.seed_key);
    auto [y, a] = build_driver(*table, b.w);
    b.y = std::move(y);
    b.a_int = std::move(a);
    b.driver = std::move(table);
    return b;
}

/// CSV dump: fine_index, time, w_1..w_m, y_1..y_d.
inline void write_path_csv(std::ostream& out, const PathBundle& b) {
    out << "fine_index,time";
    for (int p = 0; p < b.dim_m; ++p) out << ",w_" << p + 1;
    for (int a = 0; a < b.dim_d; ++a) out << ",y_" << a + 1;
    out << '\n';
    out.precision(17);
    for (int k = 0; k <= b.grid.fine_count; ++k) {
        out << k << ',' << b.grid.time(k);
        for (int p = 0; p < b.dim_m; ++p) out << ',' << b.w_at(k, p);
        for (int a = 0; a < b.dim_d; ++a) out << ',' << b.y_at(k, a);
        out << '\n';
    }
}

} // namespace milstein
