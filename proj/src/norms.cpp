#include "cpinn/norms.hpp"

#include <algorithm>
#include <cmath>

namespace cpinn {

namespace {

void check_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) throw NormError("discrete norm: non-finite value");
}

void check_tau(double tau) {
    if (!(tau >= 1.0)) throw NormError("norm: exponent must be in [1, inf]");
}

// (1/n sum |v|^tau)^(1/tau), or max |v| for tau = inf.
double power_mean(std::span<const double> v, double tau) {
    if (std::isinf(tau)) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    // Scale by the max to keep |v|^tau representable for large tau.
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += std::pow(std::abs(x) / scale, tau);
    return scale * std::pow(acc / static_cast<double>(v.size()), 1.0 / tau);
}

// Outer L^tau' norm of per-slab values, each slab carrying weight `weight`.
double outer_norm(const std::vector<double>& inner, double weight, double tau_p) {
    if (std::isinf(tau_p)) return *std::max_element(inner.begin(), inner.end());
    double acc = 0.0;
    for (double v : inner) acc += weight * std::pow(v, tau_p);
    return std::pow(acc, 1.0 / tau_p);
}

}  // namespace

double discrete_mixed(std::span<const double> values, std::size_t m_space, std::size_t m_time, double tau) {
    check_tau(tau);
    if (m_space == 0 || m_time == 0 || values.size() != m_space * m_time)
        throw NormError("discrete_mixed: value count does not match the grid");
    check_finite(values);
    double acc = 0.0;
    for (std::size_t j = 0; j < m_time; ++j) {
        const double level = power_mean(values.subspan(j * m_space, m_space), tau);
        acc += level * level;
    }
    return std::sqrt(acc / static_cast<double>(m_time));
}

double discrete_mixed(const TensorGrid& grid, std::span<const double> values, double tau) {
    return discrete_mixed(values, grid.m_tilde, grid.m_hat, tau);
}

double discrete_boundary_l2(const BoundaryGrid& grid, std::span<const double> values) {
    if (values.size() != grid.m_bar * grid.m_hat || values.empty())
        throw NormError("discrete_boundary_l2: value count does not match the grid");
    check_finite(values);
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc / static_cast<double>(values.size()));
}

double discrete_h12_seminorm(const BoundaryGrid& grid, std::span<const double> values) {
    const std::size_t mb = grid.m_bar;
    const std::size_t mh = grid.m_hat;
    if (values.size() != mb * mh || values.empty())
        throw NormError("discrete_h12_seminorm: value count does not match the grid");
    check_finite(values);
    const int d = grid.points.dim();
    double acc = 0.0;
    for (std::size_t l = 0; l < mh; ++l) {
        for (std::size_t i = 0; i < mb; ++i) {
            const auto xi = grid.points.x(grid.index(i, l));
            for (std::size_t j = 0; j < mb; ++j) {
                if (i == j) continue;
                const auto xj = grid.points.x(grid.index(j, l));
                double dist2 = 0.0;
                for (int a = 0; a < d; ++a) dist2 += (xi[a] - xj[a]) * (xi[a] - xj[a]);
                if (dist2 == 0.0) throw NormError("discrete_h12_seminorm: coincident boundary points");
                const double diff = values[grid.index(i, l)] - values[grid.index(j, l)];
                acc += diff * diff / std::pow(dist2, 0.5 * d);
            }
        }
    }
    return std::sqrt(acc / (static_cast<double>(mh) * static_cast<double>(mb) * static_cast<double>(mb)));
}

double discrete_h14_seminorm(const BoundaryGrid& grid, std::span<const double> values) {
    const std::size_t mb = grid.m_bar;
    const std::size_t mh = grid.m_hat;
    if (values.size() != mb * mh || values.empty())
        throw NormError("discrete_h14_seminorm: value count does not match the grid");
    check_finite(values);
    double acc = 0.0;
    for (std::size_t i = 0; i < mb; ++i) {
        for (std::size_t j = 0; j < mh; ++j) {
            for (std::size_t l = 0; l < mh; ++l) {
                if (j == l) continue;
                const double diff = values[grid.index(i, j)] - values[grid.index(i, l)];
                acc += diff * diff / std::pow(std::abs(grid.times[j] - grid.times[l]), 1.5);
            }
        }
    }
    return std::sqrt(acc / (static_cast<double>(mh) * static_cast<double>(mh) * static_cast<double>(mb)));
}

double discrete_h1214_norm(const BoundaryGrid& grid, std::span<const double> values) {
    return 2.0 * discrete_boundary_l2(grid, values) + discrete_h12_seminorm(grid, values) +
           discrete_h14_seminorm(grid, values);
}

double discrete_initial_l2(const InitialGrid& grid, std::span<const double> values) {
    if (values.size() != grid.m_tilde || values.empty())
        throw NormError("discrete_initial_l2: value count does not match the grid");
    check_finite(values);
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc / static_cast<double>(values.size()));
}

BoundaryQuadraticForms boundary_quadratic_forms(const BoundaryGrid& grid) {
    const auto mb = static_cast<Eigen::Index>(grid.m_bar);
    const auto mh = static_cast<Eigen::Index>(grid.m_hat);
    const int d = grid.points.dim();
    BoundaryQuadraticForms forms;

    // sum_{i != j} K_ij (e_i - e_j)^2 = 2 e^T (D - K) e with D = diag(row sums of K).
    forms.space = Eigen::MatrixXd::Zero(mb, mb);
    for (Eigen::Index i = 0; i < mb; ++i) {
        const auto xi = grid.points.x(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < mb; ++j) {
            if (i == j) continue;
            const auto xj = grid.points.x(static_cast<std::size_t>(j));
            double dist2 = 0.0;
            for (int a = 0; a < d; ++a) dist2 += (xi[a] - xj[a]) * (xi[a] - xj[a]);
            if (dist2 == 0.0) throw NormError("boundary_quadratic_forms: coincident boundary points");
            const double k = 1.0 / std::pow(dist2, 0.5 * d);
            forms.space(i, j) -= k;
            forms.space(i, i) += k;
        }
    }
    forms.time = Eigen::MatrixXd::Zero(mh, mh);
    for (Eigen::Index j = 0; j < mh; ++j) {
        for (Eigen::Index l = 0; l < mh; ++l) {
            if (j == l) continue;
            const double k = 1.0 / std::pow(std::abs(grid.times[j] - grid.times[l]), 1.5);
            forms.time(j, l) -= k;
            forms.time(j, j) += k;
        }
    }
    const double mbd = static_cast<double>(mb);
    const double mhd = static_cast<double>(mh);
    forms.h12_scale = 2.0 / (mhd * mbd * mbd);
    forms.h14_scale = 2.0 / (mhd * mhd * mbd);
    return forms;
}

// ---------------------------------------------------------------------------
// Quadrature

double quad_mixed(const SpaceTimeFn& fn, int d, double T, double tau, double tau_p, int res) {
    check_tau(tau);
    check_tau(tau_p);
    if (d < 1 || res < 1 || !(T > 0.0)) throw NormError("quad_mixed: invalid arguments");
    const double hx = 1.0 / res;
    const double ht = T / res;
    std::size_t n_space = 1;
    for (int a = 0; a < d; ++a) n_space *= static_cast<std::size_t>(res);

    std::vector<double> x(d);
    std::vector<double> inner(res);
    for (int jt = 0; jt < res; ++jt) {
        const double t = (jt + 0.5) * ht;
        double acc = 0.0;
        for (std::size_t flat = 0; flat < n_space; ++flat) {
            std::size_t rem = flat;
            for (int a = d - 1; a >= 0; --a) {
                x[a] = (static_cast<double>(rem % res) + 0.5) * hx;
                rem /= res;
            }
            const double v = std::abs(fn(x, t));
            if (std::isinf(tau))
                acc = std::max(acc, v);
            else
                acc += std::pow(v, tau);
        }
        inner[jt] = std::isinf(tau) ? acc : std::pow(acc / static_cast<double>(n_space), 1.0 / tau);
    }
    return outer_norm(inner, ht, tau_p);
}

BoundaryQuadrature boundary_quadrature(int d, int res) {
    if (d < 1 || res < 1) throw NormError("boundary_quadrature: invalid arguments");
    BoundaryQuadrature q;
    if (d == 1) {
        q.points = {{0.0}, {1.0}};
        q.weight = 1.0;
        return q;
    }
    std::size_t per_face = 1;
    for (int a = 0; a < d - 1; ++a) per_face *= static_cast<std::size_t>(res);
    for (int axis = 0; axis < d; ++axis) {
        for (double side : {0.0, 1.0}) {
            for (std::size_t flat = 0; flat < per_face; ++flat) {
                std::vector<double> x(d);
                std::size_t rem = flat;
                for (int a = d - 1; a >= 0; --a) {
                    if (a == axis) continue;
                    x[a] = (static_cast<double>(rem % res) + 0.5) / res;
                    rem /= res;
                }
                x[axis] = side;
                q.points.push_back(std::move(x));
            }
        }
    }
    q.weight = 1.0 / static_cast<double>(per_face);
    return q;
}

double quad_boundary_l2(const SpaceTimeFn& g, int d, double T, int res) {
    const auto q = boundary_quadrature(d, res);
    const double ht = T / res;
    double acc = 0.0;
    for (int jt = 0; jt < res; ++jt) {
        const double t = (jt + 0.5) * ht;
        for (const auto& x : q.points) {
            const double v = g(x, t);
            acc += q.weight * ht * v * v;
        }
    }
    return std::sqrt(acc);
}

double quad_h12_seminorm(const SpaceTimeFn& g, int d, double T, int res) {
    const auto q = boundary_quadrature(d, res);
    const double ht = T / res;
    const double collar = (1.0 - 1e-9) / res;
    const std::size_t n = q.points.size();

    // sum_ij K_ij (v_i - v_j)^2 = 2 v^T (D - K) v; the kernel does not depend on t.
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
        for (Eigen::Index j = 0; j < nn; ++j) {
            double dist2 = 0.0;
            for (int a = 0; a < d; ++a) dist2 += std::pow(q.points[i][a] - q.points[j][a], 2);
            if (dist2 < collar * collar) continue;
            const double k = 1.0 / std::pow(dist2, 0.5 * d);
            lap(i, j) -= k;
            lap(i, i) += k;
        }
    }
    Eigen::MatrixXd vals(nn, res);
    for (int jt = 0; jt < res; ++jt)
        for (Eigen::Index i = 0; i < nn; ++i) vals(i, jt) = g(q.points[i], (jt + 0.5) * ht);
    const double acc = 2.0 * (vals.array() * (lap * vals).array()).sum();
    return std::sqrt(acc * q.weight * q.weight * ht);
}

double quad_h14_seminorm(const SpaceTimeFn& g, int d, double T, int res) {
    const auto q = boundary_quadrature(d, res);
    const double ht = T / res;
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(q.points.size()), res);
    for (int jt = 0; jt < res; ++jt)
        for (std::size_t i = 0; i < q.points.size(); ++i)
            vals(static_cast<Eigen::Index>(i), jt) = g(q.points[i], (jt + 0.5) * ht);
    double acc = 0.0;
    for (int j = 0; j < res; ++j)
        for (int l = 0; l < res; ++l) {
            if (j == l) continue;
            const double k = 1.0 / std::pow(std::abs(j - l) * ht, 1.5);
            acc += k * (vals.col(j) - vals.col(l)).squaredNorm();
        }
    return std::sqrt(acc * q.weight * ht * ht);
}

double quad_h1214_norm(const SpaceTimeFn& g, int d, double T, int res) {
    return 2.0 * quad_boundary_l2(g, d, T, res) + quad_h12_seminorm(g, d, T, res) + quad_h14_seminorm(g, d, T, res);
}

}  // namespace cpinn
