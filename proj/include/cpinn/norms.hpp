#pragma once

#include "cpinn/grid.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>

namespace cpinn {

class NormError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

using SpaceTimeFn = std::function<double(std::span<const double>, double)>;

// ---------------------------------------------------------------------------
// Discrete norms. Values are aligned with the grid's time-major ordering.

/// [ 1/m_hat sum_j ( 1/m_space sum_i |v_ij|^tau )^(2/tau) ]^(1/2); tau = kInfinity takes the max over i.
double discrete_mixed(std::span<const double> values, std::size_t m_space, std::size_t m_time, double tau);
double discrete_mixed(const TensorGrid& grid, std::span<const double> values, double tau);

/// Root mean square over all boundary sites.
double discrete_boundary_l2(const BoundaryGrid& grid, std::span<const double> values);

/// Same-time pair sum over i != j of |g_i - g_j|^2 / |x_i - x_j|^d, scaled by 1/(m_hat m_bar^2).
double discrete_h12_seminorm(const BoundaryGrid& grid, std::span<const double> values);

/// Same-point pair sum over distinct times of |g(t_j) - g(t_l)|^2 / |t_j - t_l|^(3/2), scaled by 1/(m_hat^2 m_bar).
double discrete_h14_seminorm(const BoundaryGrid& grid, std::span<const double> values);

/// 2 |g|_L2 + |g|_H12 + |g|_H14 (discrete).
double discrete_h1214_norm(const BoundaryGrid& grid, std::span<const double> values);

double discrete_initial_l2(const InitialGrid& grid, std::span<const double> values);

/// The two boundary pair sums written as quadratic forms. With E the m_bar x m_hat
/// matrix of values (column j = time level j):
///   h12^2 = h12_scale * sum(E .* (space * E)),  h14^2 = h14_scale * sum(E .* (E * time)).
/// `space` and `time` are graph Laplacians of the inverse-distance kernels.
struct BoundaryQuadraticForms {
    Eigen::MatrixXd space;  // m_bar x m_bar
    Eigen::MatrixXd time;   // m_hat x m_hat
    double h12_scale = 0.0;
    double h14_scale = 0.0;
};
BoundaryQuadraticForms boundary_quadratic_forms(const BoundaryGrid& grid);

// ---------------------------------------------------------------------------
// Quadrature counterparts on [0,1]^d x [0,T], composite midpoint rule.

/// || fn ||_{L^tau'(0,T; L^tau(Omega))} with `res` points per axis.
double quad_mixed(const SpaceTimeFn& fn, int d, double T, double tau, double tau_p, int res);

/// || g ||_{L^2(Sigma)} over the lateral boundary.
double quad_boundary_l2(const SpaceTimeFn& g, int d, double T, int res);

/// L^2(0,T; H^1/2(boundary)) seminorm; pairs closer than one quadrature cell are excluded.
double quad_h12_seminorm(const SpaceTimeFn& g, int d, double T, int res);

/// H^1/4(0,T; L^2(boundary)) seminorm; time pairs closer than one quadrature cell are excluded.
double quad_h14_seminorm(const SpaceTimeFn& g, int d, double T, int res);

/// 2 ||g||_L2 + |g|_H12 + |g|_H14 (quadrature).
double quad_h1214_norm(const SpaceTimeFn& g, int d, double T, int res);

/// Midpoint quadrature nodes on the boundary of [0,1]^d: res^(d-1) per face, 2d faces,
/// each with weight res^-(d-1). For d = 1 the two endpoints with weight 1.
struct BoundaryQuadrature {
    std::vector<std::vector<double>> points;
    double weight = 1.0;
};
BoundaryQuadrature boundary_quadrature(int d, int res);

}  // namespace cpinn
