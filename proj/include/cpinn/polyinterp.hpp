#pragma once

#include "cpinn/grid.hpp"
#include "cpinn/norms.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

class InterpolationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Node sets and Lagrange bases of P_{r,r'} on the reference Kuhn simplices:
/// total degree < r in space, degree < r' in time. Shared by every cell.
struct ReferenceElement {
    int d = 0;
    int r = 0;
    int rp = 0;
    std::vector<std::vector<int>> exponents;                 // spatial monomials, |a| < r
    std::vector<std::vector<std::vector<int>>> space_nodes;  // per permutation: lattice offsets in {0..r-1}^d
    std::vector<Eigen::MatrixXd> space_inverse;              // per permutation: inverse Vandermonde
    Eigen::MatrixXd time_inverse;                            // rp x rp

    std::size_t space_dim() const { return exponents.size(); }

    /// Lagrange basis values at local cube coordinates y for permutation `perm_index`.
    Eigen::VectorXd space_basis(int perm_index, std::span<const double> y) const;
    /// d x n matrix of basis gradients with respect to y.
    Eigen::MatrixXd space_basis_grad(int perm_index, std::span<const double> y) const;
    Eigen::VectorXd time_basis(double tau) const;
};

/// Cached per (d, r, rp). Throws InterpolationError if a node set is not unisolvent.
const ReferenceElement& reference_element(int d, int r, int rp);

/// The interpolation nodes of a closed cell, ordered time-major: index = j * n_space + i.
std::vector<std::pair<std::vector<double>, double>> cell_nodes(const SimplexCell& cell, int r, int rp);

/// Tensor Lagrange interpolant on one simplex x interval, in monomials of the local
/// coordinates (y in the unit cube, tau in [0,1]).
struct LocalPolynomial {
    SimplexCell cell;
    int r = 0;
    int rp = 0;
    Eigen::MatrixXd coeffs;  // space monomials x time powers

    double operator()(std::span<const double> x, double t) const;
};

/// Samples ordered as cell_nodes().
LocalPolynomial interpolate_cell(std::span<const double> samples, const SimplexCell& cell, int r, int rp);

/// Piecewise interpolant over the Kuhn decomposition of all dyadic cubes x intervals.
/// Holds the node values on the global lattice; each cell reads its own nodes.
class Interpolant {
public:
    static Interpolant build(const SpaceTimeFn& f, const GridSpec& spec);
    /// Build from values already sampled at global lattice nodes (see node_coordinates).
    static Interpolant from_nodes(const GridSpec& spec, std::vector<double> node_values);

    const GridSpec& spec() const { return spec_; }
    std::size_t nodes_per_axis() const { return nx_; }
    std::size_t time_nodes() const { return nt_; }
    const std::vector<double>& node_values() const { return values_; }
    /// Coordinates of global node `index` (time-major, first spatial axis slowest).
    std::pair<std::vector<double>, double> node_coordinates(std::size_t index) const;

    double operator()(std::span<const double> x, double t) const;
    /// Cellwise spatial gradient.
    Eigen::VectorXd grad_x(std::span<const double> x, double t) const;

private:
    GridSpec spec_;
    const ReferenceElement* ref_ = nullptr;
    std::size_t nx_ = 0;
    std::size_t nt_ = 0;
    std::vector<double> values_;

    void gather(const CellIndex& cell, Eigen::MatrixXd& local) const;
};

/// max |f - S| over the lattice of n_probe points per axis (i / (n_probe - 1) scaled to the box).
double sup_error(const SpaceTimeFn& f, const Interpolant& s, int n_probe);

/// ||f - S||_{L^tau'(0,T;L^tau)} by per-cell midpoint quadrature, quad_res points per axis per cell.
double mixed_norm_error(const SpaceTimeFn& f, const Interpolant& s, double tau, double tau_p, int quad_res = 8);

/// ||f - S||_{L^2(0,T;H^1)} with the cellwise (broken) gradient of S.
double l2h1_error(const SpaceTimeFn& f, const std::function<Eigen::VectorXd(std::span<const double>, double)>& grad_f,
                  const Interpolant& s, int quad_res = 8);

/// Estimate of the mixed modulus of smoothness sup ||D^r_h D^r'_h' f||_{L^p'(L^p)} over
/// shifts |h| <= b, |h'| <= b'. Shifts come from a fixed seedless low-discrepancy set
/// with log-uniform magnitudes, so enlarging b or b' only adds shifts. r or r' = 0
/// disables differencing in that variable.
struct ModulusOptions {
    int d = 1;
    double T = 1.0;
    int n_shift = 256;
    int n_probe = 64;
};
double modulus_of_smoothness(const SpaceTimeFn& f, int r, int rp, double b, double bp, double p, double pp,
                             const ModulusOptions& options);

/// Smoothness descriptor of B^theta_{p'q'}(0,T; B^s_{pq}). Infinite indices use kInfinity.
struct BesovClass {
    double s = 2.0;
    double theta = 2.0;
    double p = kInfinity;
    double q = kInfinity;
    double pp = kInfinity;
    double qp = kInfinity;
};

enum class NormId { C, Ltau, L2H1, L2Hminus1, Boundary, Initial };

NormId parse_norm_id(const std::string& name);
std::string to_string(NormId id);

struct Exponents {
    double alpha = 0.0;  // power of m_tilde (or m_bar for the boundary)
    double beta = 0.0;   // power of m_hat
};

/// Predicted recovery exponents; throws InterpolationError when the class violates
/// the hypotheses of the requested norm.
Exponents predicted_exponents(const BesovClass& cls, NormId norm, int d, double tau = 2.0, double tau_p = 2.0);

/// Scaled tensor bump l_I^{s-d/p} l_I'^{theta-1/p'} prod psi((x_a - a_a)/l_I) psi((t - a')/l_I'),
/// psi(z) = exp(1 - 1/(1 - (2z-1)^2)) on (0,1).
struct Bump {
    std::vector<double> origin;
    double side = 0.0;
    double t0 = 0.0;
    double duration = 0.0;
    double amplitude = 0.0;

    double operator()(std::span<const double> x, double t) const;
    Eigen::VectorXd grad_x(std::span<const double> x, double t) const;
    double laplacian(std::span<const double> x, double t) const;
    double dt(std::span<const double> x, double t) const;
};
Bump bump(std::span<const double> origin, double side, double t0, double duration, const BesovClass& cls);

/// One-dimensional bump profile and its first two derivatives.
double bump_profile(double z);
double bump_profile_d1(double z);
double bump_profile_d2(double z);

enum class Sweep { Space, Time, Diagonal };

struct RateStudy {
    std::vector<std::pair<int, int>> levels;
    std::vector<double> errors;
    Sweep sweep = Sweep::Diagonal;
    double fitted_slope = 0.0;  // d log2(error) / d level
    double fitted_slope_space = 0.0;
    double fitted_slope_time = 0.0;
    double predicted_slope_space = 0.0;
    double predicted_slope_time = 0.0;
};

/// Least-squares slope of log2(error) against the varying level.
RateStudy rate_fit(const std::vector<std::pair<int, int>>& levels, const std::vector<double>& errors);

/// Least-squares slope of ys against xs.
double least_squares_slope(std::span<const double> xs, std::span<const double> ys);

/// Named smooth/rough test functions with analytic spatial gradients.
struct TestFunction {
    std::string name;
    SpaceTimeFn value;
    std::function<Eigen::VectorXd(std::span<const double>, double)> grad_x;
    BesovClass smoothness;  // for predicted slopes (C and L^tau norms)
};
/// "sinprod": prod sin(pi x_a) sin(pi t);  "kink": |x_1 - 1/3| (1 + t);
/// "cospoly": cos(pi x_1) (1 + x_2^2) cos(t).
TestFunction named_function(const std::string& name, int d);

struct InterpRateRow {
    int k = 0;
    int kp = 0;
    double error = 0.0;
};
struct InterpRateResult {
    std::vector<InterpRateRow> rows;
    double fitted_slope = 0.0;
    double predicted_slope = 0.0;
    bool hypothesis_ok = true;
};
/// Diagonal sweep k = k' over [kmin, kmax] measuring the interpolation error in `norm`.
InterpRateResult interpolation_rate_study(const TestFunction& fn, int d, int r, int rp, NormId norm, int kmin,
                                          int kmax, double T = 1.0);

}  // namespace cpinn
