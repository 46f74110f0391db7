#pragma once

#include "cpinn/grid.hpp"
#include "cpinn/network.hpp"
#include "cpinn/norms.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

class LossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A space-time field with exact derivatives: either a closed-form function or a
/// wrapped network. `jet` must fill value, grad_x, dt and laplacian.
struct Field {
    std::function<double(std::span<const double>, double)> value;
    std::function<Jet(std::span<const double>, double)> jet;
};

Field as_field(const MlpNetwork& net);

/// Samples of f, g, u0 on the three site families.
struct ProblemData {
    TensorGrid interior;
    BoundaryGrid boundary;
    InitialGrid initial;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> u0;
    std::optional<Field> exact_u;

    void validate() const;
    int dim() const { return interior.points.dim(); }
};

/// Samples f, g, u0 (and records exact_u) on the given grids.
ProblemData sample_problem(TensorGrid interior, BoundaryGrid boundary, InitialGrid initial,
                           const std::function<double(std::span<const double>, double)>& f,
                           const std::function<double(std::span<const double>, double)>& g,
                           const std::function<double(std::span<const double>)>& u0,
                           std::optional<Field> exact_u = std::nullopt);

enum class LossKind { Pinn, Cpinn };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

/// Per-term decomposition of a squared loss. Components already include their
/// coefficients, so total is their plain sum.
struct LossBreakdown {
    double interior = 0.0;
    double boundary_l2 = 0.0;
    double boundary_h12 = 0.0;
    double boundary_h14 = 0.0;
    double initial = 0.0;
    double total = 0.0;
    double log_factor = 1.0;
};

/// Model outputs needed by the losses, aligned with the ProblemData grids.
struct SiteEvaluation {
    std::vector<double> residual;  // f + laplacian(v) - v_t at interior sites
    std::vector<double> boundary;  // v at boundary sites
    std::vector<double> initial;   // v at initial sites
};

SiteEvaluation evaluate_sites(const MlpNetwork& net, const ProblemData& data);
SiteEvaluation evaluate_sites(const Field& field, const ProblemData& data);

/// 1 + 1/ln(m_tilde) for d = 2, 2d/(d+2) for d >= 3.
double default_gamma(int d, std::size_t m_tilde);

/// Mean-square collocation loss with unit weights.
LossBreakdown pinn_loss(const SiteEvaluation& sites, const ProblemData& data);
LossBreakdown pinn_loss(const MlpNetwork& net, const ProblemData& data);

/// Squared consistent loss, assembled from the discrete norms.
LossBreakdown cpinn_loss_sq(const SiteEvaluation& sites, const ProblemData& data, double gamma);
LossBreakdown cpinn_loss_sq(const MlpNetwork& net, const ProblemData& data, double gamma);

struct LStarOptions {
    std::optional<double> gamma;   // defaults to default_gamma
    bool include_initial = true;
};

/// Unsquared consistent loss: log-weighted interior norm (d = 2) plus the
/// boundary H^{1/2,1/4} norm plus, by default, the initial L^2 norm.
double l_star(const SiteEvaluation& sites, const ProblemData& data, const LStarOptions& options = {});
LossBreakdown l_star_breakdown(const SiteEvaluation& sites, const ProblemData& data,
                               const LStarOptions& options = {});

/// Loss value and exact parameter gradient for training. Caches the site inputs and
/// the boundary quadratic forms of one ProblemData.
class LossEvaluator {
public:
    LossEvaluator(const ProblemData& data, LossKind kind, std::optional<double> gamma = std::nullopt);

    LossKind kind() const { return kind_; }
    double gamma() const { return gamma_; }

    LossBreakdown value(const MlpNetwork& net) const;
    /// Writes the gradient into `grad` (overwritten).
    LossBreakdown value_and_gradient(const MlpNetwork& net, Eigen::VectorXd& grad) const;

private:
    const ProblemData* data_;
    LossKind kind_;
    double gamma_;
    Eigen::MatrixXd interior_inputs_;
    Eigen::MatrixXd boundary_inputs_;
    Eigen::MatrixXd initial_inputs_;
    BoundaryQuadraticForms forms_;

    LossBreakdown run(const MlpNetwork& net, Eigen::VectorXd* grad) const;
};

/// L^2(0,T; H^1(Omega)) distance between two fields by midpoint quadrature.
double l2h1_distance(const Field& a, const Field& b, int d, double T, int res);

struct ErrorLossRow {
    std::string label;
    double l_star = 0.0;
    double error_l2h1 = 0.0;
};
struct ErrorLossStudy {
    std::vector<ErrorLossRow> rows;
    double spearman = 0.0;
};

/// For each candidate, l_star on the data sites and the L^2 H^1 error against exact_u.
ErrorLossStudy error_vs_loss_study(const std::vector<std::pair<std::string, Field>>& candidates,
                                   const ProblemData& data, int quad_res, const LStarOptions& options = {});

/// Spearman rank correlation (average ranks on ties).
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace cpinn
