#pragma once

#include "cpinn/loss.hpp"
#include "cpinn/network.hpp"
#include "cpinn/polyinterp.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cpinn {

/// Closed-form solution of the heat equation on (0,1)^2 x (0,T] together with
/// the data it induces: f = u_t - laplacian(u), g = u on the lateral boundary, u0 = u(., 0).
struct ManufacturedProblem {
    std::string name;
    Field u;
    std::function<double(std::span<const double>, double)> f;
    std::function<double(std::span<const double>, double)> g;
    std::function<double(std::span<const double>)> u0;
};

/// "u1": xy(1-x)(1-y)e^{-t};  "u2": sin(pi x)cos(pi y) + e^{-t}.
ManufacturedProblem manufactured(const std::string& name);

/// f, g, u0 sampled on the N x N mesh with N time levels on (0, T].
ProblemData mesh_problem(const ManufacturedProblem& problem, int mesh, double T = 1.0);

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    LossKind loss = LossKind::Cpinn;
    int mesh = 15;
    int width = 20;
    int depth = 4;
    double step = 1e-3;
    double momentum = 0.9;
    int iterations = 20000;
    std::uint64_t seed = 1;
    std::optional<double> gamma;
    bool skip = true;
    bool rescale_velocity = false;
    int history_every = 100;
    double T = 1.0;
    double divergence_limit = 1e6;

    void validate() const;
};

/// Default configuration for a named problem (width/depth as used for u1 and u2).
TrainConfig default_config(const std::string& problem);

/// Applies key=value overrides; unknown keys throw.
void apply_overrides(TrainConfig& cfg, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_key_values(const std::string& path);

struct RunReport {
    std::string problem;
    LossKind loss = LossKind::Cpinn;
    int mesh = 0;
    std::uint64_t seed = 0;
    int iterations = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;        // the loss that was minimized
    double final_pinn_loss = 0.0;   // L_sq at the final parameters
    double final_cpinn_loss = 0.0;  // L*_sq at the final parameters
    double rel_l2_percent = 0.0;
    std::vector<std::pair<int, double>> history;
    double wall_seconds = 0.0;
};

struct TrainResult {
    MlpNetwork net;
    RunReport report;
};

/// Momentum descent on a generic objective; `objective` returns the value and
/// overwrites `grad`. With rescale_velocity the step is divided elementwise by the
/// root of a running mean of squared gradients.
struct MomentumOptions {
    double step = 1e-3;
    double momentum = 0.9;
    int iterations = 1000;
    bool rescale_velocity = false;
    int history_every = 100;
    double divergence_limit = 1e6;
};
struct DescentResult {
    double initial_value = 0.0;
    double final_value = 0.0;
    std::vector<std::pair<int, double>> history;
};
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
DescentResult momentum_descent(const Objective& objective, Eigen::VectorXd& x, const MomentumOptions& options);

/// Full-batch momentum gradient descent on the configured loss.
TrainResult train(const ManufacturedProblem& problem, const TrainConfig& cfg);

/// 100 ||v - u|| / ||u|| over (0,1)^2 x (0,T), midpoint rule with `res` points per axis.
double relative_l2_error(const Field& v, const Field& u, int d, double T, int res = 50);
double relative_l2_error(const MlpNetwork& net, const ManufacturedProblem& problem, double T = 1.0, int res = 50);

struct Table1Cell {
    int mesh = 0;
    std::uint64_t seed = 0;
    RunReport pinn;
    RunReport cpinn;
};
struct Table1Summary {
    int mesh = 0;
    double median_err_pinn = 0.0;
    double median_err_cpinn = 0.0;
    double median_loss_pinn = 0.0;
    double median_loss_cpinn = 0.0;
    double ratio() const { return median_err_pinn / median_err_cpinn; }
};
struct Table1 {
    std::vector<Table1Cell> cells;
    std::vector<Table1Summary> summary;
};

Table1 reproduce_table1(const std::string& problem, const std::vector<int>& meshes,
                        const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                        const std::function<void(const Table1Cell&)>& on_cell = {});
void write_table1_csv(std::ostream& os, const std::string& problem, const Table1& table);

double median(std::vector<double> v);

/// Value grids of the exact solution and two trained nets at the requested times.
struct HeatmapGrid {
    std::string source;  // exact | pinn | cpinn
    double t = 0.0;
    int res = 0;
    std::vector<double> values;  // res x res, row-major with y slowest
};
std::vector<HeatmapGrid> figure1_data(const MlpNetwork* pinn, const MlpNetwork* cpinn,
                                      const ManufacturedProblem& problem, const std::vector<double>& times, int res);
void write_figure1_csv(std::ostream& os, const std::vector<HeatmapGrid>& grids);

/// Recovery-rate study: smooth and bump fixtures interpolated over a level sweep,
/// fitted slopes next to the predicted ones.
struct RecoveryRow {
    std::string fixture;
    int k = 0;
    int kp = 0;
    double error = 0.0;
    double fitted_slope = 0.0;
    double predicted_slope = 0.0;
};
std::vector<RecoveryRow> rate_study_recovery(const BesovClass& cls, NormId norm, int kmax, int d = 2);

/// Discrete norms against quadrature across refinement levels k = k' (r = r' = 2).
/// "mixed": interior L^2 L^2 norm of sin(pi x_1) sin(pi x_2) cos(t) against a fine
/// reference quadrature; "init": L^2 norm of sin(pi x_1) sin(pi x_2) at t = 0, same
/// reference; "h12", "h14", "h1214": boundary pieces of sin(pi x_1) cos(pi x_2) e^{-t}
/// against quadrature at the matched per-axis resolution r 2^k.
struct NormCheckRow {
    int k = 0;
    int kp = 0;
    double discrete = 0.0;
    double quadrature = 0.0;
    double ratio() const { return discrete / quadrature; }
};
std::vector<NormCheckRow> norm_check(const std::string& which, int kmin, int kmax, int reference_res = 64);

}  // namespace cpinn
