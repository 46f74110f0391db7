#include "cpinn/experiments.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cpinn {

void TrainConfig::validate() const {
    if (mesh < 2) throw std::invalid_argument("config: mesh must be >= 2");
    if (width < 1 || depth < 1) throw std::invalid_argument("config: width and depth must be >= 1");
    if (!(step > 0.0)) throw std::invalid_argument("config: step must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("config: momentum must be in [0, 1)");
    if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
    if (history_every < 1) throw std::invalid_argument("config: history_every must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("config: T must be > 0");
    if (gamma && !(*gamma >= 1.0)) throw std::invalid_argument("config: gamma must be >= 1");
    if (!(divergence_limit > 0.0)) throw std::invalid_argument("config: divergence_limit must be > 0");
}

DescentResult momentum_descent(const Objective& objective, Eigen::VectorXd& x, const MomentumOptions& options) {
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    DescentResult out;
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd second = Eigen::VectorXd::Zero(x.size());
    double decay = 1.0;
    auto check = [&](double value, int it) {
        if (!std::isfinite(value) || value > options.divergence_limit) {
            std::ostringstream msg;
            msg << "training diverged at iteration " << it << ": loss = " << value;
            throw DivergenceError(msg.str());
        }
    };
    for (int it = 0; it < options.iterations; ++it) {
        const double value = objective(x, grad);
        check(value, it);
        if (it == 0) out.initial_value = value;
        if (it % options.history_every == 0) out.history.emplace_back(it, value);
        velocity = options.momentum * velocity + grad;
        if (options.rescale_velocity) {
            second = beta2 * second + (1.0 - beta2) * grad.cwiseAbs2();
            decay *= beta2;
            const Eigen::ArrayXd scale = (second.array() / (1.0 - decay)).sqrt() + eps;
            x.array() -= options.step * (1.0 - options.momentum) * velocity.array() / scale;
        } else {
            x -= options.step * velocity;
        }
    }
    out.final_value = objective(x, grad);
    check(out.final_value, options.iterations);
    if (options.iterations == 0) out.initial_value = out.final_value;
    out.history.emplace_back(options.iterations, out.final_value);
    return out;
}

namespace {

// Every iteration allocates and frees the same large jet blocks; keep them on the
// heap instead of round-tripping through mmap.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)done;
#endif
}

}  // namespace

TrainResult train(const ManufacturedProblem& problem, const TrainConfig& cfg) {
    cfg.validate();
    keep_large_blocks_on_heap();
    const auto start = std::chrono::steady_clock::now();
    const ProblemData data = mesh_problem(problem, cfg.mesh, cfg.T);
    const NetworkShape shape{data.dim(), cfg.width, cfg.depth, cfg.skip};
    MlpNetwork net = MlpNetwork::init(shape, cfg.seed);
    const LossEvaluator evaluator(data, cfg.loss, cfg.gamma);

    const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        net.params() = x;
        return evaluator.value_and_gradient(net, grad).total;
    };
    MomentumOptions options;
    options.step = cfg.step;
    options.momentum = cfg.momentum;
    options.iterations = cfg.iterations;
    options.rescale_velocity = cfg.rescale_velocity;
    options.history_every = cfg.history_every;
    options.divergence_limit = cfg.divergence_limit;
    Eigen::VectorXd x = net.params();
    const DescentResult descent = momentum_descent(objective, x, options);
    net.params() = x;

    RunReport report;
    report.problem = problem.name;
    report.loss = cfg.loss;
    report.mesh = cfg.mesh;
    report.seed = cfg.seed;
    report.iterations = cfg.iterations;
    report.initial_loss = descent.initial_value;
    report.final_loss = descent.final_value;
    report.history = descent.history;
    report.final_pinn_loss = pinn_loss(net, data).total;
    report.final_cpinn_loss =
        cpinn_loss_sq(net, data, cfg.gamma.value_or(default_gamma(data.dim(), data.interior.m_tilde))).total;
    report.rel_l2_percent = relative_l2_error(net, problem, cfg.T);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(net), std::move(report)};
}

}  // namespace cpinn
