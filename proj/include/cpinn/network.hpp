#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cpinn {

class NetworkError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Fully connected net on (x, t): tanh input layer, ReLU^3 hidden layers
/// (optionally with identity skips), linear scalar output.
struct NetworkShape {
    int d = 2;       // spatial dimension; input dimension is d + 1
    int width = 20;  // W
    int depth = 4;   // L hidden layers, the first being the tanh layer
    bool skip = true;

    void validate() const;
    std::size_t parameter_count() const;
};

/// Value and exact input derivatives of the network at one site.
struct Jet {
    double value = 0.0;
    Eigen::VectorXd grad_x;   // d
    double dt = 0.0;
    Eigen::MatrixXd hess_x;   // d x d
    double laplacian = 0.0;
};

enum class JetOrder {
    Value,      // value only
    Laplacian,  // value, full input gradient, spatial Laplacian
};

/// Network outputs at a batch of S sites.
struct JetBatch {
    Eigen::VectorXd value;      // S
    Eigen::MatrixXd grad;       // (d+1) x S, rows x_1..x_d, t; empty for JetOrder::Value
    Eigen::VectorXd laplacian;  // S; empty for JetOrder::Value
};

/// Intermediate blocks recorded by a batched forward pass for reverse accumulation.
struct ForwardTape {
    JetOrder order = JetOrder::Value;
    Eigen::Index sites = 0;
    std::vector<Eigen::MatrixXd> inputs;       // per hidden layer, n_in x (B*S)
    std::vector<Eigen::MatrixXd> preacts;      // per hidden layer, W x (B*S)
    Eigen::MatrixXd last;                      // W x (B*S), input of the output layer
};

class MlpNetwork {
public:
    MlpNetwork() = default;
    MlpNetwork(NetworkShape shape, Eigen::VectorXd params, std::uint64_t seed = 0);

    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    static MlpNetwork init(const NetworkShape& shape, std::uint64_t seed);
    /// Every parameter zero.
    static MlpNetwork zeros(const NetworkShape& shape);

    const NetworkShape& shape() const { return shape_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

    const Eigen::VectorXd& params() const { return params_; }
    Eigen::VectorXd& params() { return params_; }

    double forward(std::span<const double> x, double t) const;
    Jet jet(std::span<const double> x, double t) const;

    /// Batched evaluation; `inputs` is (d+1) x S with rows x_1..x_d, t.
    JetBatch evaluate(const Eigen::MatrixXd& inputs, JetOrder order, ForwardTape* tape = nullptr) const;

    /// Adds d(sum of adjoint . outputs)/d(params) into `grad`. `adjoint` carries the
    /// loss sensitivities for the outputs recorded on `tape` (same layout as JetBatch).
    void backward(const ForwardTape& tape, const JetBatch& adjoint, Eigen::Ref<Eigen::VectorXd> grad) const;

    /// Checkpoint: five little-endian int64 (d, W, L, skip, seed) then the f64 parameters.
    void save(const std::filesystem::path& path) const;
    static MlpNetwork load(const std::filesystem::path& path);

    // Parameter layout accessors (views into the flat vector).
    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<Eigen::VectorXd> bias(int layer);
    Eigen::Map<const Eigen::VectorXd> output_weight() const;
    double output_bias() const { return params_[params_.size() - 1]; }

private:
    NetworkShape shape_;
    std::uint64_t seed_ = 0;
    Eigen::VectorXd params_;
    std::vector<Eigen::Index> offsets_;  // start of each hidden layer's weights, then output

    void build_offsets();
    int fan_in(int layer) const { return layer == 0 ? shape_.d + 1 : shape_.width; }
    bool has_skip(int layer) const { return shape_.skip && layer > 0; }
};

/// Central finite-difference jet of `net.forward`. Test oracle only.
Jet finite_diff_jet(const MlpNetwork& net, std::span<const double> x, double t, double h);

/// Central finite differences of a scalar loss over all parameters. Test oracle only.
Eigen::VectorXd finite_diff_param_grad(const MlpNetwork& net,
                                       const std::function<double(const MlpNetwork&)>& loss, double h);

}  // namespace cpinn
