#include "cpinn/network.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace cpinn {

namespace {

// Activation and its first three derivatives, applied elementwise.
struct ActivationDerivs {
    Eigen::ArrayXXd y, s1, s2, s3;
};

void tanh_derivs(const Eigen::ArrayXXd& a, ActivationDerivs& out, bool need_higher) {
    out.y = a.tanh();
    if (!need_higher) return;
    out.s1 = 1.0 - out.y.square();
    out.s2 = -2.0 * out.y * out.s1;
    out.s3 = -2.0 * out.s1.square() + 4.0 * out.y.square() * out.s1;
}

void relu3_derivs(const Eigen::ArrayXXd& a, ActivationDerivs& out, bool need_higher) {
    const Eigen::ArrayXXd z = a.max(0.0);
    out.y = z.cube();
    if (!need_higher) return;
    out.s1 = 3.0 * z.square();
    out.s2 = 6.0 * z;
    out.s3 = (a > 0.0).cast<double>() * 6.0;
}

void activate(int layer, const Eigen::ArrayXXd& a, ActivationDerivs& out, bool need_higher) {
    if (layer == 0)
        tanh_derivs(a, out, need_higher);
    else
        relu3_derivs(a, out, need_higher);
}

double scalar_act(int layer, double a, int order) {
    if (layer == 0) {
        const double y = std::tanh(a);
        const double s1 = 1.0 - y * y;
        switch (order) {
            case 0: return y;
            case 1: return s1;
            default: return -2.0 * y * s1;
        }
    }
    const double z = a > 0.0 ? a : 0.0;
    switch (order) {
        case 0: return z * z * z;
        case 1: return 3.0 * z * z;
        default: return 6.0 * z;
    }
}

void write_le(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(bytes.data(), 8);
}

std::uint64_t read_le(std::istream& is) {
    std::array<unsigned char, 8> bytes{};
    is.read(reinterpret_cast<char*>(bytes.data()), 8);
    if (!is) throw NetworkError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void NetworkShape::validate() const {
    if (d < 1) throw NetworkError("network: d must be >= 1");
    if (width < 1) throw NetworkError("network: width must be >= 1");
    if (depth < 2) throw NetworkError("network: depth must be >= 2");
}

std::size_t NetworkShape::parameter_count() const {
    const auto w = static_cast<std::size_t>(width);
    return (static_cast<std::size_t>(d) + 2) * w + static_cast<std::size_t>(depth - 1) * (w + 1) * w + (w + 1);
}

MlpNetwork::MlpNetwork(NetworkShape shape, Eigen::VectorXd params, std::uint64_t seed)
    : shape_(shape), seed_(seed), params_(std::move(params)) {
    shape_.validate();
    if (static_cast<std::size_t>(params_.size()) != shape_.parameter_count())
        throw NetworkError("network: parameter vector has the wrong length");
    if (!params_.allFinite()) throw NetworkError("network: non-finite parameter");
    build_offsets();
}

void MlpNetwork::build_offsets() {
    offsets_.clear();
    Eigen::Index off = 0;
    for (int l = 0; l < shape_.depth; ++l) {
        offsets_.push_back(off);
        off += static_cast<Eigen::Index>(shape_.width) * (fan_in(l) + 1);
    }
    offsets_.push_back(off);
}

MlpNetwork MlpNetwork::zeros(const NetworkShape& shape) {
    shape.validate();
    return MlpNetwork(shape, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.parameter_count())), 0);
}

MlpNetwork MlpNetwork::init(const NetworkShape& shape, std::uint64_t seed) {
    MlpNetwork net = zeros(shape);
    net.seed_ = seed;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < shape.depth; ++l) {
        const double bound = std::sqrt(6.0 / (net.fan_in(l) + shape.width));
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto w = net.weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
    const double bound = std::sqrt(6.0 / (shape.width + 1));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int i = 0; i < shape.width; ++i) net.params_[net.offsets_.back() + i] = dist(rng);
    return net;
}

Eigen::Map<const Eigen::MatrixXd> MlpNetwork::weight(int layer) const {
    return {params_.data() + offsets_[layer], shape_.width, fan_in(layer)};
}
Eigen::Map<Eigen::MatrixXd> MlpNetwork::weight(int layer) {
    return {params_.data() + offsets_[layer], shape_.width, fan_in(layer)};
}
Eigen::Map<const Eigen::VectorXd> MlpNetwork::bias(int layer) const {
    return {params_.data() + offsets_[layer] + static_cast<Eigen::Index>(shape_.width) * fan_in(layer), shape_.width};
}
Eigen::Map<Eigen::VectorXd> MlpNetwork::bias(int layer) {
    return {params_.data() + offsets_[layer] + static_cast<Eigen::Index>(shape_.width) * fan_in(layer), shape_.width};
}
Eigen::Map<const Eigen::VectorXd> MlpNetwork::output_weight() const {
    return {params_.data() + offsets_.back(), shape_.width};
}

double MlpNetwork::forward(std::span<const double> x, double t) const {
    if (static_cast<int>(x.size()) != shape_.d) throw NetworkError("forward: input has wrong dimension");
    Eigen::VectorXd z(shape_.d + 1);
    for (int a = 0; a < shape_.d; ++a) z[a] = x[a];
    z[shape_.d] = t;
    for (int l = 0; l < shape_.depth; ++l) {
        Eigen::VectorXd a = weight(l) * z + bias(l);
        Eigen::VectorXd y = a.unaryExpr([l](double v) { return scalar_act(l, v, 0); });
        if (has_skip(l)) y += z;
        z = std::move(y);
    }
    return output_weight().dot(z) + output_bias();
}

Jet MlpNetwork::jet(std::span<const double> x, double t) const {
    const int d = shape_.d;
    if (static_cast<int>(x.size()) != d) throw NetworkError("jet: input has wrong dimension");
    const int n_in = d + 1;
    Eigen::VectorXd z(n_in);
    for (int a = 0; a < d; ++a) z[a] = x[a];
    z[d] = t;
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n_in, n_in);  // row i: gradient of unit i
    Eigen::MatrixXd hs = Eigen::MatrixXd::Zero(n_in, d * d);    // row i: spatial Hessian of unit i

    for (int l = 0; l < shape_.depth; ++l) {
        const auto w = weight(l);
        const Eigen::VectorXd a = w * z + bias(l);
        const Eigen::MatrixXd ga = w * g;
        const Eigen::MatrixXd ha = w * hs;
        Eigen::VectorXd y(shape_.width);
        Eigen::MatrixXd gy(shape_.width, n_in);
        Eigen::MatrixXd hy(shape_.width, d * d);
        for (int i = 0; i < shape_.width; ++i) {
            const double s0 = scalar_act(l, a[i], 0);
            const double s1 = scalar_act(l, a[i], 1);
            const double s2 = scalar_act(l, a[i], 2);
            y[i] = s0;
            gy.row(i) = s1 * ga.row(i);
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q) hy(i, p * d + q) = s2 * ga(i, p) * ga(i, q) + s1 * ha(i, p * d + q);
        }
        if (has_skip(l)) {
            y += z;
            gy += g;
            hy += hs;
        }
        z = std::move(y);
        g = std::move(gy);
        hs = std::move(hy);
    }
    const auto c = output_weight();
    Jet out;
    out.value = c.dot(z) + output_bias();
    const Eigen::RowVectorXd grad = c.transpose() * g;
    out.grad_x = grad.head(d).transpose();
    out.dt = grad[d];
    const Eigen::RowVectorXd hflat = c.transpose() * hs;
    out.hess_x.resize(d, d);
    for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) out.hess_x(p, q) = hflat[p * d + q];
    out.laplacian = out.hess_x.trace();
    return out;
}

JetBatch MlpNetwork::evaluate(const Eigen::MatrixXd& inputs, JetOrder order, ForwardTape* tape) const {
    const int d = shape_.d;
    const int n_in = d + 1;
    if (inputs.rows() != n_in) throw NetworkError("evaluate: inputs must have d+1 rows");
    const Eigen::Index S = inputs.cols();
    const bool full = order == JetOrder::Laplacian;
    const int B = full ? d + 3 : 1;  // blocks: value, grad x_1..x_d, grad t, laplacian

    Eigen::MatrixXd m(n_in, B * S);
    m.leftCols(S) = inputs;
    if (full) {
        m.rightCols((B - 1) * S).setZero();
        for (int k = 0; k < n_in; ++k) m.block(k, (1 + k) * S, 1, S).setOnes();
    }
    if (tape) {
        tape->order = order;
        tape->sites = S;
        tape->inputs.clear();
        tape->preacts.clear();
    }

    ActivationDerivs act;
    for (int l = 0; l < shape_.depth; ++l) {
        Eigen::MatrixXd p = weight(l) * m;
        p.leftCols(S).colwise() += bias(l);
        activate(l, p.leftCols(S).array(), act, full);
        Eigen::MatrixXd y(shape_.width, B * S);
        y.leftCols(S) = act.y.matrix();
        if (full) {
            Eigen::ArrayXXd q = Eigen::ArrayXXd::Zero(shape_.width, S);
            for (int k = 0; k < n_in; ++k) {
                const auto ga = p.middleCols((1 + k) * S, S).array();
                y.middleCols((1 + k) * S, S) = (act.s1 * ga).matrix();
                if (k < d) q += ga.square();
            }
            y.rightCols(S) = (act.s2 * q + act.s1 * p.rightCols(S).array()).matrix();
        }
        if (has_skip(l)) y += m;
        if (tape) {
            tape->inputs.push_back(std::move(m));
            tape->preacts.push_back(std::move(p));
        }
        m = std::move(y);
    }

    const Eigen::RowVectorXd out = output_weight().transpose() * m;
    JetBatch batch;
    batch.value = out.leftCols(S).transpose().array() + output_bias();
    if (full) {
        batch.grad.resize(n_in, S);
        for (int k = 0; k < n_in; ++k) batch.grad.row(k) = out.middleCols((1 + k) * S, S);
        batch.laplacian = out.rightCols(S).transpose();
    }
    if (tape) tape->last = std::move(m);
    return batch;
}

void MlpNetwork::backward(const ForwardTape& tape, const JetBatch& adjoint, Eigen::Ref<Eigen::VectorXd> grad) const {
    const int d = shape_.d;
    const int n_in = d + 1;
    const Eigen::Index S = tape.sites;
    const bool full = tape.order == JetOrder::Laplacian;
    const int B = full ? d + 3 : 1;
    if (grad.size() != params_.size()) throw NetworkError("backward: gradient has the wrong length");
    if (adjoint.value.size() != S) throw NetworkError("backward: adjoint size mismatch");

    Eigen::RowVectorXd out_bar(B * S);
    out_bar.leftCols(S) = adjoint.value.transpose();
    if (full) {
        for (int k = 0; k < n_in; ++k) {
            if (adjoint.grad.size() == 0)
                out_bar.middleCols((1 + k) * S, S).setZero();
            else
                out_bar.middleCols((1 + k) * S, S) = adjoint.grad.row(k);
        }
        if (adjoint.laplacian.size() == 0)
            out_bar.rightCols(S).setZero();
        else
            out_bar.rightCols(S) = adjoint.laplacian.transpose();
    }

    grad.segment(offsets_.back(), shape_.width) += tape.last * out_bar.transpose();
    grad[grad.size() - 1] += adjoint.value.sum();
    Eigen::MatrixXd m_bar = output_weight() * out_bar;

    ActivationDerivs act;
    for (int l = shape_.depth - 1; l >= 0; --l) {
        const Eigen::MatrixXd& p = tape.preacts[l];
        const Eigen::MatrixXd& m_in = tape.inputs[l];
        activate(l, p.leftCols(S).array(), act, true);

        Eigen::MatrixXd p_bar(shape_.width, B * S);
        const auto y_bar = m_bar.leftCols(S).array();
        if (!full) {
            p_bar = (act.s1 * y_bar).matrix();
        } else {
            const auto lap_bar = m_bar.rightCols(S).array();
            const auto lap_a = p.rightCols(S).array();
            Eigen::ArrayXXd a_bar = act.s1 * y_bar + act.s2 * lap_a * lap_bar;
            Eigen::ArrayXXd q = Eigen::ArrayXXd::Zero(shape_.width, S);
            for (int k = 0; k < n_in; ++k) {
                const auto ga = p.middleCols((1 + k) * S, S).array();
                const auto g_bar = m_bar.middleCols((1 + k) * S, S).array();
                a_bar += act.s2 * g_bar * ga;
                Eigen::ArrayXXd ga_bar = act.s1 * g_bar;
                if (k < d) {
                    q += ga.square();
                    ga_bar += 2.0 * act.s2 * ga * lap_bar;
                }
                p_bar.middleCols((1 + k) * S, S) = ga_bar.matrix();
            }
            a_bar += act.s3 * q * lap_bar;
            p_bar.leftCols(S) = a_bar.matrix();
            p_bar.rightCols(S) = (act.s1 * lap_bar).matrix();
        }

        const Eigen::Index w_size = static_cast<Eigen::Index>(shape_.width) * fan_in(l);
        Eigen::Map<Eigen::MatrixXd> w_grad(grad.data() + offsets_[l], shape_.width, fan_in(l));
        w_grad.noalias() += p_bar * m_in.transpose();
        grad.segment(offsets_[l] + w_size, shape_.width) += p_bar.leftCols(S).rowwise().sum();

        if (l > 0) {
            Eigen::MatrixXd next = weight(l).transpose() * p_bar;
            if (has_skip(l)) next += m_bar;
            m_bar = std::move(next);
        }
    }
}

void MlpNetwork::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw NetworkError("checkpoint: cannot open " + path.string());
    write_le(os, static_cast<std::uint64_t>(shape_.d));
    write_le(os, static_cast<std::uint64_t>(shape_.width));
    write_le(os, static_cast<std::uint64_t>(shape_.depth));
    write_le(os, shape_.skip ? 1u : 0u);
    write_le(os, seed_);
    for (Eigen::Index i = 0; i < params_.size(); ++i) write_le(os, std::bit_cast<std::uint64_t>(params_[i]));
    if (!os) throw NetworkError("checkpoint: write failed");
}

MlpNetwork MlpNetwork::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NetworkError("checkpoint: cannot open " + path.string());
    NetworkShape shape;
    shape.d = static_cast<int>(read_le(is));
    shape.width = static_cast<int>(read_le(is));
    shape.depth = static_cast<int>(read_le(is));
    shape.skip = read_le(is) != 0;
    const std::uint64_t seed = read_le(is);
    shape.validate();
    Eigen::VectorXd params(static_cast<Eigen::Index>(shape.parameter_count()));
    for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = std::bit_cast<double>(read_le(is));
    return MlpNetwork(shape, std::move(params), seed);
}

Jet finite_diff_jet(const MlpNetwork& net, std::span<const double> x, double t, double h) {
    const int d = net.shape().d;
    std::vector<double> xp(x.begin(), x.end());
    auto f = [&](const std::vector<double>& y, double s) { return net.forward(y, s); };
    Jet out;
    out.value = f(xp, t);
    out.grad_x.resize(d);
    out.hess_x.resize(d, d);
    for (int a = 0; a < d; ++a) {
        std::vector<double> plus = xp, minus = xp;
        plus[a] += h;
        minus[a] -= h;
        out.grad_x[a] = (f(plus, t) - f(minus, t)) / (2 * h);
        out.hess_x(a, a) = (f(plus, t) - 2 * out.value + f(minus, t)) / (h * h);
        for (int b = a + 1; b < d; ++b) {
            std::vector<double> pp = xp, pm = xp, mp = xp, mm = xp;
            pp[a] += h; pp[b] += h;
            pm[a] += h; pm[b] -= h;
            mp[a] -= h; mp[b] += h;
            mm[a] -= h; mm[b] -= h;
            const double v = (f(pp, t) - f(pm, t) - f(mp, t) + f(mm, t)) / (4 * h * h);
            out.hess_x(a, b) = v;
            out.hess_x(b, a) = v;
        }
    }
    out.dt = (f(xp, t + h) - f(xp, t - h)) / (2 * h);
    out.laplacian = out.hess_x.trace();
    return out;
}

Eigen::VectorXd finite_diff_param_grad(const MlpNetwork& net, const std::function<double(const MlpNetwork&)>& loss,
                                       double h) {
    MlpNetwork probe = net;
    Eigen::VectorXd out(net.params().size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double saved = probe.params()[i];
        probe.params()[i] = saved + h;
        const double up = loss(probe);
        probe.params()[i] = saved - h;
        const double down = loss(probe);
        probe.params()[i] = saved;
        out[i] = (up - down) / (2 * h);
    }
    return out;
}

}  // namespace cpinn
