#include "cpinn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpinn {

namespace {

Eigen::MatrixXd site_inputs(const SiteSet& sites) {
    const int d = sites.dim();
    Eigen::MatrixXd in(d + 1, static_cast<Eigen::Index>(sites.size()));
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto x = sites.x(i);
        for (int a = 0; a < d; ++a) in(a, static_cast<Eigen::Index>(i)) = x[a];
        in(d, static_cast<Eigen::Index>(i)) = sites.t(i);
    }
    return in;
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw LossError(std::string("loss: non-finite network output at ") + what + " sites");
}

std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

double mean_square(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc / static_cast<double>(v.size());
}

void check_sites(const SiteEvaluation& sites, const ProblemData& data) {
    if (sites.residual.size() != data.f.size() || sites.boundary.size() != data.g.size() ||
        sites.initial.size() != data.u0.size())
        throw LossError("loss: site evaluation does not match the problem data");
    for (const auto* v : {&sites.residual, &sites.boundary, &sites.initial})
        for (double x : *v)
            if (!std::isfinite(x)) throw LossError("loss: non-finite model output");
}

}  // namespace

Field as_field(const MlpNetwork& net) {
    return Field{[net](std::span<const double> x, double t) { return net.forward(x, t); },
                 [net](std::span<const double> x, double t) { return net.jet(x, t); }};
}

void ProblemData::validate() const {
    if (f.size() != interior.points.size()) throw LossError("problem data: f is misaligned with the interior grid");
    if (g.size() != boundary.points.size()) throw LossError("problem data: g is misaligned with the boundary grid");
    if (u0.size() != initial.points.size()) throw LossError("problem data: u0 is misaligned with the initial grid");
}

ProblemData sample_problem(TensorGrid interior, BoundaryGrid boundary, InitialGrid initial,
                           const std::function<double(std::span<const double>, double)>& f,
                           const std::function<double(std::span<const double>, double)>& g,
                           const std::function<double(std::span<const double>)>& u0, std::optional<Field> exact_u) {
    ProblemData data;
    data.interior = std::move(interior);
    data.boundary = std::move(boundary);
    data.initial = std::move(initial);
    for (std::size_t i = 0; i < data.interior.points.size(); ++i)
        data.f.push_back(f(data.interior.points.x(i), data.interior.points.t(i)));
    for (std::size_t i = 0; i < data.boundary.points.size(); ++i)
        data.g.push_back(g(data.boundary.points.x(i), data.boundary.points.t(i)));
    for (std::size_t i = 0; i < data.initial.points.size(); ++i) data.u0.push_back(u0(data.initial.points.x(i)));
    data.exact_u = std::move(exact_u);
    return data;
}

std::string to_string(LossKind kind) { return kind == LossKind::Pinn ? "pinn" : "cpinn"; }

LossKind parse_loss_kind(const std::string& name) {
    if (name == "pinn") return LossKind::Pinn;
    if (name == "cpinn") return LossKind::Cpinn;
    throw LossError("unknown loss kind '" + name + "' (expected pinn or cpinn)");
}

SiteEvaluation evaluate_sites(const MlpNetwork& net, const ProblemData& data) {
    data.validate();
    const int d = data.dim();
    SiteEvaluation out;
    const JetBatch interior = net.evaluate(site_inputs(data.interior.points), JetOrder::Laplacian);
    out.residual.resize(data.f.size());
    for (std::size_t i = 0; i < data.f.size(); ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        out.residual[i] = data.f[i] + interior.laplacian[e] - interior.grad(d, e);
    }
    const JetBatch boundary = net.evaluate(site_inputs(data.boundary.points), JetOrder::Value);
    out.boundary.assign(boundary.value.data(), boundary.value.data() + boundary.value.size());
    const JetBatch initial = net.evaluate(site_inputs(data.initial.points), JetOrder::Value);
    out.initial.assign(initial.value.data(), initial.value.data() + initial.value.size());
    return out;
}

SiteEvaluation evaluate_sites(const Field& field, const ProblemData& data) {
    data.validate();
    SiteEvaluation out;
    out.residual.resize(data.f.size());
    for (std::size_t i = 0; i < data.f.size(); ++i) {
        const Jet j = field.jet(data.interior.points.x(i), data.interior.points.t(i));
        out.residual[i] = data.f[i] + j.laplacian - j.dt;
    }
    for (std::size_t i = 0; i < data.g.size(); ++i)
        out.boundary.push_back(field.value(data.boundary.points.x(i), data.boundary.points.t(i)));
    for (std::size_t i = 0; i < data.u0.size(); ++i)
        out.initial.push_back(field.value(data.initial.points.x(i), 0.0));
    return out;
}

double default_gamma(int d, std::size_t m_tilde) {
    if (d <= 1) return 1.0;
    if (d == 2) {
        if (m_tilde < 3) throw LossError("gamma: m_tilde must be >= 3 for d = 2");
        return 1.0 + 1.0 / std::log(static_cast<double>(m_tilde));
    }
    return 2.0 * d / (d + 2.0);
}

LossBreakdown pinn_loss(const SiteEvaluation& sites, const ProblemData& data) {
    check_sites(sites, data);
    LossBreakdown out;
    out.interior = mean_square(sites.residual);
    out.boundary_l2 = mean_square(difference(sites.boundary, data.g));
    out.initial = mean_square(difference(sites.initial, data.u0));
    out.total = out.interior + out.boundary_l2 + out.initial;
    return out;
}

LossBreakdown pinn_loss(const MlpNetwork& net, const ProblemData& data) {
    return pinn_loss(evaluate_sites(net, data), data);
}

LossBreakdown cpinn_loss_sq(const SiteEvaluation& sites, const ProblemData& data, double gamma) {
    if (!(gamma >= 1.0)) throw LossError("cpinn loss: gamma must be >= 1");
    check_sites(sites, data);
    const auto mismatch = difference(data.g, sites.boundary);
    LossBreakdown out;
    const double interior = discrete_mixed(data.interior, sites.residual, gamma);
    const double l2 = discrete_boundary_l2(data.boundary, mismatch);
    const double h12 = discrete_h12_seminorm(data.boundary, mismatch);
    const double h14 = discrete_h14_seminorm(data.boundary, mismatch);
    const double init = discrete_initial_l2(data.initial, difference(sites.initial, data.u0));
    out.interior = interior * interior;
    out.boundary_l2 = 2.0 * l2 * l2;
    out.boundary_h12 = h12 * h12;
    out.boundary_h14 = h14 * h14;
    out.initial = init * init;
    out.total = out.interior + out.boundary_l2 + out.boundary_h12 + out.boundary_h14 + out.initial;
    return out;
}

LossBreakdown cpinn_loss_sq(const MlpNetwork& net, const ProblemData& data, double gamma) {
    return cpinn_loss_sq(evaluate_sites(net, data), data, gamma);
}

LossBreakdown l_star_breakdown(const SiteEvaluation& sites, const ProblemData& data, const LStarOptions& options) {
    const int d = data.dim();
    if (d < 2) throw LossError("l_star: requires d >= 2");
    check_sites(sites, data);
    const double gamma = options.gamma.value_or(default_gamma(d, data.interior.m_tilde));
    LossBreakdown out;
    if (d == 2) {
        if (data.interior.m_tilde < 3) throw LossError("l_star: m_tilde must be >= 3 for d = 2");
        out.log_factor = 1.0 + std::log(static_cast<double>(data.interior.m_tilde));
    }
    const auto mismatch = difference(data.g, sites.boundary);
    out.interior = out.log_factor * discrete_mixed(data.interior, sites.residual, gamma);
    out.boundary_l2 = 2.0 * discrete_boundary_l2(data.boundary, mismatch);
    out.boundary_h12 = discrete_h12_seminorm(data.boundary, mismatch);
    out.boundary_h14 = discrete_h14_seminorm(data.boundary, mismatch);
    if (options.include_initial)
        out.initial = discrete_initial_l2(data.initial, difference(sites.initial, data.u0));
    out.total = out.interior + out.boundary_l2 + out.boundary_h12 + out.boundary_h14 + out.initial;
    return out;
}

double l_star(const SiteEvaluation& sites, const ProblemData& data, const LStarOptions& options) {
    return l_star_breakdown(sites, data, options).total;
}

// ---------------------------------------------------------------------------

LossEvaluator::LossEvaluator(const ProblemData& data, LossKind kind, std::optional<double> gamma)
    : data_(&data), kind_(kind), gamma_(2.0) {
    data.validate();
    if (kind == LossKind::Cpinn) {
        gamma_ = gamma.value_or(default_gamma(data.dim(), data.interior.m_tilde));
        if (!(gamma_ >= 1.0)) throw LossError("cpinn loss: gamma must be >= 1");
        forms_ = boundary_quadratic_forms(data.boundary);
    }
    interior_inputs_ = site_inputs(data.interior.points);
    boundary_inputs_ = site_inputs(data.boundary.points);
    initial_inputs_ = site_inputs(data.initial.points);
}

LossBreakdown LossEvaluator::value(const MlpNetwork& net) const { return run(net, nullptr); }

LossBreakdown LossEvaluator::value_and_gradient(const MlpNetwork& net, Eigen::VectorXd& grad) const {
    grad.setZero(net.params().size());
    return run(net, &grad);
}

LossBreakdown LossEvaluator::run(const MlpNetwork& net, Eigen::VectorXd* grad) const {
    const ProblemData& data = *data_;
    const int d = data.dim();
    ForwardTape interior_tape, boundary_tape, initial_tape;
    const bool want_grad = grad != nullptr;

    const JetBatch interior = net.evaluate(interior_inputs_, JetOrder::Laplacian, want_grad ? &interior_tape : nullptr);
    const JetBatch boundary = net.evaluate(boundary_inputs_, JetOrder::Value, want_grad ? &boundary_tape : nullptr);
    const JetBatch initial = net.evaluate(initial_inputs_, JetOrder::Value, want_grad ? &initial_tape : nullptr);
    require_finite(interior.laplacian, "interior");
    require_finite(interior.grad.row(d).transpose(), "interior");
    require_finite(boundary.value, "boundary");
    require_finite(initial.value, "initial");

    const Eigen::Map<const Eigen::VectorXd> f(data.f.data(), static_cast<Eigen::Index>(data.f.size()));
    const Eigen::Map<const Eigen::VectorXd> g(data.g.data(), static_cast<Eigen::Index>(data.g.size()));
    const Eigen::Map<const Eigen::VectorXd> u0(data.u0.data(), static_cast<Eigen::Index>(data.u0.size()));
    const Eigen::VectorXd residual = f + interior.laplacian - interior.grad.row(d).transpose();
    const Eigen::VectorXd e_bnd = boundary.value - g;
    const Eigen::VectorXd e_init = initial.value - u0;

    Eigen::VectorXd r_bar(residual.size());
    Eigen::VectorXd b_bar(e_bnd.size());
    Eigen::VectorXd i_bar(e_init.size());
    LossBreakdown out;
    const auto n_int = static_cast<double>(residual.size());
    const auto n_bnd = static_cast<double>(e_bnd.size());
    const auto n_init = static_cast<double>(e_init.size());

    out.initial = e_init.squaredNorm() / n_init;
    i_bar = 2.0 * e_init / n_init;

    if (kind_ == LossKind::Pinn) {
        out.interior = residual.squaredNorm() / n_int;
        r_bar = 2.0 * residual / n_int;
        out.boundary_l2 = e_bnd.squaredNorm() / n_bnd;
        b_bar = 2.0 * e_bnd / n_bnd;
    } else {
        const auto m_space = static_cast<Eigen::Index>(data.interior.m_tilde);
        const auto m_time = static_cast<Eigen::Index>(data.interior.m_hat);
        const double g2 = 2.0 / gamma_;
        double interior_acc = 0.0;
        for (Eigen::Index j = 0; j < m_time; ++j) {
            const auto level = residual.segment(j * m_space, m_space).array().abs();
            const double mean = level.pow(gamma_).mean();
            interior_acc += std::pow(mean, g2);
            const double outer = mean > 0.0 ? std::pow(mean, g2 - 1.0) : 0.0;
            const double scale = 2.0 * outer / (static_cast<double>(m_time) * static_cast<double>(m_space));
            const auto r = residual.segment(j * m_space, m_space).array();
            r_bar.segment(j * m_space, m_space) =
                (scale * level.pow(gamma_ - 1.0) * r.sign()).matrix();
        }
        out.interior = interior_acc / static_cast<double>(m_time);

        out.boundary_l2 = 2.0 * e_bnd.squaredNorm() / n_bnd;
        b_bar = 4.0 * e_bnd / n_bnd;

        const auto mb = static_cast<Eigen::Index>(data.boundary.m_bar);
        const auto mh = static_cast<Eigen::Index>(data.boundary.m_hat);
        const Eigen::Map<const Eigen::MatrixXd> E(e_bnd.data(), mb, mh);
        const Eigen::MatrixXd space_e = forms_.space * E;
        const Eigen::MatrixXd e_time = E * forms_.time;
        out.boundary_h12 = std::max(0.0, forms_.h12_scale * (E.array() * space_e.array()).sum());
        out.boundary_h14 = std::max(0.0, forms_.h14_scale * (E.array() * e_time.array()).sum());
        Eigen::Map<Eigen::MatrixXd> B(b_bar.data(), mb, mh);
        B += 2.0 * forms_.h12_scale * space_e + 2.0 * forms_.h14_scale * e_time;
    }
    out.total = out.interior + out.boundary_l2 + out.boundary_h12 + out.boundary_h14 + out.initial;

    if (want_grad) {
        JetBatch adj;
        adj.value = Eigen::VectorXd::Zero(residual.size());
        adj.grad = Eigen::MatrixXd::Zero(d + 1, residual.size());
        adj.grad.row(d) = -r_bar.transpose();
        adj.laplacian = r_bar;
        net.backward(interior_tape, adj, *grad);

        JetBatch adj_b;
        adj_b.value = b_bar;
        net.backward(boundary_tape, adj_b, *grad);
        JetBatch adj_i;
        adj_i.value = i_bar;
        net.backward(initial_tape, adj_i, *grad);
    }
    return out;
}

// ---------------------------------------------------------------------------

double l2h1_distance(const Field& a, const Field& b, int d, double T, int res) {
    if (d < 1 || res < 1 || !(T > 0.0)) throw LossError("l2h1_distance: invalid arguments");
    const double hx = 1.0 / res;
    const double ht = T / res;
    std::size_t n_space = 1;
    for (int i = 0; i < d; ++i) n_space *= static_cast<std::size_t>(res);
    double cell = ht;
    for (int i = 0; i < d; ++i) cell *= hx;
    std::vector<double> x(d);
    double acc = 0.0;
    for (int jt = 0; jt < res; ++jt) {
        const double t = (jt + 0.5) * ht;
        for (std::size_t flat = 0; flat < n_space; ++flat) {
            std::size_t rem = flat;
            for (int i = d - 1; i >= 0; --i) {
                x[i] = (static_cast<double>(rem % res) + 0.5) * hx;
                rem /= res;
            }
            const Jet ja = a.jet(x, t);
            const Jet jb = b.jet(x, t);
            const double dv = ja.value - jb.value;
            acc += cell * (dv * dv + (ja.grad_x - jb.grad_x).squaredNorm());
        }
    }
    return std::sqrt(acc);
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw LossError("spearman: need two equal-length samples of size >= 2");
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

ErrorLossStudy error_vs_loss_study(const std::vector<std::pair<std::string, Field>>& candidates,
                                   const ProblemData& data, int quad_res, const LStarOptions& options) {
    if (!data.exact_u) throw LossError("error_vs_loss_study: the problem has no exact solution");
    ErrorLossStudy study;
    const double T = data.interior.times.back();
    for (const auto& [label, field] : candidates) {
        ErrorLossRow row;
        row.label = label;
        row.l_star = l_star(evaluate_sites(field, data), data, options);
        row.error_l2h1 = l2h1_distance(field, *data.exact_u, data.dim(), T, quad_res);
        study.rows.push_back(row);
    }
    if (study.rows.size() >= 2) {
        std::vector<double> ls, es;
        for (const auto& r : study.rows) {
            ls.push_back(r.l_star);
            es.push_back(r.error_l2h1);
        }
        study.spearman = spearman(ls, es);
    }
    return study;
}

}  // namespace cpinn
