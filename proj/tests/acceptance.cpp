// Acceptance harness: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all of 1..9)

#include "cpinn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cpinn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------

Outcome table1_ratio() {
    const TrainConfig base = default_config("u1");
    const auto table = reproduce_table1("u1", {15}, {1, 2, 3}, base, [](const Table1Cell& c) {
        std::cout << "  N=" << c.mesh << " seed=" << c.seed << " pinn " << fmt(c.pinn.rel_l2_percent) << "% ("
                  << fmt(c.pinn.wall_seconds) << " s) cpinn " << fmt(c.cpinn.rel_l2_percent) << "% ("
                  << fmt(c.cpinn.wall_seconds) << " s)\n"
                  << std::flush;
    });
    const auto& s = table.summary.front();
    const bool pass = s.median_err_cpinn < s.median_err_pinn && s.ratio() >= 2.0;
    return {pass, "median pinn " + fmt(s.median_err_pinn) + "%, cpinn " + fmt(s.median_err_cpinn) + "%, ratio " +
                      fmt(s.ratio()) + " (need >= 2)"};
}

Outcome exact_zero_loss() {
    const auto p = manufactured("u1");
    double worst = 0.0;
    for (int n : {5, 15, 30}) {
        const auto data = mesh_problem(p, n);
        const auto sites = evaluate_sites(p.u, data);
        worst = std::max(worst, pinn_loss(sites, data).total);
        worst = std::max(worst, cpinn_loss_sq(sites, data, default_gamma(2, data.interior.m_tilde)).total);
    }
    return {worst < 1e-20, "max loss " + fmt(worst) + " over N in {5,15,30} (need < 1e-20)"};
}

Outcome derivative_exactness() {
    std::mt19937_64 rng(12345);
    std::uniform_int_distribution<int> dd(1, 3), ww(2, 16), ll(2, 5), coin(0, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double jet_worst = 0.0;
    double plain_worst = 0.0;
    auto flat = [](const Jet& j) {
        const auto d = j.grad_x.size();
        Eigen::VectorXd v(2 + d + d * d);
        v << j.value, j.grad_x, j.dt, j.hess_x.reshaped();
        return v;
    };
    for (int trial = 0; trial < 100; ++trial) {
        const NetworkShape shape{dd(rng), ww(rng), ll(rng), coin(rng) == 1};
        const auto net = MlpNetwork::init(shape, rng());
        std::vector<double> x(shape.d);
        for (double& v : x) v = u(rng);
        const double t = u(rng);
        const Eigen::VectorXd exact = flat(net.jet(x, t));
        // Central differences at h and h/2 combined to cancel the h^2 truncation term.
        const Eigen::VectorXd coarse = flat(finite_diff_jet(net, x, t, 1e-4));
        const Eigen::VectorXd fine = flat(finite_diff_jet(net, x, t, 5e-5));
        const Eigen::VectorXd extrapolated = (4.0 * fine - coarse) / 3.0;
        jet_worst = std::max(jet_worst, (exact - extrapolated).cwiseAbs().maxCoeff() / extrapolated.cwiseAbs().maxCoeff());
        plain_worst = std::max(plain_worst, (exact - coarse).cwiseAbs().maxCoeff() / coarse.cwiseAbs().maxCoeff());
    }

    double grad_worst = 0.0;
    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 5);
    const std::vector<NetworkShape> shapes{{2, 8, 3, true}, {2, 10, 4, false}, {2, 12, 3, true}};
    for (const auto kind : {LossKind::Pinn, LossKind::Cpinn}) {
        const LossEvaluator eval(data, kind);
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            if (shapes[i].parameter_count() > 500) throw std::logic_error("acceptance: net too large");
            const auto net = MlpNetwork::init(shapes[i], 10 + i);
            Eigen::VectorXd grad;
            eval.value_and_gradient(net, grad);
            const auto fd = finite_diff_param_grad(net, [&](const MlpNetwork& n) { return eval.value(n).total; }, 1e-6);
            grad_worst = std::max(grad_worst, (grad - fd).norm() / fd.norm());
        }
    }
    return {jet_worst < 1e-4 && grad_worst < 1e-5,
            "jet rel err " + fmt(jet_worst) + " (need < 1e-4; plain step-1e-4 differences " + fmt(plain_worst) +
                "), param-grad rel err " + fmt(grad_worst) +
                " (need < 1e-5)"};
}

Outcome interpolation_rates() {
    const auto f = named_function("sinprod", 2);
    const auto c = interpolation_rate_study(f, 2, 2, 2, NormId::C, 1, 5);
    const auto l2 = interpolation_rate_study(f, 2, 2, 2, NormId::Ltau, 1, 5);
    const bool pass = std::abs(c.fitted_slope + 2.0) <= 0.3 && std::abs(l2.fitted_slope + 2.0) <= 0.3;
    return {pass, "sup slope " + fmt(c.fitted_slope) + ", L2L2 slope " + fmt(l2.fitted_slope) + " (need -2 +- 0.3)"};
}

BoundaryGrid hand_boundary(const std::vector<std::vector<double>>& xs, const std::vector<double>& times) {
    BoundaryGrid g;
    g.points = SiteSet(static_cast<int>(xs.front().size()));
    g.m_bar = xs.size();
    g.m_hat = times.size();
    g.times = times;
    for (double t : times)
        for (const auto& x : xs) g.points.push_back(x, t);
    return g;
}

Outcome norm_oracles() {
    int failures = 0;
    auto expect = [&](double got, double want) {
        if (!(std::abs(got - want) <= 1e-12)) ++failures;
    };
    expect(discrete_mixed(std::vector<double>(12, -1.5), 4, 3, 2.0), 1.5);
    expect(discrete_mixed(std::vector<double>{3.0, 4.0}, 2, 1, 2.0), std::sqrt(12.5));
    expect(discrete_mixed(std::vector<double>{1.0, 2.0, 0.0, 5.0}, 2, 2, kInfinity), std::sqrt(14.5));
    const auto b2 = hand_boundary({{0.0, 0.0}, {1.0, 0.0}}, {1.0, 2.0});
    expect(discrete_boundary_l2(b2, std::vector<double>{1.0, -1.0, 1.0, -1.0}), 1.0);
    const auto b1 = hand_boundary({{0.0, 0.0}, {1.0, 0.0}}, {1.0});
    expect(discrete_h12_seminorm(b1, std::vector<double>{0.0, 1.0}), std::sqrt(0.5));
    expect(discrete_h12_seminorm(b1, std::vector<double>{2.0, 2.0}), 0.0);
    const auto bt = hand_boundary({{0.0, 0.0}}, {1.0, 2.0});
    expect(discrete_h14_seminorm(bt, std::vector<double>{0.0, 1.0}), std::sqrt(0.5));
    InitialGrid ig;
    ig.points = SiteSet(1);
    ig.m_tilde = 4;
    for (int i = 0; i < 4; ++i) {
        const double x = i;
        ig.points.push_back(std::span<const double>(&x, 1), 0.0);
    }
    expect(discrete_initial_l2(ig, std::vector<double>{0.0, 0.0, 0.0, 2.0}), 1.0);
    const auto bg = boundary_grid(GridSpec{2, 1, 1, 2, 2, 1.0});
    expect(discrete_h1214_norm(bg, std::vector<double>(bg.points.size(), 1.0)), 2.0);
    const int hand_failures = failures;

    const GridSpec spec{2, 1, 1, 2, 2, 1.0};
    const auto tg = tensor_grid(spec);
    const auto ig2 = initial_grid(1, 2, 2);
    using Norm = std::function<double(std::span<const double>)>;
    const std::vector<std::pair<Norm, std::size_t>> norms{
        {[&](std::span<const double> v) { return discrete_mixed(tg, v, 2.0); }, tg.points.size()},
        {[&](std::span<const double> v) { return discrete_mixed(tg, v, 1.1); }, tg.points.size()},
        {[&](std::span<const double> v) { return discrete_boundary_l2(bg, v); }, bg.points.size()},
        {[&](std::span<const double> v) { return discrete_h12_seminorm(bg, v); }, bg.points.size()},
        {[&](std::span<const double> v) { return discrete_h14_seminorm(bg, v); }, bg.points.size()},
        {[&](std::span<const double> v) { return discrete_h1214_norm(bg, v); }, bg.points.size()},
        {[&](std::span<const double> v) { return discrete_initial_l2(ig2, v); }, ig2.points.size()},
    };
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    int axiom_failures = 0;
    for (const auto& [norm, n] : norms) {
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<double> a(n), b(n), sum(n), scaled(n);
            const double alpha = 4.0 * g(rng);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = g(rng);
                b[i] = g(rng);
                sum[i] = a[i] + b[i];
                scaled[i] = alpha * a[i];
            }
            const double na = norm(a);
            if (norm(sum) > na + norm(b) + 1e-12) ++axiom_failures;
            if (std::abs(norm(scaled) - std::abs(alpha) * na) > 1e-12 * (1.0 + na)) ++axiom_failures;
        }
    }
    return {hand_failures == 0 && axiom_failures == 0,
            std::to_string(hand_failures) + " hand-example mismatches, " + std::to_string(axiom_failures) +
                " axiom violations over 1000 random vectors per norm"};
}

Outcome norm_equivalence() {
    const auto rows = norm_check("h1214", 2, 5);
    std::vector<double> ratios;
    for (const auto& r : rows) ratios.push_back(r.ratio());
    const double med = median(ratios);
    double spread = 0.0;
    for (double r : ratios) spread = std::max(spread, std::abs(r / med - 1.0));

    const auto mixed = norm_check("mixed", 1, 5);
    std::vector<std::pair<int, int>> levels;
    std::vector<double> gaps;
    for (const auto& r : mixed) {
        levels.emplace_back(r.k, r.kp);
        gaps.push_back(std::abs(r.discrete - r.quadrature));
    }
    const double slope = rate_fit(levels, gaps).fitted_slope;
    return {spread < 0.5 && -slope > 0.5, "h1214 ratio median " + fmt(med) + ", max deviation " +
                                              fmt(100.0 * spread) + "% (need < 50%); mixed gap slope " + fmt(slope) +
                                              " (need decay > 0.5)"};
}

Outcome bump_invisibility() {
    const BesovClass cls{2.0, 2.0, 4.0, kInfinity, kInfinity, kInfinity};
    const int d = 2;
    std::vector<std::pair<int, int>> levels;
    std::vector<double> errors;
    double worst_rel = 0.0;
    double worst_inside = 0.0;
    for (int k = 1; k <= 5; ++k) {
        const GridSpec spec{d, k, 0, 2, 2, 1.0};
        const double side = 1.0 / (1 << k);
        const std::vector<double> origin{side * ((1 << k) / 2), side * ((1 << k) / 2 - (k > 1 ? 1 : 0))};
        const auto b = bump(origin, side, 0.25, 0.5, cls);
        const SpaceTimeFn f = [&](std::span<const double> x, double t) { return b(x, t); };
        const auto s = Interpolant::build(f, spec);
        // Dense probe of the bump itself on its cell.
        double bump_sup = 0.0;
        for (int i = 0; i <= 40; ++i)
            for (int j = 0; j <= 40; ++j)
                for (int l = 0; l <= 40; ++l) {
                    const std::vector<double> x{origin[0] + side * i / 40.0, origin[1] + side * j / 40.0};
                    const double t = 0.25 + 0.5 * l / 40.0;
                    bump_sup = std::max(bump_sup, std::abs(b(x, t)));
                    worst_inside = std::max(worst_inside, std::abs(s(x, t)));
                }
        const double err = sup_error(f, s, (1 << k) * 8 + 1);
        worst_rel = std::max(worst_rel, std::abs(err / bump_sup - 1.0));
        levels.emplace_back(k, 0);
        errors.push_back(err);
    }
    const double slope = rate_fit(levels, errors).fitted_slope;
    const double predicted = -(cls.s - d / cls.p);
    const bool pass = worst_inside == 0.0 && worst_rel < 0.01 && std::abs(slope - predicted) <= 0.3;
    return {pass, "max |S| on bump cell " + fmt(worst_inside) + ", sup error vs bump sup off by " +
                      fmt(100.0 * worst_rel) + "% (need < 1%), slope " + fmt(slope) + " vs " + fmt(predicted) +
                      " +- 0.3"};
}

Outcome grid_counts() {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> dd(1, 3), kk(0, 3), rr(2, 4), kp(0, 3);
    int failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        GridSpec spec;
        spec.d = dd(rng);
        spec.k = spec.d == 3 ? std::min(kk(rng), 2) : kk(rng);
        spec.kp = kp(rng);
        spec.r = rr(rng);
        spec.rp = rr(rng);
        spec.T = 0.5 + 0.25 * trial;
        std::size_t per_axis = static_cast<std::size_t>(spec.r) << spec.k;
        std::size_t m_tilde = 1;
        for (int a = 0; a < spec.d; ++a) m_tilde *= per_axis;
        const std::size_t m_hat = static_cast<std::size_t>(spec.rp) << spec.kp;
        std::size_t face = 1;
        for (int a = 0; a < spec.d - 1; ++a) face *= per_axis;
        const std::size_t nominal = 2 * spec.d * face * m_hat;

        const auto tg = tensor_grid(spec);
        const auto bg = boundary_grid(spec);
        const auto ig = initial_grid(spec.k, spec.r, spec.d);
        if (tg.points.size() != m_tilde * m_hat || tg.m_tilde != m_tilde || tg.m_hat != m_hat) ++failures;
        if (bg.nominal_count != nominal || spec.nominal_boundary_count() != nominal) ++failures;
        if (ig.points.size() != m_tilde) ++failures;
    }
    return {failures == 0, std::to_string(failures) + " count mismatches over 20 random specs"};
}

Outcome monotone_perturbations() {
    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 15);
    const BesovClass cls;
    const std::vector<double> origin{0.2, 0.3};
    const auto b = bump(origin, 0.5, 0.2, 0.6, cls);
    std::vector<std::pair<std::string, Field>> candidates;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
        Field f{[=](std::span<const double> x, double t) { return p.u.value(x, t) + eps * b(x, t); },
                [=](std::span<const double> x, double t) {
                    Jet j = p.u.jet(x, t);
                    j.value += eps * b(x, t);
                    j.grad_x += eps * b.grad_x(x, t);
                    j.dt += eps * b.dt(x, t);
                    j.laplacian += eps * b.laplacian(x, t);
                    return j;
                }};
        candidates.emplace_back("eps=" + fmt(eps), std::move(f));
    }
    const auto study = error_vs_loss_study(candidates, data, 24);
    bool increasing = true;
    std::string detail;
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        const auto& r = study.rows[i];
        detail += r.label + ": l_star " + fmt(r.l_star) + ", L2H1 " + fmt(r.error_l2h1) + "; ";
        if (i > 0)
            increasing = increasing && r.l_star > study.rows[i - 1].l_star &&
                         r.error_l2h1 > study.rows[i - 1].error_l2h1;
    }
    return {increasing && study.spearman == 1.0, detail + "spearman " + fmt(study.spearman)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Table 1 error ratio at N=15", table1_ratio},
        {"exact solution has zero loss", exact_zero_loss},
        {"derivatives match finite differences", derivative_exactness},
        {"interpolation rates", interpolation_rates},
        {"discrete norm oracles and axioms", norm_oracles},
        {"boundary norm equivalence and mixed-norm consistency", norm_equivalence},
        {"bump invisibility", bump_invisibility},
        {"grid counts", grid_counts},
        {"loss and error grow together", monotone_perturbations},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int c = std::atoi(argv[i]);
        if (c < 1 || c > static_cast<int>(criteria.size())) {
            std::cerr << "unknown criterion: " << argv[i] << "\n";
            return 2;
        }
        selected.push_back(c);
    }
    if (selected.empty())
        for (int c = 1; c <= static_cast<int>(criteria.size()); ++c) selected.push_back(c);

    int failed = 0;
    for (int c : selected) {
        const auto& [name, run] = criteria[c - 1];
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failed;
        std::cout << "criterion " << c << " " << (out.pass ? "PASS" : "FAIL") << ": " << name << " - " << out.detail
                  << "\n"
                  << std::flush;
    }
    return failed == 0 ? 0 : 1;
}
