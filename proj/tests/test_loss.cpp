#include "cpinn/experiments.hpp"
#include "cpinn/loss.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace cpinn;

namespace {

Field shifted(const Field& u, double c) {
    return {[u, c](std::span<const double> x, double t) { return u.value(x, t) + c; },
            [u, c](std::span<const double> x, double t) {
                Jet j = u.jet(x, t);
                j.value += c;
                return j;
            }};
}

ProblemData zero_problem_with_unit_initial() {
    const GridSpec spec{2, 0, 0, 2, 2, 1.0};
    const auto zero = [](std::span<const double>, double) { return 0.0; };
    return sample_problem(tensor_grid(spec), boundary_grid(spec), initial_grid(0, 2, 2), zero, zero,
                          [](std::span<const double>) { return 1.0; });
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("exact solution gives zero losses") {
    for (const char* name : {"u1", "u2"}) {
        const auto p = manufactured(name);
        for (int n : {5, 15}) {
            const auto data = mesh_problem(p, n);
            const auto sites = evaluate_sites(p.u, data);
            CHECK(pinn_loss(sites, data).total < 1e-20);
            CHECK(cpinn_loss_sq(sites, data, default_gamma(2, data.interior.m_tilde)).total < 1e-20);
            CHECK(l_star(sites, data) < 1e-9);
        }
    }
}

TEST_CASE("pinn loss on a zero net with unit initial data") {
    const auto data = zero_problem_with_unit_initial();
    REQUIRE(data.initial.points.size() == 4);
    const auto net = MlpNetwork::zeros({2, 3, 2, true});
    const auto b = pinn_loss(net, data);
    CHECK(b.interior == 0.0);
    CHECK(b.boundary_l2 == 0.0);
    CHECK(b.initial == doctest::Approx(1.0));
    CHECK(b.total == doctest::Approx(1.0));
    CHECK(b.boundary_h12 == 0.0);
    CHECK(b.boundary_h14 == 0.0);
}

TEST_CASE("loss term algebra") {
    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 6);
    const auto net = MlpNetwork::init({2, 5, 3, true}, 4);
    auto sites = evaluate_sites(as_field(net), data);
    const auto base = pinn_loss(sites, data);
    for (double& r : sites.residual) r *= 2.0;
    CHECK(pinn_loss(sites, data).interior == doctest::Approx(4.0 * base.interior).epsilon(1e-14));

    // gamma = 2 interior terms coincide.
    CHECK(cpinn_loss_sq(sites, data, 2.0).interior == doctest::Approx(pinn_loss(sites, data).interior).epsilon(1e-14));

    // A constant offset leaves only the boundary L2 and initial terms: 2c^2 + c^2.
    const double c = 0.3;
    const auto off = evaluate_sites(shifted(p.u, c), data);
    const auto b = cpinn_loss_sq(off, data, default_gamma(2, data.interior.m_tilde));
    CHECK(b.interior < 1e-24);
    CHECK(b.boundary_h12 < 1e-24);
    CHECK(b.boundary_h14 < 1e-24);
    CHECK(b.boundary_l2 == doctest::Approx(2.0 * c * c).epsilon(1e-12));
    CHECK(b.initial == doctest::Approx(c * c).epsilon(1e-12));
    CHECK(b.total == doctest::Approx(3.0 * c * c).epsilon(1e-12));

    CHECK_THROWS_AS(cpinn_loss_sq(sites, data, 0.5), LossError);
}

TEST_CASE("consistent loss vanishes only at zero mismatch") {
    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 5);
    const double gamma = default_gamma(2, data.interior.m_tilde);
    auto sites = evaluate_sites(p.u, data);
    CHECK(cpinn_loss_sq(sites, data, gamma).total < 1e-24);
    for (auto* v : {&sites.residual, &sites.boundary, &sites.initial}) {
        auto probe = sites;
        auto& target = v == &sites.residual ? probe.residual : v == &sites.boundary ? probe.boundary : probe.initial;
        target[target.size() / 2] += 1e-6;
        CHECK(cpinn_loss_sq(probe, data, gamma).total > 0.0);
    }
}

TEST_CASE("losses are invariant under permuting sites within a time level") {
    const auto p = manufactured("u2");
    const auto data = mesh_problem(p, 5);
    const auto net = MlpNetwork::init({2, 4, 2, true}, 9);
    const auto sites = evaluate_sites(as_field(net), data);
    const double gamma = default_gamma(2, data.interior.m_tilde);
    const auto base = cpinn_loss_sq(sites, data, gamma);
    const auto base_pinn = pinn_loss(sites, data);

    std::mt19937_64 rng(1);
    const std::size_t m = data.interior.m_tilde;
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    ProblemData moved = data;
    SiteEvaluation moved_sites = sites;
    moved.interior.points = SiteSet(2);
    for (std::size_t j = 0; j < data.interior.m_hat; ++j)
        for (std::size_t i = 0; i < m; ++i) {
            const auto src = data.interior.index(perm[i], j);
            moved.interior.points.push_back(data.interior.points.x(src), data.interior.points.t(src));
            moved.f[data.interior.index(i, j)] = data.f[src];
            moved_sites.residual[data.interior.index(i, j)] = sites.residual[src];
        }
    const auto b = cpinn_loss_sq(moved_sites, moved, gamma);
    CHECK(b.interior == doctest::Approx(base.interior).epsilon(1e-13));
    CHECK(b.total == doctest::Approx(base.total).epsilon(1e-13));
    CHECK(pinn_loss(moved_sites, moved).total == doctest::Approx(base_pinn.total).epsilon(1e-13));
}

TEST_CASE("l_star structure") {
    CHECK(default_gamma(3, 100) == doctest::Approx(1.2));
    CHECK(default_gamma(2, 225) == doctest::Approx(1.0 + 1.0 / std::log(225.0)));
    CHECK_THROWS_AS(default_gamma(2, 2), LossError);

    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 7);
    const double gamma = default_gamma(2, data.interior.m_tilde);
    auto sites = evaluate_sites(p.u, data);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (double& r : sites.residual) r = g(rng);
    // Interior only: the log factor multiplies the plain norm.
    const double plain = discrete_mixed(data.interior, sites.residual, gamma);
    CHECK(l_star(sites, data) / plain == doctest::Approx(1.0 + std::log(double(data.interior.m_tilde))).epsilon(1e-14));

    // Scaling every mismatch by alpha scales l_star by alpha.
    auto off = evaluate_sites(shifted(p.u, 0.2), data);
    for (double& r : off.residual) r = g(rng);
    const double base = l_star(off, data);
    const double alpha = 3.5;
    SiteEvaluation scaled = off;
    for (double& r : scaled.residual) r *= alpha;
    for (std::size_t i = 0; i < scaled.boundary.size(); ++i)
        scaled.boundary[i] = data.g[i] + alpha * (off.boundary[i] - data.g[i]);
    for (std::size_t i = 0; i < scaled.initial.size(); ++i)
        scaled.initial[i] = data.u0[i] + alpha * (off.initial[i] - data.u0[i]);
    CHECK(l_star(scaled, data) == doctest::Approx(alpha * base).epsilon(1e-12));

    // Dropping the initial term removes exactly the initial norm.
    const auto with = l_star_breakdown(off, data);
    const auto without = l_star_breakdown(off, data, {std::nullopt, false});
    CHECK(without.initial == 0.0);
    CHECK(with.total - without.total == doctest::Approx(with.initial));
}

TEST_CASE("loss evaluator values and gradients") {
    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 4);
    for (const auto kind : {LossKind::Pinn, LossKind::Cpinn}) {
        const LossEvaluator eval(data, kind);
        for (std::uint64_t seed : {1u, 2u}) {
            const NetworkShape shape{2, 6, 3, seed == 1};
            REQUIRE(shape.parameter_count() <= 500);
            const auto net = MlpNetwork::init(shape, seed);
            const double expected = kind == LossKind::Pinn ? pinn_loss(net, data).total
                                                           : cpinn_loss_sq(net, data, eval.gamma()).total;
            CHECK(eval.value(net).total == doctest::Approx(expected).epsilon(1e-12));
            Eigen::VectorXd grad;
            CHECK(eval.value_and_gradient(net, grad).total == doctest::Approx(expected).epsilon(1e-12));
            const auto fd = finite_diff_param_grad(net, [&](const MlpNetwork& n) { return eval.value(n).total; }, 1e-6);
            CHECK((grad - fd).norm() / fd.norm() < 1e-5);
        }
    }
    CHECK(parse_loss_kind("pinn") == LossKind::Pinn);
    CHECK(to_string(LossKind::Cpinn) == "cpinn");
    CHECK_THROWS(parse_loss_kind("mse"));
}

TEST_CASE("spearman and error study") {
    const std::vector<double> a{1, 2, 3, 4}, b{10, 20, 30, 40}, c{4, 3, 2, 1}, e{1, 1, 2, 2};
    CHECK(spearman(a, b) == doctest::Approx(1.0));
    CHECK(spearman(a, c) == doctest::Approx(-1.0));
    CHECK(spearman(e, e) == doctest::Approx(1.0));

    const auto p = manufactured("u1");
    const auto data = mesh_problem(p, 5);
    CHECK(l2h1_distance(p.u, p.u, 2, 1.0, 10) == 0.0);
    const auto study = error_vs_loss_study({{"exact", p.u}}, data, 10);
    REQUIRE(study.rows.size() == 1);
    CHECK(study.rows[0].l_star < 1e-9);
    CHECK(study.rows[0].error_l2h1 == 0.0);
    // Constant offsets: L^2 H^1 distance is c sqrt(T).
    CHECK(l2h1_distance(shifted(p.u, 0.5), p.u, 2, 1.0, 10) == doctest::Approx(0.5).epsilon(1e-12));
}

}  // TEST_SUITE
