#include "cpinn/grid.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace cpinn;

namespace {

std::size_t ipow(std::size_t b, int e) {
    std::size_t out = 1;
    for (int i = 0; i < e; ++i) out *= b;
    return out;
}

bool on_boundary(std::span<const double> x) {
    return std::any_of(x.begin(), x.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("tensor grid counts and smallest examples") {
    const auto g = tensor_grid(GridSpec{2, 0, 0, 2, 2, 1.0});
    CHECK(g.points.size() == 8);
    CHECK(g.m_tilde == 4);
    CHECK(g.m_hat == 2);

    const auto g1 = tensor_grid(GridSpec{1, 0, 0, 2, 2, 1.0});
    REQUIRE(g1.points.size() == 4);
    std::set<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < g1.points.size(); ++i) pts.insert({g1.points.x(i)[0], g1.points.t(i)});
    CHECK(pts == std::set<std::pair<double, double>>{{0.0, 0.5}, {1.0, 0.5}, {0.0, 1.0}, {1.0, 1.0}});

    const auto g2 = tensor_grid(GridSpec{2, 2, 1, 2, 2, 1.0});
    CHECK(g2.m_tilde == 64);
    CHECK(g2.m_hat == 4);
    CHECK(g2.points.size() == 256);
}

TEST_CASE("tensor grid is time-major on the lattice and inside (0, T]") {
    const GridSpec spec{2, 1, 1, 3, 2, 2.0};
    const auto g = tensor_grid(spec);
    const double h = spec.h();
    for (std::size_t j = 0; j < g.m_hat; ++j) {
        CHECK(g.times[j] == doctest::Approx(spec.T * (j + 1) / g.m_hat).epsilon(1e-15));
        for (std::size_t i = 0; i < g.m_tilde; ++i) {
            const auto idx = g.index(i, j);
            CHECK(g.points.t(idx) == g.times[j]);
            for (double v : g.points.x(idx)) CHECK(std::abs(v / h - std::round(v / h)) < 1e-12);
        }
    }
    CHECK(std::is_sorted(g.times.begin(), g.times.end()));
    CHECK(g.times.front() > 0.0);
    CHECK(g.times.back() == doctest::Approx(spec.T));
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(tensor_grid(GridSpec{2, 0, 0, 1, 2, 1.0}), GridError);
    CHECK_THROWS_AS(tensor_grid(GridSpec{2, 0, 0, 2, 1, 1.0}), GridError);
    CHECK_THROWS_AS(tensor_grid(GridSpec{0, 0, 0, 2, 2, 1.0}), GridError);
    CHECK_THROWS_AS(tensor_grid(GridSpec{2, -1, 0, 2, 2, 1.0}), GridError);
    CHECK_THROWS_AS(tensor_grid(GridSpec{2, 0, 0, 2, 2, 0.0}), GridError);
}

TEST_CASE("boundary grid: corners once, nominal count and dedup") {
    const auto b = boundary_grid(GridSpec{2, 0, 0, 2, 2, 1.0});
    CHECK(b.m_bar == 4);
    CHECK(b.points.size() == 8);
    std::set<std::pair<double, double>> corners;
    for (std::size_t i = 0; i < b.m_bar; ++i) corners.insert({b.points.x(i)[0], b.points.x(i)[1]});
    CHECK(corners.size() == 4);

    const GridSpec nominal{2, 1, 0, 2, 2, 1.0};
    CHECK(nominal.nominal_boundary_count() == 32);
    CHECK(boundary_grid(nominal).nominal_count == 32);

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const GridSpec s{2 + static_cast<int>(rng() % 2), static_cast<int>(rng() % 3), static_cast<int>(rng() % 3),
                         2 + static_cast<int>(rng() % 2), 2 + static_cast<int>(rng() % 2), 1.0};
        const auto bg = boundary_grid(s);
        CHECK(bg.points.size() <= bg.nominal_count);
        const std::size_t n = s.distinct_per_axis();
        CHECK(bg.m_bar == ipow(n, s.d) - ipow(n - 2, s.d));
        std::set<std::vector<double>> seen;
        for (std::size_t i = 0; i < bg.points.size(); ++i) {
            CHECK(on_boundary(bg.points.x(i)));
            CHECK(bg.points.t(i) > 0.0);
            std::vector<double> key(bg.points.x(i).begin(), bg.points.x(i).end());
            key.push_back(bg.points.t(i));
            CHECK(seen.insert(key).second);
        }
    }
}

TEST_CASE("boundary sites are tensor sites restricted to the boundary") {
    const GridSpec spec{2, 1, 1, 3, 2, 1.0};
    const auto tg = tensor_grid(spec);
    const auto bg = boundary_grid(spec);
    auto key = [](std::span<const double> x, double t) {
        std::vector<long long> k;
        for (double v : x) k.push_back(std::llround(v * 1e12));
        k.push_back(std::llround(t * 1e12));
        return k;
    };
    std::set<std::vector<long long>> tensor_boundary;
    for (std::size_t i = 0; i < tg.points.size(); ++i)
        if (on_boundary(tg.points.x(i))) tensor_boundary.insert(key(tg.points.x(i), tg.points.t(i)));
    std::set<std::vector<long long>> boundary;
    for (std::size_t i = 0; i < bg.points.size(); ++i) boundary.insert(key(bg.points.x(i), bg.points.t(i)));
    CHECK(boundary == tensor_boundary);
}

TEST_CASE("initial grid examples") {
    const auto a = initial_grid(0, 2, 2);
    CHECK(a.points.size() == 4);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points.t(i) == 0.0);
        for (double v : a.points.x(i)) CHECK((v == 0.0 || v == 1.0));
    }
    CHECK(initial_grid(1, 2, 2).points.size() == 16);
    const auto c = initial_grid(0, 3, 1);
    REQUIRE(c.points.size() == 3);
    CHECK(c.points.x(0)[0] == 0.0);
    CHECK(c.points.x(1)[0] == 0.5);
    CHECK(c.points.x(2)[0] == 1.0);
}

TEST_CASE("grid counts match the closed forms for random specs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + static_cast<int>(rng() % 3);
        const GridSpec s{d, static_cast<int>(rng() % 3), static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 2),
                         2 + static_cast<int>(rng() % 3), 1.0};
        const std::size_t mt = ipow(static_cast<std::size_t>(s.r) << s.k, d);
        const std::size_t mh = static_cast<std::size_t>(s.rp) << s.kp;
        CHECK(tensor_grid(s).points.size() == mt * mh);
        CHECK(initial_grid(s.k, s.r, d).points.size() == mt);
        CHECK(s.nominal_boundary_count() ==
              2 * static_cast<std::size_t>(d) * ipow(static_cast<std::size_t>(s.r) << s.k, d - 1) * mh);
    }
}

TEST_CASE("uniform mesh counts") {
    const auto m = uniform_mesh(15, 2, 1.0);
    CHECK(m.interior.m_tilde == 225);
    CHECK(m.interior.m_hat == 15);
    CHECK(m.boundary.m_bar == 56);
    CHECK(m.initial.points.size() == 225);
    CHECK(m.interior.times.back() == doctest::Approx(1.0));
    CHECK_THROWS_AS(uniform_mesh(1, 2, 1.0), GridError);
}

TEST_CASE("Kuhn decomposition") {
    CHECK(kuhn_decompose({0}, 0, GridSpec{1, 0, 0, 2, 2, 1.0}).size() == 1);
    const auto tri = kuhn_decompose({0, 0}, 0, GridSpec{2, 0, 0, 2, 2, 1.0});
    REQUIRE(tri.size() == 2);
    for (const auto& c : tri) CHECK(c.volume() == doctest::Approx(0.5));
    const auto tets = kuhn_decompose({1, 0, 1}, 1, GridSpec{3, 1, 1, 2, 2, 1.0});
    REQUIRE(tets.size() == 6);
    for (const auto& c : tets) {
        CHECK(c.volume() == doctest::Approx(0.125 / 6.0).epsilon(1e-12));
        CHECK(c.t0 == doctest::Approx(0.5));
        CHECK(c.t1 == doctest::Approx(1.0));
    }
    const auto& perms = kuhn_permutations(3);
    CHECK(std::is_sorted(perms.begin(), perms.end()));
}

TEST_CASE("simplex volumes tile the box") {
    for (int d = 1; d <= 3; ++d) {
        const GridSpec spec{d, 1, 1, 2, 2, 2.0};
        double total = 0.0;
        const int n = spec.cubes_per_axis();
        std::vector<int> cube(d, 0);
        while (true) {
            for (int it = 0; it < spec.intervals(); ++it)
                for (const auto& c : kuhn_decompose(cube, it, spec)) total += c.volume() * (c.t1 - c.t0);
            int a = d - 1;
            while (a >= 0 && ++cube[a] == n) cube[a--] = 0;
            if (a < 0) break;
        }
        CHECK(total == doctest::Approx(spec.T).epsilon(1e-12));
    }
}

TEST_CASE("locate examples and tie-breaks") {
    const GridSpec spec{2, 0, 0, 2, 2, 1.0};
    const std::vector<double> low{0.1, 0.1};
    const auto c = locate(low, 0.1, spec);
    CHECK(c.cube == std::vector<int>{0, 0});
    CHECK(c.perm_id == 1);

    const std::vector<double> below{0.2, 0.7};
    CHECK(locate(below, 0.5, spec).perm_id == 2);

    // On the diagonal both triangles contain the point: the smaller id wins.
    const std::vector<double> diag{0.4, 0.4};
    CHECK(locate(diag, 0.5, spec).perm_id == 1);

    // On the facet x_1 = 1/2 between two cubes the smaller cube index wins.
    const GridSpec fine{2, 1, 1, 2, 2, 1.0};
    const std::vector<double> facet{0.5, 0.2};
    CHECK(locate(facet, 0.3, fine).cube == std::vector<int>{0, 0});

    // The closed top faces belong to the last cube and interval.
    const std::vector<double> top{1.0, 1.0};
    const auto last = locate(top, 1.0, fine);
    CHECK(last.cube == std::vector<int>{1, 1});
    CHECK(last.interval == 1);

    const std::vector<double> outside{1.5, 0.2};
    CHECK_THROWS_AS(locate(outside, 0.5, spec), GridError);
    CHECK_THROWS_AS(locate(low, 1.5, spec), GridError);
}

TEST_CASE("located cells contain the point") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d = 1; d <= 3; ++d) {
        const GridSpec spec{d, 2, 1, 2, 2, 1.0};
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(d);
            for (double& v : x) v = u(rng);
            const double t = u(rng);
            const auto cell = locate(x, t, spec);
            for (double b : cell.barycentric(x)) CHECK(b >= -1e-12);
            CHECK(t >= cell.t0 - 1e-12);
            CHECK(t <= cell.t1 + 1e-12);
        }
    }
}

TEST_CASE("every grid point is a vertex of its located cell") {
    const GridSpec spec{2, 1, 1, 2, 2, 1.0};
    const auto g = tensor_grid(spec);
    for (std::size_t i = 0; i < g.points.size(); ++i) {
        const auto x = g.points.x(i);
        const auto cell = locate(x, g.points.t(i), spec);
        bool vertex = false;
        for (const auto& v : cell.vertices)
            vertex = vertex || (std::abs(v[0] - x[0]) < 1e-12 && std::abs(v[1] - x[1]) < 1e-12);
        CHECK(vertex);
    }
}

}  // TEST_SUITE
