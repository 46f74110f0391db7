#include "cpinn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace cpinn {

using std::numbers::pi;

ManufacturedProblem manufactured(const std::string& name) {
    ManufacturedProblem p;
    p.name = name;
    if (name == "u1") {
        p.u.value = [](std::span<const double> x, double t) {
            return x[0] * x[1] * (1.0 - x[0]) * (1.0 - x[1]) * std::exp(-t);
        };
        p.u.jet = [](std::span<const double> x, double t) {
            const double e = std::exp(-t);
            const double px = x[0] * (1.0 - x[0]);
            const double qy = x[1] * (1.0 - x[1]);
            Jet j;
            j.value = px * qy * e;
            j.grad_x = Eigen::Vector2d((1.0 - 2.0 * x[0]) * qy * e, px * (1.0 - 2.0 * x[1]) * e);
            j.dt = -j.value;
            j.hess_x.resize(2, 2);
            j.hess_x << -2.0 * qy * e, (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]) * e,
                (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]) * e, -2.0 * px * e;
            j.laplacian = j.hess_x.trace();
            return j;
        };
        p.f = [](std::span<const double> x, double t) {
            const double px = x[0] * (1.0 - x[0]);
            const double qy = x[1] * (1.0 - x[1]);
            const double e = std::exp(-t);
            return -px * qy * e + 2.0 * e * (px + qy);
        };
        p.g = [](std::span<const double>, double) { return 0.0; };
        p.u0 = [](std::span<const double> x) { return x[0] * x[1] * (1.0 - x[0]) * (1.0 - x[1]); };
    } else if (name == "u2") {
        p.u.value = [](std::span<const double> x, double t) {
            return std::sin(pi * x[0]) * std::cos(pi * x[1]) + std::exp(-t);
        };
        p.u.jet = [](std::span<const double> x, double t) {
            const double sx = std::sin(pi * x[0]), cx = std::cos(pi * x[0]);
            const double sy = std::sin(pi * x[1]), cy = std::cos(pi * x[1]);
            Jet j;
            j.value = sx * cy + std::exp(-t);
            j.grad_x = Eigen::Vector2d(pi * cx * cy, -pi * sx * sy);
            j.dt = -std::exp(-t);
            j.hess_x.resize(2, 2);
            j.hess_x << -pi * pi * sx * cy, -pi * pi * cx * sy, -pi * pi * cx * sy, -pi * pi * sx * cy;
            j.laplacian = j.hess_x.trace();
            return j;
        };
        p.f = [](std::span<const double> x, double t) {
            return -std::exp(-t) + 2.0 * pi * pi * std::sin(pi * x[0]) * std::cos(pi * x[1]);
        };
        p.g = p.u.value;
        p.u0 = [](std::span<const double> x) { return std::sin(pi * x[0]) * std::cos(pi * x[1]) + 1.0; };
    } else {
        throw std::invalid_argument("unknown problem: " + name);
    }
    return p;
}

ProblemData mesh_problem(const ManufacturedProblem& problem, int mesh, double T) {
    MeshGrids grids = uniform_mesh(mesh, 2, T);
    return sample_problem(std::move(grids.interior), std::move(grids.boundary), std::move(grids.initial), problem.f,
                          problem.g, problem.u0, problem.u);
}

TrainConfig default_config(const std::string& problem) {
    TrainConfig cfg;
    if (problem == "u2") {
        cfg.width = 100;
        cfg.depth = 8;
    } else if (problem != "u1") {
        throw std::invalid_argument("unknown problem: " + problem);
    }
    return cfg;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw std::invalid_argument("config: bad number for " + key + ": " + v);
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_overrides(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "loss") cfg.loss = parse_loss_kind(value);
        else if (key == "mesh" || key == "N") cfg.mesh = static_cast<int>(parse_int(key, value));
        else if (key == "width" || key == "W") cfg.width = static_cast<int>(parse_int(key, value));
        else if (key == "depth" || key == "L") cfg.depth = static_cast<int>(parse_int(key, value));
        else if (key == "step") cfg.step = parse_double(key, value);
        else if (key == "momentum") cfg.momentum = parse_double(key, value);
        else if (key == "iterations") cfg.iterations = static_cast<int>(parse_int(key, value));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "gamma") cfg.gamma = parse_double(key, value);
        else if (key == "skip") cfg.skip = parse_bool(key, value);
        else if (key == "rescale_velocity") cfg.rescale_velocity = parse_bool(key, value);
        else if (key == "history_every") cfg.history_every = static_cast<int>(parse_int(key, value));
        else if (key == "T") cfg.T = parse_double(key, value);
        else if (key == "divergence_limit") cfg.divergence_limit = parse_double(key, value);
        else throw std::invalid_argument("config: unknown key " + key);
    }
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

namespace {

template <typename Fn>
void for_each_midpoint(int d, double T, int res, Fn&& fn) {
    std::vector<double> x(d);
    std::vector<int> idx(d);
    for (int j = 0; j < res; ++j) {
        const double t = T * (j + 0.5) / res;
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int a = 0; a < d; ++a) x[a] = (idx[a] + 0.5) / res;
            fn(std::span<const double>(x), t);
            int a = d - 1;
            while (a >= 0 && ++idx[a] == res) idx[a--] = 0;
            if (a < 0) break;
        }
    }
}

}  // namespace

double relative_l2_error(const Field& v, const Field& u, int d, double T, int res) {
    if (res < 1) throw std::invalid_argument("relative_l2_error: res must be >= 1");
    double num = 0.0, den = 0.0;
    for_each_midpoint(d, T, res, [&](std::span<const double> x, double t) {
        const double uv = u.value(x, t);
        const double e = v.value(x, t) - uv;
        num += e * e;
        den += uv * uv;
    });
    if (den == 0.0) throw std::invalid_argument("relative_l2_error: reference field vanishes");
    return 100.0 * std::sqrt(num / den);
}

double relative_l2_error(const MlpNetwork& net, const ManufacturedProblem& problem, double T, int res) {
    if (res < 1) throw std::invalid_argument("relative_l2_error: res must be >= 1");
    const int d = net.shape().d;
    std::size_t count = static_cast<std::size_t>(res);
    for (int a = 0; a < d; ++a) count *= static_cast<std::size_t>(res);
    Eigen::MatrixXd inputs(d + 1, static_cast<Eigen::Index>(count));
    std::vector<double> exact;
    exact.reserve(count);
    Eigen::Index col = 0;
    for_each_midpoint(d, T, res, [&](std::span<const double> x, double t) {
        for (int a = 0; a < d; ++a) inputs(a, col) = x[a];
        inputs(d, col) = t;
        exact.push_back(problem.u.value(x, t));
        ++col;
    });
    const JetBatch out = net.evaluate(inputs, JetOrder::Value);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double e = out.value(static_cast<Eigen::Index>(i)) - exact[i];
        num += e * e;
        den += exact[i] * exact[i];
    }
    if (den == 0.0) throw std::invalid_argument("relative_l2_error: reference field vanishes");
    return 100.0 * std::sqrt(num / den);
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Table1 reproduce_table1(const std::string& problem, const std::vector<int>& meshes,
                        const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                        const std::function<void(const Table1Cell&)>& on_cell) {
    if (meshes.empty() || seeds.empty()) throw std::invalid_argument("table1: need at least one mesh and one seed");
    const ManufacturedProblem prob = manufactured(problem);
    Table1 table;
    for (int mesh : meshes) {
        std::vector<double> ep, ec, lp, lc;
        for (std::uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.mesh = mesh;
            cfg.seed = seed;
            Table1Cell cell;
            cell.mesh = mesh;
            cell.seed = seed;
            cfg.loss = LossKind::Pinn;
            cell.pinn = train(prob, cfg).report;
            cfg.loss = LossKind::Cpinn;
            cell.cpinn = train(prob, cfg).report;
            ep.push_back(cell.pinn.rel_l2_percent);
            ec.push_back(cell.cpinn.rel_l2_percent);
            lp.push_back(cell.pinn.final_loss);
            lc.push_back(cell.cpinn.final_loss);
            if (on_cell) on_cell(cell);
            table.cells.push_back(std::move(cell));
        }
        table.summary.push_back({mesh, median(ep), median(ec), median(lp), median(lc)});
    }
    return table;
}

void write_table1_csv(std::ostream& os, const std::string& problem, const Table1& table) {
    os.precision(10);
    os << "problem,N,seed,pinn_rel_err_pct,cpinn_rel_err_pct,pinn_final_loss,cpinn_final_loss\n";
    for (const auto& c : table.cells)
        os << problem << ',' << c.mesh << ',' << c.seed << ',' << c.pinn.rel_l2_percent << ','
           << c.cpinn.rel_l2_percent << ',' << c.pinn.final_loss << ',' << c.cpinn.final_loss << '\n';
    os << '\n';
    os << "problem,N,median_pinn_rel_err_pct,median_cpinn_rel_err_pct,ratio,median_pinn_loss,median_cpinn_loss\n";
    for (const auto& s : table.summary)
        os << problem << ',' << s.mesh << ',' << s.median_err_pinn << ',' << s.median_err_cpinn << ',' << s.ratio()
           << ',' << s.median_loss_pinn << ',' << s.median_loss_cpinn << '\n';
}

std::vector<HeatmapGrid> figure1_data(const MlpNetwork* pinn, const MlpNetwork* cpinn,
                                      const ManufacturedProblem& problem, const std::vector<double>& times, int res) {
    if (res < 2) throw std::invalid_argument("figure1: res must be >= 2");
    std::vector<HeatmapGrid> out;
    auto grid = [&](const std::string& source, double t, const auto& fn) {
        HeatmapGrid g{source, t, res, {}};
        g.values.reserve(static_cast<std::size_t>(res) * res);
        double x[2];
        for (int iy = 0; iy < res; ++iy) {
            for (int ix = 0; ix < res; ++ix) {
                x[0] = static_cast<double>(ix) / (res - 1);
                x[1] = static_cast<double>(iy) / (res - 1);
                g.values.push_back(fn(std::span<const double>(x, 2), t));
            }
        }
        out.push_back(std::move(g));
    };
    for (double t : times) {
        grid("exact", t, problem.u.value);
        if (pinn) grid("pinn", t, [&](std::span<const double> x, double tt) { return pinn->forward(x, tt); });
        if (cpinn) grid("cpinn", t, [&](std::span<const double> x, double tt) { return cpinn->forward(x, tt); });
    }
    return out;
}

void write_figure1_csv(std::ostream& os, const std::vector<HeatmapGrid>& grids) {
    os.precision(10);
    os << "source,t,x,y,value\n";
    for (const auto& g : grids)
        for (int iy = 0; iy < g.res; ++iy)
            for (int ix = 0; ix < g.res; ++ix)
                os << g.source << ',' << g.t << ',' << static_cast<double>(ix) / (g.res - 1) << ','
                   << static_cast<double>(iy) / (g.res - 1) << ','
                   << g.values[static_cast<std::size_t>(iy) * g.res + ix] << '\n';
}

namespace {

// max |f - S| over a lattice of n points per axis covering a box.
double box_sup_error(const SpaceTimeFn& f, const Interpolant& s, std::span<const double> lo, double side,
                     double t0, double duration, int n) {
    const int d = static_cast<int>(lo.size());
    std::vector<double> x(d);
    std::vector<int> idx(d);
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        const double t = t0 + duration * j / (n - 1);
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int a = 0; a < d; ++a) x[a] = lo[a] + side * idx[a] / (n - 1);
            worst = std::max(worst, std::abs(f(x, t) - s(x, t)));
            int a = d - 1;
            while (a >= 0 && ++idx[a] == n) idx[a--] = 0;
            if (a < 0) break;
        }
    }
    return worst;
}

void append_sweep(std::vector<RecoveryRow>& rows, const std::string& fixture,
                  const std::vector<std::pair<int, int>>& levels, const std::vector<double>& errors,
                  std::size_t fit_count, double predicted) {
    const std::vector<std::pair<int, int>> fit_levels(levels.begin(), levels.begin() + fit_count);
    const std::vector<double> fit_errors(errors.begin(), errors.begin() + fit_count);
    const double slope = rate_fit(fit_levels, fit_errors).fitted_slope;
    for (std::size_t i = 0; i < levels.size(); ++i)
        rows.push_back({fixture, levels[i].first, levels[i].second, errors[i], slope, predicted});
}

}  // namespace

std::vector<RecoveryRow> rate_study_recovery(const BesovClass& cls, NormId norm, int kmax, int d) {
    if (kmax < 3) throw std::invalid_argument("rate study: kmax must be >= 3");
    if (norm != NormId::C && norm != NormId::Ltau)
        throw std::invalid_argument("rate study: norm must be c or l2l2");
    const Exponents e = predicted_exponents(cls, norm, d);
    const double T = 1.0;
    std::vector<RecoveryRow> rows;

    // Power fixture |x_1 - 1/3|^s + |t - 1/3|^theta, interpolated with enough degree to see s and theta.
    {
        const int r = std::max(2, static_cast<int>(std::ceil(cls.s)));
        const int rp = std::max(2, static_cast<int>(std::ceil(cls.theta)));
        const SpaceTimeFn fn = [&cls](std::span<const double> x, double t) {
            return std::pow(std::abs(x[0] - 1.0 / 3.0), cls.s) + std::pow(std::abs(t - 1.0 / 3.0), cls.theta);
        };
        std::vector<std::pair<int, int>> levels;
        std::vector<double> errors;
        for (int k = 1; k <= kmax; ++k) {
            const auto s = Interpolant::build(fn, GridSpec{d, k, k, r, rp, T});
            const double err = norm == NormId::C
                                   ? sup_error(fn, s, ((r - 1) << k) * 2 + 1)
                                   : mixed_norm_error(fn, s, 2.0, 2.0, std::max(2, 32 >> k));
            levels.emplace_back(k, k);
            errors.push_back(err);
        }
        append_sweep(rows, "power", levels, errors, levels.size(), -std::min(d * e.alpha, e.beta));
    }

    // Bump at a fixed level-3 cell: no interior nodes until the grid is finer than the cell.
    {
        const double side = 0.125;
        const std::vector<double> origin(d, 3.0 * side);
        const Bump b = bump(origin, side, 0.25 * T, 0.5 * T, cls);
        const SpaceTimeFn fn = [&b](std::span<const double> x, double t) { return b(x, t); };
        std::vector<std::pair<int, int>> levels;
        std::vector<double> errors;
        for (int k = 1; k <= kmax; ++k) {
            const auto s = Interpolant::build(fn, GridSpec{d, k, k, 2, 2, T});
            levels.emplace_back(k, k);
            errors.push_back(box_sup_error(fn, s, origin, side, b.t0, b.duration, 33));
        }
        append_sweep(rows, "bump_fixed", levels, errors, std::min<std::size_t>(3, levels.size()), 0.0);
    }

    // Bump filling one cell of the current grid: invisible at every level, so the
    // error is its sup norm and decays like the spatial scaling factor.
    if (norm == NormId::C) {
        std::vector<std::pair<int, int>> levels;
        std::vector<double> errors;
        for (int k = 1; k <= kmax; ++k) {
            const double side = std::ldexp(1.0, -k);
            const std::vector<double> origin(d, side * ((1 << k) / 2));
            const Bump b = bump(origin, side, 0.25 * T, 0.5 * T, cls);
            const SpaceTimeFn fn = [&b](std::span<const double> x, double t) { return b(x, t); };
            const auto s = Interpolant::build(fn, GridSpec{d, k, 0, 2, 2, T});
            levels.emplace_back(k, 0);
            errors.push_back(box_sup_error(fn, s, origin, side, b.t0, b.duration, 33));
        }
        append_sweep(rows, "bump_level", levels, errors, levels.size(), -d * e.alpha);
    }
    return rows;
}

}  // namespace cpinn

namespace cpinn {

std::vector<NormCheckRow> norm_check(const std::string& which, int kmin, int kmax, int reference_res) {
    if (kmin < 0 || kmax < kmin) throw std::invalid_argument("norm check: need 0 <= kmin <= kmax");
    const SpaceTimeFn interior = [](std::span<const double> x, double t) {
        return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(t);
    };
    const SpaceTimeFn initial = [](std::span<const double> x, double) {
        return std::sin(pi * x[0]) * std::sin(pi * x[1]);
    };
    const SpaceTimeFn trace = [](std::span<const double> x, double t) {
        return std::sin(pi * x[0]) * std::cos(pi * x[1]) * std::exp(-t);
    };
    std::vector<NormCheckRow> rows;
    for (int k = kmin; k <= kmax; ++k) {
        const GridSpec spec{2, k, k, 2, 2, 1.0};
        NormCheckRow row;
        row.k = k;
        row.kp = k;
        if (which == "mixed") {
            const TensorGrid tg = tensor_grid(spec);
            std::vector<double> v(tg.points.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = interior(tg.points.x(i), tg.points.t(i));
            row.discrete = discrete_mixed(tg, v, 2.0);
            row.quadrature = quad_mixed(interior, 2, 1.0, 2.0, 2.0, reference_res);
        } else if (which == "init") {
            const InitialGrid ig = initial_grid(spec.k, spec.r, spec.d);
            std::vector<double> v(ig.points.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = initial(ig.points.x(i), 0.0);
            row.discrete = discrete_initial_l2(ig, v);
            row.quadrature = quad_mixed(initial, 2, 1.0, 2.0, 2.0, reference_res);
        } else {
            const BoundaryGrid bg = boundary_grid(spec);
            std::vector<double> g(bg.points.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = trace(bg.points.x(i), bg.points.t(i));
            const int res = static_cast<int>(spec.m_hat());
            if (which == "h12") {
                row.discrete = discrete_h12_seminorm(bg, g);
                row.quadrature = quad_h12_seminorm(trace, 2, 1.0, res);
            } else if (which == "h14") {
                row.discrete = discrete_h14_seminorm(bg, g);
                row.quadrature = quad_h14_seminorm(trace, 2, 1.0, res);
            } else if (which == "h1214") {
                row.discrete = discrete_h1214_norm(bg, g);
                row.quadrature = quad_h1214_norm(trace, 2, 1.0, res);
            } else {
                throw std::invalid_argument("norm check: unknown norm " + which);
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace cpinn
