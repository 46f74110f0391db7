#include "cpinn/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

using namespace cpinn;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

struct Globals {
    std::uint64_t seed = 1;
    bool seed_set = false;
    std::string out;
    std::string config;
    int threads = 1;
};

// Writes to --out when given, stdout otherwise.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::invalid_argument("cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

double parse_index(const std::string& v) {
    if (v == "inf" || v == "infinity") return kInfinity;
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("bad index: " + v);
    return out;
}

TrainConfig load_config(const std::string& problem, const Globals& g) {
    TrainConfig cfg = default_config(problem);
    if (!g.config.empty()) apply_overrides(cfg, read_key_values(g.config));
    if (g.seed_set) cfg.seed = g.seed;
    return cfg;
}

nlohmann::json report_json(const RunReport& r) {
    nlohmann::json j;
    j["problem"] = r.problem;
    j["loss"] = to_string(r.loss);
    j["N"] = r.mesh;
    j["seed"] = r.seed;
    j["iterations"] = r.iterations;
    j["initial_loss"] = r.initial_loss;
    j["final_loss"] = r.final_loss;
    j["final_pinn_loss"] = r.final_pinn_loss;
    j["final_cpinn_loss"] = r.final_cpinn_loss;
    j["rel_l2_percent"] = r.rel_l2_percent;
    j["wall_seconds"] = r.wall_seconds;
    nlohmann::json h = nlohmann::json::array();
    for (const auto& [it, v] : r.history) h.push_back({{"iteration", it}, {"loss", v}});
    j["history"] = h;
    return j;
}

void write_report_csv(std::ostream& os, const RunReport& r) {
    os.precision(10);
    os << "problem,loss,N,seed,iterations,initial_loss,final_loss,final_pinn_loss,final_cpinn_loss,rel_l2_percent\n";
    os << r.problem << ',' << to_string(r.loss) << ',' << r.mesh << ',' << r.seed << ',' << r.iterations << ','
       << r.initial_loss << ',' << r.final_loss << ',' << r.final_pinn_loss << ',' << r.final_cpinn_loss << ','
       << r.rel_l2_percent << "\n\niteration,loss\n";
    for (const auto& [it, v] : r.history) os << it << ',' << v << '\n';
}

void dump_header(std::ostream& os, int d) {
    os << "site_class";
    for (int a = 0; a < d; ++a) os << ",x" << (a + 1);
    os << ",t\n";
}

void dump_sites(std::ostream& os, const char* site_class, const SiteSet& s) {
    os.precision(17);
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << site_class;
        for (double v : s.x(i)) os << ',' << v;
        os << ',' << s.t(i) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consistent physics-informed training for the heat equation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
    app.add_option("--out", g.out, "Output file (stdout when omitted)");
    app.add_option("--config", g.config, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--threads", g.threads, "Worker threads for linear algebra")->check(CLI::PositiveNumber);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one network and report errors and losses");
    std::string problem = "u1", loss = "cpinn", save_path, json_path;
    std::optional<int> mesh, iterations, width, depth;
    std::optional<double> step, gamma;
    train_cmd->add_option("--problem", problem, "u1 or u2");
    train_cmd->add_option("--loss", loss, "pinn or cpinn");
    train_cmd->add_option("--mesh,-N", mesh, "Mesh size per axis");
    train_cmd->add_option("--iterations", iterations, "Gradient steps");
    train_cmd->add_option("--width", width, "Hidden width");
    train_cmd->add_option("--depth", depth, "Hidden layers");
    train_cmd->add_option("--step", step, "Step size");
    train_cmd->add_option("--gamma", gamma, "Interior exponent override");
    train_cmd->add_option("--save", save_path, "Write a checkpoint");
    train_cmd->add_option("--json", json_path, "Also write the report as JSON");

    // reproduce-table1
    auto* table_cmd = app.add_subcommand("reproduce-table1", "PINN vs CPINN errors over mesh sizes and seeds");
    std::vector<int> meshes{5, 10, 15, 20, 25, 30};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::optional<int> table_iterations;
    table_cmd->add_option("--problem", problem, "u1 or u2");
    table_cmd->add_option("--meshes", meshes, "Mesh sizes")->delimiter(',');
    table_cmd->add_option("--seeds", seeds, "Seeds")->delimiter(',');
    table_cmd->add_option("--iterations", table_iterations, "Gradient steps per run");

    // figure1
    auto* fig_cmd = app.add_subcommand("figure1", "Heatmap grids of exact, PINN and CPINN solutions");
    std::string pinn_ckpt, cpinn_ckpt;
    std::vector<double> times{0.0, 0.5, 1.0};
    int res = 50;
    std::optional<int> fig_iterations;
    fig_cmd->add_option("--problem", problem, "u1 or u2");
    fig_cmd->add_option("--pinn", pinn_ckpt, "PINN checkpoint (trained when omitted)");
    fig_cmd->add_option("--cpinn", cpinn_ckpt, "CPINN checkpoint (trained when omitted)");
    fig_cmd->add_option("--times", times, "Time slices")->delimiter(',');
    fig_cmd->add_option("--res", res, "Grid points per axis");
    fig_cmd->add_option("--iterations", fig_iterations, "Gradient steps when training");

    // rates
    auto* rates_cmd = app.add_subcommand("rates", "Interpolation and recovery rate studies");
    rates_cmd->require_subcommand(1);
    auto* interp_cmd = rates_cmd->add_subcommand("interp", "Interpolation error over a level sweep");
    std::string fname = "sinprod", norm = "c";
    int r = 2, rp = 2, kmin = 1, kmax = 5, d = 2;
    interp_cmd->add_option("--f", fname, "sinprod, kink or cospoly");
    interp_cmd->add_option("--r", r, "Spatial order");
    interp_cmd->add_option("--rp", rp, "Temporal order");
    interp_cmd->add_option("--norm", norm, "c, l2l2 or l2h1");
    interp_cmd->add_option("--kmin", kmin, "First level");
    interp_cmd->add_option("--kmax", kmax, "Last level");
    interp_cmd->add_option("--d", d, "Spatial dimension");
    auto* recovery_cmd = rates_cmd->add_subcommand("recovery", "Recovery rates on power and bump fixtures");
    std::string s_idx = "2", theta_idx = "2", p_idx = "inf", pp_idx = "inf";
    recovery_cmd->add_option("--s", s_idx, "Spatial smoothness");
    recovery_cmd->add_option("--theta", theta_idx, "Temporal smoothness");
    recovery_cmd->add_option("--p", p_idx, "Spatial integrability (inf allowed)");
    recovery_cmd->add_option("--pp", pp_idx, "Temporal integrability (inf allowed)");
    recovery_cmd->add_option("--norm", norm, "c or l2l2");
    recovery_cmd->add_option("--kmax", kmax, "Last level");
    recovery_cmd->add_option("--d", d, "Spatial dimension");

    // norm-check
    auto* norm_cmd = app.add_subcommand("norm-check", "Discrete norms against quadrature across levels");
    int ref_res = 64;
    int nk_min = 2, nk_max = 5;
    std::string which = "h1214";
    norm_cmd->add_option("--which", which, "mixed, h12, h14, h1214 or init");
    norm_cmd->add_option("--kmin", nk_min, "First level");
    norm_cmd->add_option("--kmax", nk_max, "Last level");
    norm_cmd->add_option("--reference-res", ref_res, "Quadrature resolution of the interior reference");

    // grid dump
    auto* grid_cmd = app.add_subcommand("grid", "Site grids");
    grid_cmd->require_subcommand(1);
    auto* dump_cmd = grid_cmd->add_subcommand("dump", "Write the sites of one grid family as CSV");
    std::string kind = "all";
    GridSpec spec;
    int n_mesh = 0;
    dump_cmd->add_option("--kind", kind, "all, interior, boundary or initial");
    dump_cmd->add_option("--d", spec.d, "Spatial dimension");
    dump_cmd->add_option("--k", spec.k, "Spatial level");
    dump_cmd->add_option("--kp", spec.kp, "Temporal level");
    dump_cmd->add_option("--r", spec.r, "Spatial points per cube axis");
    dump_cmd->add_option("--rp", spec.rp, "Temporal points per interval");
    dump_cmd->add_option("--T", spec.T, "Final time");
    dump_cmd->add_option("--N", n_mesh, "Uniform N x N mesh with N time levels instead of the dyadic lattice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        Eigen::setNbThreads(g.threads);
        Output out(g.out);
        std::ostream& os = out.stream();

        if (*train_cmd) {
            TrainConfig cfg = load_config(problem, g);
            cfg.loss = parse_loss_kind(loss);
            if (mesh) cfg.mesh = *mesh;
            if (iterations) cfg.iterations = *iterations;
            if (width) cfg.width = *width;
            if (depth) cfg.depth = *depth;
            if (step) cfg.step = *step;
            if (gamma) cfg.gamma = *gamma;
            const auto result = train(manufactured(problem), cfg);
            write_report_csv(os, result.report);
            if (!save_path.empty()) result.net.save(save_path);
            if (!json_path.empty()) {
                std::ofstream js(json_path);
                if (!js) throw std::invalid_argument("cannot open " + json_path);
                js << report_json(result.report).dump(2) << '\n';
            }
        } else if (*table_cmd) {
            TrainConfig cfg = load_config(problem, g);
            if (table_iterations) cfg.iterations = *table_iterations;
            const auto table = reproduce_table1(problem, meshes, seeds, cfg, [](const Table1Cell& c) {
                std::cerr << "N=" << c.mesh << " seed=" << c.seed << " pinn=" << c.pinn.rel_l2_percent
                          << "% cpinn=" << c.cpinn.rel_l2_percent << "%\n";
            });
            write_table1_csv(os, problem, table);
        } else if (*fig_cmd) {
            const ManufacturedProblem prob = manufactured(problem);
            TrainConfig cfg = load_config(problem, g);
            if (fig_iterations) cfg.iterations = *fig_iterations;
            auto obtain = [&](const std::string& path, LossKind kind) {
                if (!path.empty()) return MlpNetwork::load(path);
                TrainConfig c = cfg;
                c.loss = kind;
                return train(prob, c).net;
            };
            const MlpNetwork pinn = obtain(pinn_ckpt, LossKind::Pinn);
            const MlpNetwork cpinn = obtain(cpinn_ckpt, LossKind::Cpinn);
            write_figure1_csv(os, figure1_data(&pinn, &cpinn, prob, times, res));
        } else if (*interp_cmd) {
            const auto fn = named_function(fname, d);
            const auto result = interpolation_rate_study(fn, d, r, rp, parse_norm_id(norm), kmin, kmax);
            os.precision(10);
            os << "k,k',error,fitted_slope,predicted_slope\n";
            for (const auto& row : result.rows)
                os << row.k << ',' << row.kp << ',' << row.error << ',' << result.fitted_slope << ','
                   << result.predicted_slope << '\n';
            if (!result.hypothesis_ok) std::cerr << "warning: the function class violates the rate hypotheses\n";
        } else if (*recovery_cmd) {
            BesovClass cls;
            cls.s = parse_index(s_idx);
            cls.theta = parse_index(theta_idx);
            cls.p = parse_index(p_idx);
            cls.pp = parse_index(pp_idx);
            const auto rows = rate_study_recovery(cls, parse_norm_id(norm), kmax, d);
            os.precision(10);
            os << "fixture,k,k',error,fitted_slope,predicted_slope\n";
            for (const auto& row : rows)
                os << row.fixture << ',' << row.k << ',' << row.kp << ',' << row.error << ',' << row.fitted_slope
                   << ',' << row.predicted_slope << '\n';
        } else if (*norm_cmd) {
            os.precision(12);
            os << "k,k',discrete,quadrature,ratio\n";
            for (const auto& row : norm_check(which, nk_min, nk_max, ref_res))
                os << row.k << ',' << row.kp << ',' << row.discrete << ',' << row.quadrature << ',' << row.ratio()
                   << '\n';
        } else if (*dump_cmd) {
            const bool all = kind == "all";
            if (!all && kind != "interior" && kind != "boundary" && kind != "initial")
                throw std::invalid_argument("unknown site class: " + kind);
            dump_header(os, spec.d);
            if (n_mesh > 0) {
                const MeshGrids m = uniform_mesh(n_mesh, spec.d, spec.T);
                if (all || kind == "interior") dump_sites(os, "interior", m.interior.points);
                if (all || kind == "boundary") dump_sites(os, "boundary", m.boundary.points);
                if (all || kind == "initial") dump_sites(os, "initial", m.initial.points);
            } else {
                if (all || kind == "interior") dump_sites(os, "interior", tensor_grid(spec).points);
                if (all || kind == "boundary") dump_sites(os, "boundary", boundary_grid(spec).points);
                if (all || kind == "initial") {
                    spec.validate();
                    dump_sites(os, "initial", initial_grid(spec.k, spec.r, spec.d).points);
                }
            }
        }
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
