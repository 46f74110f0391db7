#include "cpinn/polyinterp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <tuple>

namespace cpinn {

namespace {

double ipow_real(double base, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= base;
    return out;
}

// All multi-indices of length d with entries in [0, max] and |a| <= total, lexicographic.
void enumerate_indices(int d, int max_entry, int total, std::vector<int>& current,
                       std::vector<std::vector<int>>& out) {
    if (static_cast<int>(current.size()) == d) {
        out.push_back(current);
        return;
    }
    const int used = std::accumulate(current.begin(), current.end(), 0);
    for (int v = 0; v <= max_entry && used + v <= total; ++v) {
        current.push_back(v);
        enumerate_indices(d, max_entry, total, current, out);
        current.pop_back();
    }
}

Eigen::VectorXd monomials(const std::vector<std::vector<int>>& exps, std::span<const double> y) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(exps.size()));
    for (std::size_t i = 0; i < exps.size(); ++i) {
        double v = 1.0;
        for (std::size_t a = 0; a < exps[i].size(); ++a) v *= ipow_real(y[a], exps[i][a]);
        m(static_cast<Eigen::Index>(i)) = v;
    }
    return m;
}

Eigen::MatrixXd monomial_grads(const std::vector<std::vector<int>>& exps, std::span<const double> y) {
    const int d = static_cast<int>(y.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(exps.size()));
    for (std::size_t i = 0; i < exps.size(); ++i) {
        for (int b = 0; b < d; ++b) {
            if (exps[i][b] == 0) continue;
            double v = exps[i][b] * ipow_real(y[b], exps[i][b] - 1);
            for (int a = 0; a < d; ++a)
                if (a != b) v *= ipow_real(y[a], exps[i][a]);
            g(b, static_cast<Eigen::Index>(i)) = v;
        }
    }
    return g;
}

Eigen::VectorXd powers(double tau, int n) {
    Eigen::VectorXd p(n);
    double v = 1.0;
    for (int i = 0; i < n; ++i) {
        p(i) = v;
        v *= tau;
    }
    return p;
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& v, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
    if (!lu.isInvertible()) throw InterpolationError(std::string("singular Vandermonde matrix: ") + what);
    return lu.inverse();
}

ReferenceElement make_reference(int d, int r, int rp) {
    if (d < 1) throw InterpolationError("reference element: d must be >= 1");
    if (r < 2 || rp < 2) throw InterpolationError("reference element: r and r' must be >= 2");
    ReferenceElement ref;
    ref.d = d;
    ref.r = r;
    ref.rp = rp;
    std::vector<int> cur;
    enumerate_indices(d, r - 1, r - 1, cur, ref.exponents);

    std::vector<std::vector<int>> lattice;
    cur.clear();
    enumerate_indices(d, r - 1, d * (r - 1), cur, lattice);
    const auto& perms = kuhn_permutations(d);
    for (const auto& perm : perms) {
        std::vector<std::vector<int>> nodes;
        for (const auto& g : lattice) {
            bool inside = true;
            for (int a = 0; a + 1 < d; ++a) inside = inside && g[perm[a]] >= g[perm[a + 1]];
            if (inside) nodes.push_back(g);
        }
        if (nodes.size() != ref.exponents.size())
            throw InterpolationError("reference element: node count does not match the polynomial space");
        const auto n = static_cast<Eigen::Index>(nodes.size());
        Eigen::MatrixXd v(n, n);
        std::vector<double> y(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) y[a] = static_cast<double>(nodes[i][a]) / (r - 1);
            v.row(i) = monomials(ref.exponents, y).transpose();
        }
        ref.space_inverse.push_back(checked_inverse(v, "space"));
        ref.space_nodes.push_back(std::move(nodes));
    }
    Eigen::MatrixXd vt(rp, rp);
    for (int j = 0; j < rp; ++j) vt.row(j) = powers(static_cast<double>(j) / (rp - 1), rp).transpose();
    ref.time_inverse = checked_inverse(vt, "time");
    return ref;
}

}  // namespace

Eigen::VectorXd ReferenceElement::space_basis(int perm_index, std::span<const double> y) const {
    return space_inverse[perm_index].transpose() * monomials(exponents, y);
}

Eigen::MatrixXd ReferenceElement::space_basis_grad(int perm_index, std::span<const double> y) const {
    return monomial_grads(exponents, y) * space_inverse[perm_index];
}

Eigen::VectorXd ReferenceElement::time_basis(double tau) const {
    return time_inverse.transpose() * powers(tau, rp);
}

const ReferenceElement& reference_element(int d, int r, int rp) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, std::unique_ptr<ReferenceElement>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{d, r, rp}];
    if (!slot) slot = std::make_unique<ReferenceElement>(make_reference(d, r, rp));
    return *slot;
}

std::vector<std::pair<std::vector<double>, double>> cell_nodes(const SimplexCell& cell, int r, int rp) {
    const int d = static_cast<int>(cell.cube.size());
    const auto& ref = reference_element(d, r, rp);
    const auto& nodes = ref.space_nodes[cell.perm_id - 1];
    const double side = cell.side();
    std::vector<std::pair<std::vector<double>, double>> out;
    out.reserve(nodes.size() * rp);
    for (int j = 0; j < rp; ++j) {
        const double t = cell.t0 + (cell.t1 - cell.t0) * j / (rp - 1);
        for (const auto& g : nodes) {
            std::vector<double> x(d);
            for (int a = 0; a < d; ++a) x[a] = side * (cell.cube[a] + static_cast<double>(g[a]) / (r - 1));
            out.emplace_back(std::move(x), t);
        }
    }
    return out;
}

LocalPolynomial interpolate_cell(std::span<const double> samples, const SimplexCell& cell, int r, int rp) {
    const int d = static_cast<int>(cell.cube.size());
    const auto& ref = reference_element(d, r, rp);
    const auto ns = static_cast<Eigen::Index>(ref.space_dim());
    if (samples.size() != static_cast<std::size_t>(ns * rp))
        throw InterpolationError("interpolate_cell: sample count does not match the node count");
    Eigen::MatrixXd f(ns, rp);
    for (int j = 0; j < rp; ++j)
        for (Eigen::Index i = 0; i < ns; ++i) f(i, j) = samples[static_cast<std::size_t>(j * ns + i)];
    LocalPolynomial p;
    p.cell = cell;
    p.r = r;
    p.rp = rp;
    p.coeffs = ref.space_inverse[cell.perm_id - 1] * f * ref.time_inverse.transpose();
    return p;
}

double LocalPolynomial::operator()(std::span<const double> x, double t) const {
    const auto& ref = reference_element(static_cast<int>(cell.cube.size()), r, rp);
    const auto y = cell.to_local(x);
    const double tau = (t - cell.t0) / (cell.t1 - cell.t0);
    return monomials(ref.exponents, y).dot(coeffs * powers(tau, rp));
}

Interpolant Interpolant::from_nodes(const GridSpec& spec, std::vector<double> node_values) {
    spec.validate();
    Interpolant s;
    s.spec_ = spec;
    s.ref_ = &reference_element(spec.d, spec.r, spec.rp);
    s.nx_ = spec.distinct_per_axis();
    s.nt_ = (static_cast<std::size_t>(spec.rp - 1) << spec.kp) + 1;
    std::size_t total = s.nt_;
    for (int a = 0; a < spec.d; ++a) total *= s.nx_;
    if (node_values.size() != total) throw InterpolationError("interpolant: node value count mismatch");
    s.values_ = std::move(node_values);
    return s;
}

std::pair<std::vector<double>, double> Interpolant::node_coordinates(std::size_t index) const {
    std::size_t space = 1;
    for (int a = 0; a < spec_.d; ++a) space *= nx_;
    const std::size_t it = index / space;
    std::size_t rest = index % space;
    std::vector<double> x(spec_.d);
    for (int a = spec_.d - 1; a >= 0; --a) {
        x[a] = static_cast<double>(rest % nx_) / static_cast<double>(nx_ - 1);
        rest /= nx_;
    }
    return {std::move(x), spec_.T * static_cast<double>(it) / static_cast<double>(nt_ - 1)};
}

Interpolant Interpolant::build(const SpaceTimeFn& f, const GridSpec& spec) {
    spec.validate();
    const std::size_t nx = spec.distinct_per_axis();
    const std::size_t nt = (static_cast<std::size_t>(spec.rp - 1) << spec.kp) + 1;
    std::size_t total = nt;
    for (int a = 0; a < spec.d; ++a) total *= nx;
    Interpolant probe;
    probe.spec_ = spec;
    probe.nx_ = nx;
    probe.nt_ = nt;
    std::vector<double> values(total);
    for (std::size_t i = 0; i < total; ++i) {
        const auto [x, t] = probe.node_coordinates(i);
        values[i] = f(x, t);
    }
    return from_nodes(spec, std::move(values));
}

void Interpolant::gather(const CellIndex& cell, Eigen::MatrixXd& local) const {
    const auto& nodes = ref_->space_nodes[cell.perm_index];
    const auto ns = static_cast<Eigen::Index>(nodes.size());
    std::size_t space = 1;
    for (int a = 0; a < spec_.d; ++a) space *= nx_;
    local.resize(ns, spec_.rp);
    for (int j = 0; j < spec_.rp; ++j) {
        const std::size_t it = static_cast<std::size_t>(cell.interval) * (spec_.rp - 1) + j;
        for (Eigen::Index i = 0; i < ns; ++i) {
            std::size_t lin = 0;
            for (int a = 0; a < spec_.d; ++a)
                lin = lin * nx_ + static_cast<std::size_t>(cell.cube[a]) * (spec_.r - 1) + nodes[i][a];
            local(i, j) = values_[it * space + lin];
        }
    }
}

double Interpolant::operator()(std::span<const double> x, double t) const {
    thread_local CellIndex cell;
    thread_local std::vector<double> y;
    thread_local Eigen::MatrixXd local;
    double tau = 0.0;
    locate_index(x, t, spec_, cell, y, tau);
    gather(cell, local);
    return ref_->space_basis(cell.perm_index, y).dot(local * ref_->time_basis(tau));
}

Eigen::VectorXd Interpolant::grad_x(std::span<const double> x, double t) const {
    thread_local CellIndex cell;
    thread_local std::vector<double> y;
    thread_local Eigen::MatrixXd local;
    double tau = 0.0;
    locate_index(x, t, spec_, cell, y, tau);
    gather(cell, local);
    return ref_->space_basis_grad(cell.perm_index, y) * (local * ref_->time_basis(tau)) *
           static_cast<double>(spec_.cubes_per_axis());
}

namespace {

// Calls visit(x, t) for every point of a lattice with n points per axis over [0,1]^d x [0,T].
template <typename Visit>
void for_each_probe(int d, double T, int n, Visit&& visit) {
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    for (int j = 0; j < n; ++j) {
        const double t = n == 1 ? 0.0 : T * j / (n - 1);
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int a = 0; a < d; ++a) x[a] = n == 1 ? 0.0 : static_cast<double>(idx[a]) / (n - 1);
            visit(std::span<const double>(x), t);
            int a = d - 1;
            while (a >= 0 && ++idx[a] == n) idx[a--] = 0;
            if (a < 0) break;
        }
    }
}

// Per-cell midpoint lattice: cells per axis times quad_res points, in space and time.
struct MidpointLattice {
    int d;
    double T;
    int nx;  // points per spatial axis
    int nt;  // time points

    template <typename SliceFn>
    void for_each_slice(SliceFn&& slice) const {
        std::vector<double> x(d);
        std::vector<int> idx(d);
        std::vector<std::vector<double>> pts;
        std::size_t count = 1;
        for (int a = 0; a < d; ++a) count *= static_cast<std::size_t>(nx);
        pts.reserve(count);
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int a = 0; a < d; ++a) x[a] = (idx[a] + 0.5) / nx;
            pts.push_back(x);
            int a = d - 1;
            while (a >= 0 && ++idx[a] == nx) idx[a--] = 0;
            if (a < 0) break;
        }
        for (int j = 0; j < nt; ++j) slice(T * (j + 0.5) / nt, pts);
    }
};

double outer_combine(const std::vector<double>& slices, double tau_p, double dt) {
    if (std::isinf(tau_p)) return *std::max_element(slices.begin(), slices.end());
    double acc = 0.0;
    for (double s : slices) acc += std::pow(s, tau_p) * dt;
    return std::pow(acc, 1.0 / tau_p);
}

}  // namespace

double sup_error(const SpaceTimeFn& f, const Interpolant& s, int n_probe) {
    if (n_probe < 2) throw InterpolationError("sup_error: n_probe must be >= 2");
    double worst = 0.0;
    for_each_probe(s.spec().d, s.spec().T, n_probe, [&](std::span<const double> x, double t) {
        worst = std::max(worst, std::abs(f(x, t) - s(x, t)));
    });
    return worst;
}

double mixed_norm_error(const SpaceTimeFn& f, const Interpolant& s, double tau, double tau_p, int quad_res) {
    if (!(tau >= 1.0) || !(tau_p >= 1.0)) throw InterpolationError("mixed_norm_error: tau, tau' must be >= 1");
    if (quad_res < 1) throw InterpolationError("mixed_norm_error: quad_res must be >= 1");
    const auto& spec = s.spec();
    const MidpointLattice lat{spec.d, spec.T, quad_res * spec.cubes_per_axis(), quad_res * spec.intervals()};
    const double cell_volume = std::pow(1.0 / lat.nx, spec.d);
    std::vector<double> slices;
    lat.for_each_slice([&](double t, const std::vector<std::vector<double>>& pts) {
        double acc = 0.0;
        for (const auto& x : pts) {
            const double e = std::abs(f(x, t) - s(x, t));
            acc = std::isinf(tau) ? std::max(acc, e) : acc + std::pow(e, tau) * cell_volume;
        }
        slices.push_back(std::isinf(tau) ? acc : std::pow(acc, 1.0 / tau));
    });
    return outer_combine(slices, tau_p, spec.T / lat.nt);
}

double l2h1_error(const SpaceTimeFn& f, const std::function<Eigen::VectorXd(std::span<const double>, double)>& grad_f,
                  const Interpolant& s, int quad_res) {
    if (quad_res < 1) throw InterpolationError("l2h1_error: quad_res must be >= 1");
    const auto& spec = s.spec();
    const MidpointLattice lat{spec.d, spec.T, quad_res * spec.cubes_per_axis(), quad_res * spec.intervals()};
    const double cell_volume = std::pow(1.0 / lat.nx, spec.d);
    double acc = 0.0;
    lat.for_each_slice([&](double t, const std::vector<std::vector<double>>& pts) {
        double slice = 0.0;
        for (const auto& x : pts) {
            const double e = f(x, t) - s(x, t);
            const Eigen::VectorXd ge = grad_f(x, t) - s.grad_x(x, t);
            slice += (e * e + ge.squaredNorm()) * cell_volume;
        }
        acc += slice * spec.T / lat.nt;
    });
    return std::sqrt(acc);
}

namespace {

double radical_inverse(std::size_t i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double out = 0.0;
    while (i > 0) {
        out += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return out;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

struct Shift {
    std::vector<double> h;  // spatial shift
    double hn = 0.0;        // its Euclidean length
    double ht = 0.0;        // time shift (nonnegative)
};

// Shift i: direction from Halton coordinates in [-1,1]^d, length and time shift
// log-uniform in [1e-4, 1] (times T for time).
std::vector<Shift> shift_set(int d, double T, int n) {
    if (d + 2 > static_cast<int>(std::size(kPrimes))) throw InterpolationError("modulus: dimension too large");
    constexpr double lo = 1e-4;
    std::vector<Shift> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) {
        Shift s;
        s.h.resize(d);
        double norm = 0.0;
        for (int a = 0; a < d; ++a) {
            s.h[a] = 2.0 * radical_inverse(i, kPrimes[a]) - 1.0;
            norm += s.h[a] * s.h[a];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            s.h[0] = 1.0;
            norm = 1.0;
        }
        const double len = lo * std::pow(1.0 / lo, radical_inverse(i, kPrimes[d]));
        for (double& v : s.h) v *= len / norm;
        s.hn = len;
        s.ht = T * lo * std::pow(1.0 / lo, radical_inverse(i, kPrimes[d + 1]));
        out.push_back(std::move(s));
    }
    return out;
}

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

}  // namespace

double modulus_of_smoothness(const SpaceTimeFn& f, int r, int rp, double b, double bp, double p, double pp,
                             const ModulusOptions& options) {
    if (r < 0 || rp < 0 || (r == 0 && rp == 0)) throw InterpolationError("modulus: need r > 0 or r' > 0");
    if (!(b > 0.0) || !(bp > 0.0)) throw InterpolationError("modulus: b and b' must be positive");
    if (!(p >= 1.0) || !(pp >= 1.0)) throw InterpolationError("modulus: p, p' must be >= 1");
    const int d = options.d;
    const double T = options.T;
    const int n = options.n_probe;
    const auto shifts = shift_set(d, T, options.n_shift);
    double best = 0.0;
    std::vector<double> x(d), xs(d);
    for (const auto& sh : shifts) {
        if (r > 0 && sh.hn > b) continue;
        if (rp > 0 && sh.ht > bp) continue;
        // Domain where the whole stencil stays inside [0,1]^d x [0,T].
        std::vector<double> lo(d, 0.0), hi(d, 1.0);
        bool empty = false;
        for (int a = 0; a < d && r > 0; ++a) {
            const double reach = r * sh.h[a];
            lo[a] = std::max(0.0, -reach);
            hi[a] = std::min(1.0, 1.0 - reach);
            empty = empty || hi[a] <= lo[a];
        }
        const double t_hi = rp > 0 ? T - rp * sh.ht : T;
        if (empty || t_hi <= 0.0) continue;
        double volume = 1.0;
        for (int a = 0; a < d; ++a) volume *= hi[a] - lo[a];
        std::vector<double> slices;
        slices.reserve(n);
        std::vector<int> idx(d);
        for (int j = 0; j < n; ++j) {
            const double t = t_hi * (j + 0.5) / n;
            double acc = 0.0;
            std::fill(idx.begin(), idx.end(), 0);
            while (true) {
                for (int a = 0; a < d; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * (idx[a] + 0.5) / n;
                double diff = 0.0;
                for (int i = 0; i <= r; ++i) {
                    const double ci = binomial(r, i) * (((r - i) % 2) ? -1.0 : 1.0);
                    for (int a = 0; a < d; ++a) xs[a] = x[a] + (r > 0 ? i * sh.h[a] : 0.0);
                    for (int jj = 0; jj <= rp; ++jj) {
                        const double cj = binomial(rp, jj) * (((rp - jj) % 2) ? -1.0 : 1.0);
                        diff += ci * cj * f(xs, t + jj * sh.ht);
                    }
                }
                const double e = std::abs(diff);
                acc = std::isinf(p) ? std::max(acc, e) : acc + std::pow(e, p);
                int a = d - 1;
                while (a >= 0 && ++idx[a] == n) idx[a--] = 0;
                if (a < 0) break;
            }
            const double points = std::pow(static_cast<double>(n), d);
            slices.push_back(std::isinf(p) ? acc : std::pow(acc / points * volume, 1.0 / p));
        }
        best = std::max(best, outer_combine(slices, pp, t_hi / n));
    }
    return best;
}

NormId parse_norm_id(const std::string& name) {
    if (name == "c") return NormId::C;
    if (name == "l2l2" || name == "ltau") return NormId::Ltau;
    if (name == "l2h1") return NormId::L2H1;
    if (name == "l2hminus1") return NormId::L2Hminus1;
    if (name == "boundary") return NormId::Boundary;
    if (name == "initial") return NormId::Initial;
    throw InterpolationError("unknown norm: " + name);
}

std::string to_string(NormId id) {
    switch (id) {
        case NormId::C: return "c";
        case NormId::Ltau: return "l2l2";
        case NormId::L2H1: return "l2h1";
        case NormId::L2Hminus1: return "l2hminus1";
        case NormId::Boundary: return "boundary";
        case NormId::Initial: return "initial";
    }
    return "?";
}

namespace {

double inv(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }
double pos(double v) { return std::max(v, 0.0); }

}  // namespace

Exponents predicted_exponents(const BesovClass& cls, NormId norm, int d, double tau, double tau_p) {
    if (d < 1) throw InterpolationError("predicted_exponents: d must be >= 1");
    if (!(cls.p >= 1.0) || !(cls.pp >= 1.0)) throw InterpolationError("predicted_exponents: p, p' must be >= 1");
    if (!(cls.s > d * inv(cls.p)))
        throw InterpolationError("predicted_exponents: need s > d/p for point evaluations");
    if (norm != NormId::Initial && !(cls.theta > inv(cls.pp)))
        throw InterpolationError("predicted_exponents: need theta > 1/p'");
    const double ip = inv(cls.p);
    const double ipp = inv(cls.pp);
    Exponents e;
    switch (norm) {
        case NormId::C:
            e.alpha = cls.s / d - ip;
            e.beta = cls.theta - ipp;
            break;
        case NormId::Ltau:
            e.alpha = cls.s / d - pos(ip - inv(tau));
            e.beta = cls.theta - pos(ipp - inv(tau_p));
            break;
        case NormId::L2H1:
            if (ip < 0.5) throw InterpolationError("predicted_exponents: L2H1 needs p <= 2");
            e.alpha = (cls.s - 1.0) / d - (ip - 0.5);
            e.beta = cls.theta - (ipp - 0.5);
            break;
        case NormId::L2Hminus1:
            if (!(cls.p > 1.0)) throw InterpolationError("predicted_exponents: L2H-1 needs p > 1");
            e.alpha = cls.s / d - pos(ip - (0.5 + 1.0 / d));
            e.beta = cls.theta - (ipp - 0.5);
            break;
        case NormId::Boundary:
            if (d < 2) throw InterpolationError("predicted_exponents: boundary rate needs d >= 2");
            if (!(cls.s > 1.0)) throw InterpolationError("predicted_exponents: boundary rate needs s > 1");
            e.alpha = (cls.s - 1.0) / (d - 1) - static_cast<double>(d) / (d - 1) * (ip - 0.5);
            e.beta = cls.theta - (ipp - 0.5);
            break;
        case NormId::Initial:
            e.alpha = cls.s / d - (ip - 0.5);
            e.beta = 0.0;
            break;
    }
    return e;
}

double bump_profile(double z) {
    if (!(z > 0.0 && z < 1.0)) return 0.0;
    const double w = 2.0 * z - 1.0;
    return std::exp(1.0 - 1.0 / (1.0 - w * w));
}

double bump_profile_d1(double z) {
    if (!(z > 0.0 && z < 1.0)) return 0.0;
    const double w = 2.0 * z - 1.0;
    const double q = 1.0 - w * w;
    // d/dz exp(1 - 1/q) = exp(.) * (q'/q^2), q' = -4w
    return bump_profile(z) * (-4.0 * w) / (q * q);
}

double bump_profile_d2(double z) {
    if (!(z > 0.0 && z < 1.0)) return 0.0;
    const double w = 2.0 * z - 1.0;
    const double q = 1.0 - w * w;
    const double a = -4.0 * w / (q * q);  // psi'/psi
    // (psi'/psi)' with dw/dz = 2, dq/dz = -4w
    const double da = (-8.0 * q * q - (-4.0 * w) * 2.0 * q * (-4.0 * w)) / (q * q * q * q);
    return bump_profile(z) * (a * a + da);
}

Bump bump(std::span<const double> origin, double side, double t0, double duration, const BesovClass& cls) {
    if (!(side > 0.0) || !(duration > 0.0)) throw InterpolationError("bump: degenerate cell");
    const int d = static_cast<int>(origin.size());
    Bump b;
    b.origin.assign(origin.begin(), origin.end());
    b.side = side;
    b.t0 = t0;
    b.duration = duration;
    b.amplitude = std::pow(side, cls.s - d * inv(cls.p)) * std::pow(duration, cls.theta - inv(cls.pp));
    return b;
}

double Bump::operator()(std::span<const double> x, double t) const {
    double v = amplitude * bump_profile((t - t0) / duration);
    for (std::size_t a = 0; a < origin.size() && v != 0.0; ++a) v *= bump_profile((x[a] - origin[a]) / side);
    return v;
}

Eigen::VectorXd Bump::grad_x(std::span<const double> x, double t) const {
    const auto d = static_cast<Eigen::Index>(origin.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    const double tv = amplitude * bump_profile((t - t0) / duration);
    for (Eigen::Index b = 0; b < d; ++b) {
        double v = tv;
        for (Eigen::Index a = 0; a < d; ++a) {
            const double z = (x[a] - origin[a]) / side;
            v *= a == b ? bump_profile_d1(z) / side : bump_profile(z);
        }
        g(b) = v;
    }
    return g;
}

double Bump::laplacian(std::span<const double> x, double t) const {
    const std::size_t d = origin.size();
    const double tv = amplitude * bump_profile((t - t0) / duration);
    double out = 0.0;
    for (std::size_t b = 0; b < d; ++b) {
        double v = tv;
        for (std::size_t a = 0; a < d; ++a) {
            const double z = (x[a] - origin[a]) / side;
            v *= a == b ? bump_profile_d2(z) / (side * side) : bump_profile(z);
        }
        out += v;
    }
    return out;
}

double Bump::dt(std::span<const double> x, double t) const {
    double v = amplitude * bump_profile_d1((t - t0) / duration) / duration;
    for (std::size_t a = 0; a < origin.size(); ++a) v *= bump_profile((x[a] - origin[a]) / side);
    return v;
}

double least_squares_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw InterpolationError("slope fit: need >= 2 matching points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) throw InterpolationError("slope fit: levels do not vary");
    return sxy / sxx;
}

RateStudy rate_fit(const std::vector<std::pair<int, int>>& levels, const std::vector<double>& errors) {
    if (levels.size() != errors.size()) throw InterpolationError("rate_fit: size mismatch");
    if (levels.size() < 3) throw InterpolationError("rate_fit: need at least 3 levels");
    for (double e : errors)
        if (!(e > 0.0) || !std::isfinite(e)) throw InterpolationError("rate_fit: errors must be positive and finite");
    RateStudy out;
    out.levels = levels;
    out.errors = errors;
    bool k_varies = false, kp_varies = false;
    for (const auto& [k, kp] : levels) {
        k_varies = k_varies || k != levels.front().first;
        kp_varies = kp_varies || kp != levels.front().second;
    }
    if (!k_varies && !kp_varies) throw InterpolationError("rate_fit: levels do not vary");
    out.sweep = k_varies && kp_varies ? Sweep::Diagonal : (k_varies ? Sweep::Space : Sweep::Time);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        xs.push_back(k_varies ? levels[i].first : levels[i].second);
        ys.push_back(std::log2(errors[i]));
    }
    out.fitted_slope = least_squares_slope(xs, ys);
    if (out.sweep != Sweep::Time) out.fitted_slope_space = out.fitted_slope;
    if (out.sweep != Sweep::Space) out.fitted_slope_time = out.fitted_slope;
    return out;
}

TestFunction named_function(const std::string& name, int d) {
    using std::numbers::pi;
    TestFunction fn;
    fn.name = name;
    if (name == "sinprod") {
        fn.value = [](std::span<const double> x, double t) {
            double v = std::sin(pi * t);
            for (double xa : x) v *= std::sin(pi * xa);
            return v;
        };
        fn.grad_x = [d](std::span<const double> x, double t) {
            Eigen::VectorXd g(d);
            for (int b = 0; b < d; ++b) {
                double v = std::sin(pi * t);
                for (int a = 0; a < d; ++a) v *= a == b ? pi * std::cos(pi * x[a]) : std::sin(pi * x[a]);
                g(b) = v;
            }
            return g;
        };
        fn.smoothness = BesovClass{};  // effectively s = theta = 2 for linear elements
    } else if (name == "kink") {
        fn.value = [](std::span<const double> x, double t) { return std::abs(x[0] - 1.0 / 3.0) * (1.0 + t); };
        fn.grad_x = [d](std::span<const double> x, double t) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
            g(0) = (x[0] > 1.0 / 3.0 ? 1.0 : -1.0) * (1.0 + t);
            return g;
        };
        fn.smoothness = BesovClass{1.0, 2.0, kInfinity, kInfinity, kInfinity, kInfinity};
    } else if (name == "cospoly") {
        fn.value = [](std::span<const double> x, double t) {
            const double y = x.size() > 1 ? x[1] : 0.0;
            return std::cos(pi * x[0]) * (1.0 + y * y) * std::cos(t);
        };
        fn.grad_x = [d](std::span<const double> x, double t) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
            const double y = d > 1 ? x[1] : 0.0;
            g(0) = -pi * std::sin(pi * x[0]) * (1.0 + y * y) * std::cos(t);
            if (d > 1) g(1) = std::cos(pi * x[0]) * 2.0 * y * std::cos(t);
            return g;
        };
        fn.smoothness = BesovClass{};
    } else {
        throw InterpolationError("unknown test function: " + name);
    }
    return fn;
}

InterpRateResult interpolation_rate_study(const TestFunction& fn, int d, int r, int rp, NormId norm, int kmin,
                                          int kmax, double T) {
    if (kmin < 0 || kmax - kmin < 2) throw InterpolationError("rate study: need at least 3 levels");
    if (norm != NormId::C && norm != NormId::Ltau && norm != NormId::L2H1)
        throw InterpolationError("rate study: norm must be c, l2l2 or l2h1");
    // Smoothness seen by the interpolant is capped at the polynomial orders.
    BesovClass cls = fn.smoothness;
    cls.s = std::min(cls.s, static_cast<double>(r));
    cls.theta = std::min(cls.theta, static_cast<double>(rp));
    if (norm == NormId::L2H1) {
        // Smooth and Lipschitz fixtures also lie in the p = p' = 2 scale.
        cls.p = 2.0;
        cls.pp = 2.0;
    }
    InterpRateResult out;
    try {
        const auto e = predicted_exponents(cls, norm, d);
        out.predicted_slope = -std::min(d * e.alpha, e.beta);
        if (norm == NormId::L2H1) out.hypothesis_ok = cls.s - d * inv(cls.p) + d / 2.0 > 1.0;
    } catch (const InterpolationError&) {
        out.hypothesis_ok = false;
    }
    std::vector<std::pair<int, int>> levels;
    std::vector<double> errors;
    for (int k = kmin; k <= kmax; ++k) {
        GridSpec spec{d, k, k, r, rp, T};
        const auto s = Interpolant::build(fn.value, spec);
        const int quad = std::max(2, 32 >> k);
        double err = 0.0;
        switch (norm) {
            case NormId::C: err = sup_error(fn.value, s, ((r - 1) << k) * 4 + 1); break;
            case NormId::Ltau: err = mixed_norm_error(fn.value, s, 2.0, 2.0, quad); break;
            default: err = l2h1_error(fn.value, fn.grad_x, s, quad); break;
        }
        out.rows.push_back({k, k, err});
        levels.emplace_back(k, k);
        errors.push_back(err);
    }
    out.fitted_slope = rate_fit(levels, errors).fitted_slope;
    return out;
}

}  // namespace cpinn
