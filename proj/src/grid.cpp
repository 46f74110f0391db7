#include "cpinn/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

namespace cpinn {

namespace {

std::size_t ipow(std::size_t base, int exp) {
    std::size_t out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

// Odometer over a d-dimensional index box, first axis slowest.
bool next_index(std::vector<int>& idx, int extent) {
    for (int a = static_cast<int>(idx.size()) - 1; a >= 0; --a) {
        if (++idx[a] < extent) return true;
        idx[a] = 0;
    }
    return false;
}

int clamp_cell(double scaled, int count) {
    const int c = static_cast<int>(std::ceil(scaled)) - 1;
    return std::clamp(c, 0, count - 1);
}

}  // namespace

void GridSpec::validate() const {
    if (d < 1) throw GridError("grid: spatial dimension d must be >= 1");
    if (r < 2) throw GridError("grid: spatial order r must be >= 2");
    if (rp < 2) throw GridError("grid: temporal order r' must be >= 2");
    if (k < 0 || kp < 0) throw GridError("grid: refinement levels must be >= 0");
    if (k > 24 || kp > 24) throw GridError("grid: refinement level too large");
    if (!(T > 0.0) || !std::isfinite(T)) throw GridError("grid: final time T must be > 0");
}

double GridSpec::h() const { return std::ldexp(1.0, -k) / (r - 1); }
double GridSpec::hp() const { return T * std::ldexp(1.0, -kp) / (rp - 1); }

std::size_t GridSpec::m_tilde() const {
    return ipow(static_cast<std::size_t>(r) << k, d);
}

std::size_t GridSpec::m_hat() const { return static_cast<std::size_t>(rp) << kp; }

std::size_t GridSpec::nominal_boundary_count() const {
    return 2 * static_cast<std::size_t>(d) * ipow(static_cast<std::size_t>(r) << k, d - 1) * m_hat();
}

std::size_t GridSpec::distinct_per_axis() const {
    return (static_cast<std::size_t>(r - 1) << k) + 1;
}

void SiteSet::push_back(std::span<const double> x, double t) {
    if (static_cast<int>(x.size()) != d_) throw GridError("SiteSet: coordinate dimension mismatch");
    x_.insert(x_.end(), x.begin(), x.end());
    t_.push_back(t);
}

void SiteSet::reserve(std::size_t n) {
    x_.reserve(n * static_cast<std::size_t>(d_));
    t_.reserve(n);
}

namespace {

// Spatial nodes of the per-cube lattice, with multiplicity at cube interfaces.
std::vector<std::vector<double>> cube_lattice(int k, int r, int d) {
    const int per_axis = r << k;
    const double side = std::ldexp(1.0, -k);
    const double h = side / (r - 1);
    std::vector<double> axis(per_axis);
    for (int g = 0; g < per_axis; ++g) axis[g] = (g / r) * side + (g % r) * h;

    std::vector<std::vector<double>> out;
    out.reserve(ipow(per_axis, d));
    std::vector<int> idx(d, 0);
    do {
        std::vector<double> x(d);
        for (int a = 0; a < d; ++a) x[a] = axis[idx[a]];
        out.push_back(std::move(x));
    } while (next_index(idx, per_axis));
    return out;
}

std::vector<double> level_times(std::size_t m_hat, double T) {
    std::vector<double> times(m_hat);
    for (std::size_t j = 0; j < m_hat; ++j) times[j] = T * static_cast<double>(j + 1) / static_cast<double>(m_hat);
    return times;
}

// Points of the distinct n^d lattice on [0,1]^d having some coordinate at 0 or 1.
std::vector<std::vector<double>> lattice_boundary(std::size_t n, int d) {
    std::vector<std::vector<double>> out;
    std::vector<int> idx(d, 0);
    const int last = static_cast<int>(n) - 1;
    do {
        const bool on_boundary = std::any_of(idx.begin(), idx.end(), [&](int v) { return v == 0 || v == last; });
        if (!on_boundary) continue;
        std::vector<double> x(d);
        for (int a = 0; a < d; ++a) x[a] = static_cast<double>(idx[a]) / last;
        out.push_back(std::move(x));
    } while (next_index(idx, static_cast<int>(n)));
    return out;
}

std::vector<std::vector<double>> lattice_full(std::size_t n, int d) {
    std::vector<std::vector<double>> out;
    std::vector<int> idx(d, 0);
    const int last = static_cast<int>(n) - 1;
    do {
        std::vector<double> x(d);
        for (int a = 0; a < d; ++a) x[a] = static_cast<double>(idx[a]) / last;
        out.push_back(std::move(x));
    } while (next_index(idx, static_cast<int>(n)));
    return out;
}

TensorGrid make_tensor(const std::vector<std::vector<double>>& space, std::vector<double> times, int d) {
    TensorGrid grid;
    grid.points = SiteSet(d);
    grid.m_tilde = space.size();
    grid.m_hat = times.size();
    grid.points.reserve(grid.m_tilde * grid.m_hat);
    for (double t : times)
        for (const auto& x : space) grid.points.push_back(x, t);
    grid.times = std::move(times);
    return grid;
}

BoundaryGrid make_boundary(const std::vector<std::vector<double>>& space, std::vector<double> times, int d,
                           std::size_t nominal) {
    BoundaryGrid grid;
    grid.points = SiteSet(d);
    grid.m_bar = space.size();
    grid.m_hat = times.size();
    grid.nominal_count = nominal;
    grid.points.reserve(grid.m_bar * grid.m_hat);
    for (double t : times)
        for (const auto& x : space) grid.points.push_back(x, t);
    grid.times = std::move(times);
    return grid;
}

InitialGrid make_initial(const std::vector<std::vector<double>>& space, int d) {
    InitialGrid grid;
    grid.points = SiteSet(d);
    grid.m_tilde = space.size();
    grid.points.reserve(space.size());
    for (const auto& x : space) grid.points.push_back(x, 0.0);
    return grid;
}

}  // namespace

TensorGrid tensor_grid(const GridSpec& spec) {
    spec.validate();
    return make_tensor(cube_lattice(spec.k, spec.r, spec.d), level_times(spec.m_hat(), spec.T), spec.d);
}

BoundaryGrid boundary_grid(const GridSpec& spec) {
    spec.validate();
    return make_boundary(lattice_boundary(spec.distinct_per_axis(), spec.d), level_times(spec.m_hat(), spec.T),
                         spec.d, spec.nominal_boundary_count());
}

InitialGrid initial_grid(int k, int r, int d) {
    GridSpec spec{.d = d, .k = k, .kp = 0, .r = r, .rp = 2, .T = 1.0};
    spec.validate();
    return make_initial(cube_lattice(k, r, d), d);
}

MeshGrids uniform_mesh(int n, int d, double T) {
    if (n < 2) throw GridError("uniform_mesh: N must be >= 2");
    if (d < 1) throw GridError("uniform_mesh: d must be >= 1");
    if (!(T > 0.0)) throw GridError("uniform_mesh: T must be > 0");
    const auto un = static_cast<std::size_t>(n);
    const auto space = lattice_full(un, d);
    const auto times = level_times(un, T);
    const std::size_t nominal = 2 * static_cast<std::size_t>(d) * ipow(un, d - 1) * un;
    return {make_tensor(space, times, d), make_boundary(lattice_boundary(un, d), times, d, nominal),
            make_initial(space, d)};
}

// ---------------------------------------------------------------------------
// Kuhn decomposition

const std::vector<std::vector<int>>& kuhn_permutations(int d) {
    static std::mutex mutex;
    static std::map<int, std::vector<std::vector<int>>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(d);
    if (it != cache.end()) return it->second;
    std::vector<int> p(d);
    std::iota(p.begin(), p.end(), 0);
    std::vector<std::vector<int>> perms;
    do {
        perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return cache.emplace(d, std::move(perms)).first->second;
}

double SimplexCell::side() const {
    return vertices.size() > 1 ? std::abs(vertices[1][perm[0]] - vertices[0][perm[0]]) : 0.0;
}

std::vector<double> SimplexCell::to_local(std::span<const double> x) const {
    const double s = side();
    std::vector<double> y(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) y[a] = (x[a] - vertices[0][a]) / s;
    return y;
}

std::vector<double> SimplexCell::barycentric(std::span<const double> x) const {
    const auto y = to_local(x);
    const std::size_t d = perm.size();
    std::vector<double> lambda(d + 1);
    lambda[0] = 1.0 - y[perm[0]];
    for (std::size_t i = 1; i < d; ++i) lambda[i] = y[perm[i - 1]] - y[perm[i]];
    lambda[d] = y[perm[d - 1]];
    return lambda;
}

double SimplexCell::volume() const {
    const std::size_t d = perm.size();
    Eigen::MatrixXd edges(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t a = 0; a < d; ++a) edges(a, i) = vertices[i + 1][a] - vertices[0][a];
    double fact = 1.0;
    for (std::size_t i = 2; i <= d; ++i) fact *= static_cast<double>(i);
    return std::abs(edges.determinant()) / fact;
}

SimplexCell make_cell(const std::vector<int>& cube, int interval, int perm_id, const GridSpec& spec) {
    const auto& perms = kuhn_permutations(spec.d);
    if (static_cast<int>(cube.size()) != spec.d) throw GridError("make_cell: cube index has wrong dimension");
    if (perm_id < 1 || perm_id > static_cast<int>(perms.size())) throw GridError("make_cell: bad permutation id");
    const double side = spec.cube_side();
    SimplexCell cell;
    cell.cube = cube;
    cell.interval = interval;
    cell.perm_id = perm_id;
    cell.perm = perms[perm_id - 1];
    std::vector<double> v(spec.d);
    for (int a = 0; a < spec.d; ++a) v[a] = cube[a] * side;
    cell.vertices.push_back(v);
    for (int i = 0; i < spec.d; ++i) {
        v[cell.perm[i]] += side;
        cell.vertices.push_back(v);
    }
    cell.t0 = interval * spec.interval_length();
    cell.t1 = (interval + 1) * spec.interval_length();
    return cell;
}

std::vector<SimplexCell> kuhn_decompose(const std::vector<int>& cube, int interval, const GridSpec& spec) {
    spec.validate();
    const int n = static_cast<int>(kuhn_permutations(spec.d).size());
    std::vector<SimplexCell> cells;
    cells.reserve(n);
    for (int id = 1; id <= n; ++id) cells.push_back(make_cell(cube, interval, id, spec));
    return cells;
}

namespace {

// Lexicographic rank of a permutation of {0..d-1}.
int permutation_rank(const std::vector<int>& p) {
    const int d = static_cast<int>(p.size());
    int rank = 0;
    for (int i = 0; i < d; ++i) {
        int smaller = 0;
        for (int j = i + 1; j < d; ++j)
            if (p[j] < p[i]) ++smaller;
        int fact = 1;
        for (int f = 2; f <= d - 1 - i; ++f) fact *= f;
        rank += smaller * fact;
    }
    return rank;
}

}  // namespace

void locate_index(std::span<const double> x, double t, const GridSpec& spec, CellIndex& out,
                  std::vector<double>& local_x, double& local_t) {
    const int d = spec.d;
    const int n = spec.cubes_per_axis();
    const int nt = spec.intervals();
    constexpr double tol = 1e-12;
    out.cube.resize(d);
    local_x.resize(d);
    for (int a = 0; a < d; ++a) {
        if (!(x[a] >= -tol && x[a] <= 1.0 + tol)) throw GridError("locate: point outside the spatial domain");
        const double scaled = x[a] * n;
        out.cube[a] = clamp_cell(scaled, n);
        local_x[a] = scaled - out.cube[a];
    }
    if (!(t >= -tol * spec.T && t <= spec.T * (1.0 + tol))) throw GridError("locate: time outside [0, T]");
    const double scaled_t = t / spec.T * nt;
    out.interval = clamp_cell(scaled_t, nt);
    local_t = scaled_t - out.interval;

    // Descending local coordinates; stable order picks the smallest permutation on ties.
    thread_local std::vector<int> order;
    order.resize(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return local_x[a] > local_x[b]; });
    out.perm_index = permutation_rank(order);
}

SimplexCell locate(std::span<const double> x, double t, const GridSpec& spec) {
    spec.validate();
    if (static_cast<int>(x.size()) != spec.d) throw GridError("locate: point has wrong dimension");
    CellIndex idx;
    std::vector<double> local;
    double local_t = 0.0;
    locate_index(x, t, spec, idx, local, local_t);
    return make_cell(idx.cube, idx.interval, idx.perm_index + 1, spec);
}

}  // namespace cpinn
