#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

/// Thrown for invalid grid parameters or out-of-domain queries.
class GridError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Refinement parameters of the space-time box [0,1]^d x [0,T].
///
/// Space is split into 2^k dyadic cubes per axis, each carrying r lattice
/// points per axis; time into 2^kp intervals carrying rp points each.
struct GridSpec {
    int d = 2;
    int k = 0;
    int kp = 0;
    int r = 2;
    int rp = 2;
    double T = 1.0;

    void validate() const;

    /// Spatial lattice spacing 2^-k / (r-1).
    double h() const;
    /// Temporal lattice spacing 2^-kp / (rp-1), in units of T.
    double hp() const;

    int cubes_per_axis() const { return 1 << k; }
    int intervals() const { return 1 << kp; }
    double cube_side() const { return 1.0 / cubes_per_axis(); }
    double interval_length() const { return T / intervals(); }

    /// (r 2^k)^d
    std::size_t m_tilde() const;
    /// rp 2^kp
    std::size_t m_hat() const;
    /// 2d (r 2^k)^(d-1) (rp 2^kp): the face-sum count, edges counted per face.
    std::size_t nominal_boundary_count() const;
    /// Distinct lattice points per axis, 2^k (r-1) + 1.
    std::size_t distinct_per_axis() const;
};

/// A flat list of space-time sites, coordinates stored point-major.
class SiteSet {
public:
    SiteSet() = default;
    explicit SiteSet(int d) : d_(d) {}

    int dim() const { return d_; }
    std::size_t size() const { return t_.size(); }
    bool empty() const { return t_.empty(); }

    std::span<const double> x(std::size_t i) const {
        return {x_.data() + i * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)};
    }
    double t(std::size_t i) const { return t_[i]; }

    void push_back(std::span<const double> x, double t);
    void reserve(std::size_t n);

private:
    int d_ = 0;
    std::vector<double> x_;
    std::vector<double> t_;
};

/// Interior collocation sites, time-major: site (i, j) lives at j * m_tilde + i.
struct TensorGrid {
    SiteSet points;
    std::size_t m_tilde = 0;
    std::size_t m_hat = 0;
    std::vector<double> times;  // m_hat temporal nodes, increasing

    std::size_t index(std::size_t i, std::size_t j) const { return j * m_tilde + i; }
};

/// Lateral boundary sites, each physical point once; time-major layout.
struct BoundaryGrid {
    SiteSet points;
    std::size_t m_bar = 0;
    std::size_t m_hat = 0;
    std::size_t nominal_count = 0;  // face-sum count over space-time
    std::vector<double> times;

    std::size_t index(std::size_t i, std::size_t j) const { return j * m_bar + i; }
};

/// Sites on the initial time slice t = 0.
struct InitialGrid {
    SiteSet points;
    std::size_t m_tilde = 0;
};

TensorGrid tensor_grid(const GridSpec& spec);
BoundaryGrid boundary_grid(const GridSpec& spec);
InitialGrid initial_grid(int k, int r, int d);

/// The three site families of an N x ... x N uniform mesh on [0,1]^d with N
/// time levels on (0,T]. Used by the training experiments.
struct MeshGrids {
    TensorGrid interior;
    BoundaryGrid boundary;
    InitialGrid initial;
};
MeshGrids uniform_mesh(int n, int d, double T);

/// One Kuhn simplex of a dyadic cube, crossed with a dyadic time interval.
struct SimplexCell {
    std::vector<int> cube;   // dyadic cube index per axis
    int interval = 0;        // dyadic time interval index
    int perm_id = 1;         // 1..d!, lexicographic order of permutations
    std::vector<int> perm;   // axis order, local coords satisfy y[perm[0]] >= y[perm[1]] >= ...
    std::vector<std::vector<double>> vertices;  // d+1 spatial vertices
    double t0 = 0.0;
    double t1 = 0.0;

    /// Barycentric coordinates (d+1 values) of a spatial point.
    std::vector<double> barycentric(std::span<const double> x) const;
    /// Spatial volume via the affine map determinant.
    double volume() const;
    /// Local cube coordinates y = (x - origin) / side.
    std::vector<double> to_local(std::span<const double> x) const;
    double side() const;
};

/// All permutations of {0..d-1} in lexicographic order; perm_id = position + 1.
const std::vector<std::vector<int>>& kuhn_permutations(int d);

/// The d! simplices of cube `cube` (level k) crossed with interval `interval` (level kp).
std::vector<SimplexCell> kuhn_decompose(const std::vector<int>& cube, int interval, const GridSpec& spec);

SimplexCell make_cell(const std::vector<int>& cube, int interval, int perm_id, const GridSpec& spec);

/// The cell containing (x, t). Facet ties resolve to the lexicographically
/// smallest (cube index, permutation id); the closed top faces belong to the
/// last cube / interval.
SimplexCell locate(std::span<const double> x, double t, const GridSpec& spec);

/// Index-only variant of locate, for hot loops.
struct CellIndex {
    std::vector<int> cube;
    int interval = 0;
    int perm_index = 0;  // zero-based
};
void locate_index(std::span<const double> x, double t, const GridSpec& spec, CellIndex& out,
                  std::vector<double>& local_x, double& local_t);

}  // namespace cpinn
