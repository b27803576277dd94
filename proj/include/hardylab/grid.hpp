#pragma once

#include <utility>
#include <vector>

namespace hardylab {

enum class FaceLocation { arc, flat, origin_limit };

const char* to_string(FaceLocation location);

/// A boundary sample point with its geometric data.
///
/// `inner1` / `inner2` are the interior unknowns one and two grid steps
/// inward along the normal (-1 when that node is a Dirichlet node), and
/// `inward_step` is the physical distance of one step, so the one-sided
/// normal derivative is (-4 u[inner1] + u[inner2]) / (2 inward_step).
struct BoundaryFace {
    FaceLocation location;
    double r;
    double theta;
    double x_dot_nu;
    double surface_weight;
    int inner1;
    int inner2;
    double inward_step;
};

/// Polar tensor grid on the unit-type half-disk (dimension 2) or on the
/// meridian quarter-disk of an axisymmetric half-ball (dimension 3).
///
/// Dimension 2: x = r (cos t, sin t), t in (0, pi), flat boundary at t = 0, pi.
/// Dimension 3: x_3 = r cos t, t in [0, pi/2), t = 0 is the symmetry axis and
/// the flat boundary is t = pi/2. Radial nodes r_i = i dr, i = 1..n_r-1; the
/// origin and r = radius are Dirichlet.
///
/// Immutable after construction.
class Grid {
public:
    static Grid build(int dimension, int n_r, int n_theta, double radius);

    int dimension() const noexcept { return dimension_; }
    int n_r() const noexcept { return n_r_; }
    int n_theta() const noexcept { return n_theta_; }
    double delta_r() const noexcept { return delta_r_; }
    double delta_theta() const noexcept { return delta_theta_; }
    double radius() const noexcept { return radius_; }
    bool axis_symmetric() const noexcept { return dimension_ == 3; }

    /// Critical Hardy constant N^2/4 for this dimension.
    double critical_lambda() const noexcept { return 0.25 * dimension_ * dimension_; }

    /// Number of radial rings carrying unknowns (n_r - 1).
    int num_rings() const noexcept { return n_r_ - 1; }
    /// Number of angular columns carrying unknowns.
    int num_columns() const noexcept { return column_end_ - column_begin_; }
    /// Angular index range [column_begin, column_end) of unknowns.
    int column_begin() const noexcept { return column_begin_; }
    int column_end() const noexcept { return column_end_; }
    int num_interior() const noexcept { return num_rings() * num_columns(); }

    double r(int i) const noexcept { return i * delta_r_; }
    double theta(int j) const noexcept { return j * delta_theta_; }

    /// Linear index of interior node (i, j); -1 if (i, j) is a Dirichlet node.
    int index(int i, int j) const noexcept;
    /// Inverse of index() for k in [0, num_interior()).
    std::pair<int, int> node(int k) const;

    double node_r(int k) const { return r(node(k).first); }
    double node_theta(int k) const { return theta(node(k).second); }

    /// Cartesian coordinates of a polar point (x_1, x_N) in the meridian plane.
    std::pair<double, double> cartesian(double r, double theta) const noexcept;

    /// c_N: 1 for dimension 2, 2 pi for the axisymmetric dimension 3.
    double measure_constant() const noexcept;
    /// r^(N-1).
    double radial_density(double r) const noexcept;
    /// sin^(N-2)(theta) evaluated pointwise.
    double angular_density(double theta) const noexcept;
    /// Integral of the angular density over the dual cell of column j,
    /// clipped to the angular domain.
    double angular_cell_weight(int j) const noexcept;

    const std::vector<BoundaryFace>& faces() const noexcept { return faces_; }

    bool same_shape(const Grid& other) const noexcept;

private:
    Grid() = default;
    void build_faces();

    int dimension_ = 2;
    int n_r_ = 0;
    int n_theta_ = 0;
    double radius_ = 1.0;
    double delta_r_ = 0.0;
    double delta_theta_ = 0.0;
    int column_begin_ = 0;
    int column_end_ = 0;
    std::vector<BoundaryFace> faces_;
};

}  // namespace hardylab
