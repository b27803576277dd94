#include "hardylab/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hardylab/error.hpp"

namespace hardylab {

const char* to_string(FaceLocation location) {
    switch (location) {
        case FaceLocation::arc: return "arc";
        case FaceLocation::flat: return "flat";
        case FaceLocation::origin_limit: return "origin";
    }
    return "unknown";
}

Grid Grid::build(int dimension, int n_r, int n_theta, double radius) {
    if (dimension != 2 && dimension != 3) {
        throw PreconditionError("grid dimension must be 2 or 3, got " + std::to_string(dimension));
    }
    if (n_r < 4 || n_theta < 4) {
        throw PreconditionError("grid needs n_r >= 4 and n_theta >= 4, got " + std::to_string(n_r) +
                                "x" + std::to_string(n_theta));
    }
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw PreconditionError("grid radius must be positive and finite");
    }

    Grid g;
    g.dimension_ = dimension;
    g.n_r_ = n_r;
    g.n_theta_ = n_theta;
    g.radius_ = radius;
    g.delta_r_ = radius / n_r;
    const double span = dimension == 2 ? std::numbers::pi : 0.5 * std::numbers::pi;
    g.delta_theta_ = span / n_theta;
    // Dimension 3 keeps the axis column t = 0 as unknowns (symmetry condition).
    g.column_begin_ = dimension == 2 ? 1 : 0;
    g.column_end_ = n_theta;
    g.build_faces();
    return g;
}

int Grid::index(int i, int j) const noexcept {
    if (i < 1 || i >= n_r_ || j < column_begin_ || j >= column_end_) return -1;
    return (i - 1) * num_columns() + (j - column_begin_);
}

std::pair<int, int> Grid::node(int k) const {
    if (k < 0 || k >= num_interior()) {
        throw PreconditionError("interior index out of range: " + std::to_string(k));
    }
    return {k / num_columns() + 1, k % num_columns() + column_begin_};
}

std::pair<double, double> Grid::cartesian(double r, double theta) const noexcept {
    if (dimension_ == 2) return {r * std::cos(theta), r * std::sin(theta)};
    // meridian plane: (distance from axis, height above the flat boundary)
    return {r * std::sin(theta), r * std::cos(theta)};
}

double Grid::measure_constant() const noexcept {
    return dimension_ == 2 ? 1.0 : 2.0 * std::numbers::pi;
}

double Grid::radial_density(double r) const noexcept {
    return dimension_ == 2 ? r : r * r;
}

double Grid::angular_density(double theta) const noexcept {
    return dimension_ == 2 ? 1.0 : std::sin(theta);
}

double Grid::angular_cell_weight(int j) const noexcept {
    if (dimension_ == 2) {
        if (j <= 0 || j >= n_theta_) return 0.5 * delta_theta_;
        return delta_theta_;
    }
    // integral of sin over [t_j - dt/2, t_j + dt/2] intersected with [0, pi/2]
    const double half = 0.5 * delta_theta_;
    if (j <= 0) return 2.0 * std::sin(0.5 * half) * std::sin(0.5 * half);  // 1 - cos(half)
    if (j >= n_theta_) return std::sin(half);
    // cos(a - h) - cos(a + h) = 2 sin(a) sin(h), cancellation-free
    return 2.0 * std::sin(theta(j)) * std::sin(half);
}

void Grid::build_faces() {
    faces_.clear();
    const double c = measure_constant();
    const double arc_density = radial_density(radius_);
    const int last = n_r_ - 1;

    // Arc faces, corners included so the weights form a closed quadrature rule.
    for (int j = 0; j <= n_theta_; ++j) {
        BoundaryFace f{};
        f.location = FaceLocation::arc;
        f.r = radius_;
        f.theta = theta(j);
        f.x_dot_nu = radius_;
        f.surface_weight = c * arc_density * angular_cell_weight(j);
        f.inner1 = index(last, j);
        f.inner2 = index(last - 1, j);
        f.inward_step = delta_r_;
        faces_.push_back(f);
    }

    auto add_flat_side = [&](int boundary_col, int step) {
        for (int i = 1; i < n_r_; ++i) {
            BoundaryFace f{};
            f.location = FaceLocation::flat;
            f.r = r(i);
            f.theta = theta(boundary_col);
            f.x_dot_nu = 0.0;
            f.surface_weight = dimension_ == 2 ? delta_r_ : c * r(i) * delta_r_;
            f.inner1 = index(i, boundary_col + step);
            f.inner2 = index(i, boundary_col + 2 * step);
            f.inward_step = r(i) * delta_theta_;
            faces_.push_back(f);
        }
    };
    if (dimension_ == 2) add_flat_side(0, +1);
    add_flat_side(n_theta_, -1);

    BoundaryFace origin{};
    origin.location = FaceLocation::origin_limit;
    origin.inner1 = -1;
    origin.inner2 = -1;
    origin.inward_step = delta_r_;
    faces_.push_back(origin);
}

bool Grid::same_shape(const Grid& other) const noexcept {
    return dimension_ == other.dimension_ && n_r_ == other.n_r_ && n_theta_ == other.n_theta_ &&
           radius_ == other.radius_;
}

}  // namespace hardylab
