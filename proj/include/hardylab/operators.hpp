#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>

#include "hardylab/grid.hpp"

namespace hardylab {

using SparseMatrix = Eigen::SparseMatrix<double>;
/// Grid function on the interior unknowns, indexed by Grid::index().
using Field = Eigen::VectorXd;
using ComplexField = Eigen::VectorXcd;

/// One value per entry of Grid::faces().
struct BoundaryField {
    Eigen::VectorXd values;
};

/// Samples f(r, theta) at every interior node.
Field sample(const Grid& grid, const std::function<double(double, double)>& f);

/// Assembled quadratic forms of -Laplace - lambda/|x|^2 for one coupling.
///
/// Diagonal forms are stored as vectors. All forms include the polar
/// measure c_N r^(N-1) sin^(N-2)(theta) dr dtheta.
struct OperatorSet {
    Grid grid;
    double lambda = 0.0;
    SparseMatrix stiffness;         ///< discrete integral of |grad u|^2
    SparseMatrix radial_stiffness;  ///< discrete integral of |x|^2 |grad u|^2
    SparseMatrix hardy;             ///< stiffness - lambda * diag(potential)
    Eigen::VectorXd mass;
    Eigen::VectorXd potential;   ///< mass / r^2
    Eigen::VectorXd log_weight;  ///< potential / log^2(R / r)
    /// Coupling between arc boundary node j and its inner neighbour, i.e. the
    /// negated off-diagonal entry of the full stiffness; zero at corners.
    Eigen::VectorXd arc_coupling;

    int size() const noexcept { return static_cast<int>(mass.size()); }
};

/// Rejects lambda above the critical constant N^2/4.
OperatorSet assemble(const Grid& grid, double lambda);

enum class FormKind { dirichlet, mass, potential, log_weight, radial, hardy };

double quadratic_form(const OperatorSet& ops, const Field& u, FormKind which);

/// Sum-of-squares rewriting of the Hardy functional that stays finite at
/// critical lambda for profiles that do not vanish in H^1_0.
double regularized_hardy_form(const OperatorSet& ops, const Field& u);

/// Same form restricted to cells whose nodes all satisfy r >= r_min
/// (the origin half-cell is always excluded).
double regularized_hardy_form(const OperatorSet& ops, const Field& u, double r_min);

/// Hardy and Dirichlet forms restricted to the annulus r >= r_min.
struct TruncatedForms {
    double hardy;
    double dirichlet;
};
TruncatedForms truncated_forms(const OperatorSet& ops, const Field& u, double r_min);

/// Second-order one-sided normal derivative at every boundary face.
BoundaryField normal_derivative(const Grid& grid, const Field& u);

enum class BoundaryWeight { one, abs_x_squared, x_dot_nu };

/// Sum over faces of weight * b^2 * surface_weight.
double boundary_quadrature(const Grid& grid, const BoundaryField& b, BoundaryWeight weight);

/// The multiplier x . grad u = r u_r by centred radial differences with the
/// Dirichlet zeros at the origin and at r = R.
Field radial_multiplier(const Grid& grid, const Field& u);

/// M-weighted inner product.
double mass_inner(const OperatorSet& ops, const Field& a, const Field& b);

}  // namespace hardylab
