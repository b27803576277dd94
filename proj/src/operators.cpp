#include "hardylab/operators.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "hardylab/error.hpp"

namespace hardylab {
namespace {

using Triplet = Eigen::Triplet<double>;

// Visits every edge of the flux stencil. `edge(k0, k1, area, grad_scale, r_edge, theta_edge,
// radial)` receives the two endpoint indices (-1 for Dirichlet nodes), the cell area attached
// to the edge, the factor turning the index difference into the physical gradient component,
// and the edge location.
template <typename EdgeFn>
void for_each_edge(const Grid& g, bool include_origin_edge, EdgeFn&& edge) {
    const double c = g.measure_constant();
    const double dr = g.delta_r();
    const double dt = g.delta_theta();

    // radial edges (i + 1/2, j)
    for (int i = include_origin_edge ? 0 : 1; i < g.n_r(); ++i) {
        const double re = (i + 0.5) * dr;
        for (int j = g.column_begin(); j < g.column_end(); ++j) {
            const double area = c * g.radial_density(re) * g.angular_cell_weight(j) * dr;
            edge(g.index(i, j), g.index(i + 1, j), area, 1.0 / dr, re, g.theta(j), true);
        }
    }
    // angular edges (i, j + 1/2); the axis column of dimension 3 has no edge below it
    const int j_first = g.dimension() == 2 ? 0 : g.column_begin();
    for (int i = 1; i < g.n_r(); ++i) {
        const double r = g.r(i);
        for (int j = j_first; j < g.n_theta(); ++j) {
            const double te = (j + 0.5) * dt;
            const double area = c * g.radial_density(r) * g.angular_density(te) * dr * dt;
            edge(g.index(i, j), g.index(i, j + 1), area, 1.0 / (r * dt), r, te, false);
        }
    }
}

SparseMatrix assemble_flux_form(const Grid& g, bool radial_weight) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(g.num_interior()) * 5);
    for_each_edge(g, true, [&](int k0, int k1, double area, double scale, double re, double, bool) {
        double a = area * scale * scale;
        if (radial_weight) a *= re * re;
        if (k0 >= 0) trips.emplace_back(k0, k0, a);
        if (k1 >= 0) trips.emplace_back(k1, k1, a);
        if (k0 >= 0 && k1 >= 0) {
            trips.emplace_back(k0, k1, -a);
            trips.emplace_back(k1, k0, -a);
        }
    });
    SparseMatrix m(g.num_interior(), g.num_interior());
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

void check_size(const OperatorSet& ops, const Field& u, const char* what) {
    if (u.size() != ops.size()) {
        std::ostringstream os;
        os << what << ": field has " << u.size() << " entries, grid has " << ops.size()
           << " interior nodes";
        throw PreconditionError(os.str());
    }
}

double value_at(const Field& u, int k) { return k >= 0 ? u[k] : 0.0; }

// Angular coefficient of the e_N / x_N correction in the polar frame:
// dimension 2 (t from the flat boundary): -cot t, dimension 3 (t from the axis): +tan t.
double angular_correction(int dimension, double theta) {
    return dimension == 2 ? -std::cos(theta) / std::sin(theta) : std::tan(theta);
}

}  // namespace

Field sample(const Grid& grid, const std::function<double(double, double)>& f) {
    Field u(grid.num_interior());
    for (int k = 0; k < grid.num_interior(); ++k) {
        auto [i, j] = grid.node(k);
        u[k] = f(grid.r(i), grid.theta(j));
    }
    return u;
}

OperatorSet assemble(const Grid& grid, double lambda) {
    const double critical = grid.critical_lambda();
    if (!std::isfinite(lambda) || lambda > critical) {
        std::ostringstream os;
        os << "lambda = " << lambda << " exceeds the critical Hardy constant lambda(" << grid.dimension()
           << ") = N^2/4 = " << critical;
        throw PreconditionError(os.str());
    }

    OperatorSet ops{grid, lambda, {}, {}, {}, {}, {}, {}, {}};
    ops.stiffness = assemble_flux_form(grid, false);
    ops.radial_stiffness = assemble_flux_form(grid, true);

    const int n = grid.num_interior();
    ops.mass.resize(n);
    ops.potential.resize(n);
    ops.log_weight.resize(n);
    const double c = grid.measure_constant();
    for (int k = 0; k < n; ++k) {
        auto [i, j] = grid.node(k);
        const double r = grid.r(i);
        ops.mass[k] = c * grid.radial_density(r) * grid.delta_r() * grid.angular_cell_weight(j);
        ops.potential[k] = ops.mass[k] / (r * r);
        const double lg = std::log(grid.radius() / r);
        ops.log_weight[k] = ops.potential[k] / (lg * lg);
    }

    ops.hardy = ops.stiffness;
    for (int k = 0; k < n; ++k) ops.hardy.coeffRef(k, k) -= lambda * ops.potential[k];

    const auto& faces = grid.faces();
    ops.arc_coupling = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(faces.size()));
    const double re = grid.radius() - 0.5 * grid.delta_r();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (faces[f].location != FaceLocation::arc || faces[f].inner1 < 0) continue;
        const int j = grid.node(faces[f].inner1).second;
        ops.arc_coupling[static_cast<Eigen::Index>(f)] =
            c * grid.radial_density(re) * grid.angular_cell_weight(j) / grid.delta_r();
    }
    return ops;
}

double quadratic_form(const OperatorSet& ops, const Field& u, FormKind which) {
    check_size(ops, u, "quadratic_form");
    switch (which) {
        case FormKind::dirichlet: return u.dot(ops.stiffness * u);
        case FormKind::mass: return u.cwiseAbs2().dot(ops.mass);
        case FormKind::potential: return u.cwiseAbs2().dot(ops.potential);
        case FormKind::log_weight: return u.cwiseAbs2().dot(ops.log_weight);
        case FormKind::radial: return u.dot(ops.radial_stiffness * u);
        case FormKind::hardy: return u.dot(ops.hardy * u);
    }
    return 0.0;
}

double regularized_hardy_form(const OperatorSet& ops, const Field& u) {
    return regularized_hardy_form(ops, u, 0.0);
}

double regularized_hardy_form(const OperatorSet& ops, const Field& u, double r_min) {
    check_size(ops, u, "regularized_hardy_form");
    const Grid& g = ops.grid;
    const int dim = g.dimension();
    const double radial_shift = 0.5 * (dim - 2);

    double sum = 0.0;
    for_each_edge(g, false, [&](int k0, int k1, double area, double scale, double re, double te,
                                bool radial) {
        const double inner_r = radial ? re - 0.5 * g.delta_r() : re;
        if (inner_r < r_min) return;
        const double u0 = value_at(u, k0);
        const double u1 = value_at(u, k1);
        const double mean = 0.5 * (u0 + u1);
        double component;
        if (radial) {
            component = (u1 - u0) * scale + radial_shift * mean / re;
        } else {
            // scale = 1 / (r dt)
            component = (u1 - u0) * scale + angular_correction(dim, te) * mean / re;
        }
        sum += area * component * component;
    });

    double tail = 0.0;
    for (int k = 0; k < ops.size(); ++k) {
        if (ops.grid.node_r(k) >= r_min) tail += ops.potential[k] * u[k] * u[k];
    }
    return sum + (g.critical_lambda() - ops.lambda) * tail;
}

TruncatedForms truncated_forms(const OperatorSet& ops, const Field& u, double r_min) {
    check_size(ops, u, "truncated_forms");
    const Grid& g = ops.grid;
    double dirichlet = 0.0;
    for_each_edge(g, true, [&](int k0, int k1, double area, double scale, double re, double,
                               bool radial) {
        const double inner_r = radial ? re - 0.5 * g.delta_r() : re;
        if (inner_r < r_min) return;
        const double d = (value_at(u, k1) - value_at(u, k0)) * scale;
        dirichlet += area * d * d;
    });
    double potential = 0.0;
    for (int k = 0; k < ops.size(); ++k) {
        if (g.node_r(k) >= r_min) potential += ops.potential[k] * u[k] * u[k];
    }
    return {dirichlet - ops.lambda * potential, dirichlet};
}

BoundaryField normal_derivative(const Grid& grid, const Field& u) {
    if (u.size() != grid.num_interior()) {
        throw PreconditionError("normal_derivative: field size does not match the grid");
    }
    const auto& faces = grid.faces();
    BoundaryField b{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(faces.size()))};
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& face = faces[f];
        if (face.location == FaceLocation::origin_limit) continue;
        b.values[static_cast<Eigen::Index>(f)] =
            (-4.0 * value_at(u, face.inner1) + value_at(u, face.inner2)) / (2.0 * face.inward_step);
    }
    return b;
}

double boundary_quadrature(const Grid& grid, const BoundaryField& b, BoundaryWeight weight) {
    const auto& faces = grid.faces();
    if (b.values.size() != static_cast<Eigen::Index>(faces.size())) {
        throw PreconditionError("boundary_quadrature: boundary field does not match the face list");
    }
    double sum = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& face = faces[f];
        double w = 1.0;
        switch (weight) {
            case BoundaryWeight::one: w = 1.0; break;
            case BoundaryWeight::abs_x_squared: w = face.r * face.r; break;
            case BoundaryWeight::x_dot_nu: w = face.x_dot_nu; break;
        }
        if (w == 0.0) continue;
        const double v = b.values[static_cast<Eigen::Index>(f)];
        sum += w * v * v * face.surface_weight;
    }
    return sum;
}

Field radial_multiplier(const Grid& grid, const Field& u) {
    if (u.size() != grid.num_interior()) {
        throw PreconditionError("radial_multiplier: field size does not match the grid");
    }
    Field out(u.size());
    const double inv = 1.0 / (2.0 * grid.delta_r());
    for (int k = 0; k < grid.num_interior(); ++k) {
        auto [i, j] = grid.node(k);
        const double up = value_at(u, grid.index(i + 1, j));
        const double down = value_at(u, grid.index(i - 1, j));
        out[k] = grid.r(i) * (up - down) * inv;
    }
    return out;
}

double mass_inner(const OperatorSet& ops, const Field& a, const Field& b) {
    check_size(ops, a, "mass_inner");
    check_size(ops, b, "mass_inner");
    return a.cwiseProduct(ops.mass).dot(b);
}

}  // namespace hardylab
