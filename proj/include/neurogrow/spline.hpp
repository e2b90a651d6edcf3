#pragma once

// Cubic B-spline spaces and strong-form collocation operators.
//
// Solver unknowns are control coefficients. Values at the Greville points are
// recovered with the value operator N; coefficients are recovered from values
// through a factorization of N that exploits its tensor-product structure
// (N = N_v (x) N_u), so only two banded 1D systems are ever factored.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "neurogrow/grid.hpp"

namespace neurogrow {

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

class KnotVector {
public:
    /// Validates an open, nondecreasing knot vector of the given degree.
    KnotVector(std::vector<double> knots, int degree);

    /// Open uniform knots on [lo, hi] carrying `n_basis` functions.
    static KnotVector open_uniform(int n_basis, int degree, double lo, double hi);

    /// Open uniform knots with unit knot spacing starting at 0.
    static KnotVector unit_spacing(int n_basis, int degree = 3);

    int degree() const noexcept { return degree_; }
    int n_basis() const noexcept { return int(knots_.size()) - degree_ - 1; }
    double front() const noexcept { return knots_.front(); }
    double back() const noexcept { return knots_.back(); }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Span index s with knots[s] <= u < knots[s+1]; the last nonempty span at u == back().
    int find_span(double u) const;

private:
    std::vector<double> knots_;
    int degree_;
};

/// The p+1 nonzero basis values (or derivatives) at a parameter, for
/// basis functions first, first+1, ..., first+p.
struct BasisValues {
    int first = 0;
    std::vector<double> values;
};

BasisValues basis_eval(const KnotVector& kv, double u);

/// Derivatives of the active basis functions; order must be 1 or 2 and <= degree.
BasisValues basis_derivatives(const KnotVector& kv, double u, int order);

std::vector<double> greville_points(const KnotVector& kv);

struct SplineSpace2D {
    KnotVector ku;
    KnotVector kv;
    std::vector<double> greville_u;
    std::vector<double> greville_v;

    SplineSpace2D(KnotVector u, KnotVector v);

    /// Cubic space on an nu x nv control mesh with unit knot spacing.
    static SplineSpace2D unit_mesh(int nu, int nv);

    int nu() const noexcept { return ku.n_basis(); }
    int nv() const noexcept { return kv.n_basis(); }
    int size() const noexcept { return nu() * nv(); }
    Point point(int i, int j) const { return {greville_u[i], greville_v[j]}; }
};

/// Banded 1D collocation matrices of one parametric direction.
struct Collocation1D {
    SparseOp value;
    SparseOp d1;
    SparseOp d2;
};

Collocation1D assemble_collocation_1d(const KnotVector& kv, const std::vector<double>& sites);

class CollocationOperators {
public:
    static CollocationOperators assemble(const SplineSpace2D& space);

    int nu() const noexcept { return nu_; }
    int nv() const noexcept { return nv_; }
    int size() const noexcept { return nu_ * nv_; }

    const SparseOp& N() const noexcept { return n_; }
    const SparseOp& Nx() const noexcept { return nx_; }
    const SparseOp& Ny() const noexcept { return ny_; }
    const SparseOp& Nxx() const noexcept { return nxx_; }
    const SparseOp& Nyy() const noexcept { return nyy_; }
    const SparseOp& Nxy() const noexcept { return nxy_; }

    /// Applies an operator to a coefficient vector (values/derivatives at Greville points).
    std::vector<double> apply(const SparseOp& op, std::span<const double> coeffs) const;

    /// Coefficients c with N c = values.
    std::vector<double> solve(std::span<const double> values) const;

private:
    struct Factor1D;

    int nu_ = 0;
    int nv_ = 0;
    SparseOp n_, nx_, ny_, nxx_, nyy_, nxy_;
    std::shared_ptr<const Factor1D> lu_u_;
    std::shared_ptr<const Factor1D> lu_v_;
};

/// Spline field: control coefficients plus the companion values at Greville points.
struct Field {
    std::vector<double> coeffs;
    std::vector<double> values;

    static Field from_values(const CollocationOperators& ops, std::vector<double> values);
    static Field from_coeffs(const CollocationOperators& ops, std::vector<double> coeffs);
};

/// Tensor-product Gauss-Legendre quadrature of a pointwise integrand built
/// from the field's value and first derivatives, exact for spline products up
/// to degree 7 per direction.
double integrate_gradient_squared(const SplineSpace2D& space, std::span<const double> coeffs);

/// Evaluates value/derivatives of a spline with coefficients c at a physical point.
struct SplineSample {
    double value = 0, dx = 0, dy = 0;
};
SplineSample evaluate(const SplineSpace2D& space, std::span<const double> coeffs, Point p);

}  // namespace neurogrow
