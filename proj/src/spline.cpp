#include "neurogrow/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "neurogrow/kernels.hpp"

namespace neurogrow {

KnotVector::KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 0) throw ConfigError("negative spline degree");
    const int n = n_basis();
    if (n < degree_ + 1) throw ConfigError("knot vector carries fewer than degree+1 basis functions");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i] >= knots_[i - 1])) throw ConfigError("knot vector is not nondecreasing");
    }
    for (int k = 1; k <= degree_; ++k) {
        if (knots_[k] != knots_[0] || knots_[knots_.size() - 1 - k] != knots_.back())
            throw ConfigError("knot vector is not open (end knots must repeat degree+1 times)");
    }
    if (!(knots_.back() > knots_.front())) throw ConfigError("knot vector has an empty parametric range");
}

KnotVector KnotVector::open_uniform(int n_basis, int degree, double lo, double hi) {
    if (n_basis < degree + 1) throw ConfigError("open_uniform: need at least degree+1 basis functions");
    const int elements = n_basis - degree;
    std::vector<double> k;
    k.reserve(std::size_t(n_basis + degree + 1));
    for (int i = 0; i <= degree; ++i) k.push_back(lo);
    for (int e = 1; e < elements; ++e) k.push_back(lo + (hi - lo) * double(e) / elements);
    for (int i = 0; i <= degree; ++i) k.push_back(hi);
    return KnotVector(std::move(k), degree);
}

KnotVector KnotVector::unit_spacing(int n_basis, int degree) {
    return open_uniform(n_basis, degree, 0.0, double(n_basis - degree));
}

int KnotVector::find_span(double u) const {
    const int n = n_basis();
    const double tol = 1e-12 * std::max(1.0, back() - front());
    if (u < front() - tol || u > back() + tol)
        throw DomainError("parameter " + std::to_string(u) + " outside knot range");
    if (u >= knots_[n]) return n - 1;
    if (u <= knots_[degree_]) return degree_;
    // largest s with knots[s] <= u
    auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, u);
    return int(it - knots_.begin()) - 1;
}

namespace {

// Basis function values and derivatives up to `order` at u (Piegl & Tiller A2.3).
std::vector<std::vector<double>> ders_basis(const KnotVector& kv, int span, double u, int order) {
    const int p = kv.degree();
    const auto& U = kv.knots();
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1), right(p + 1);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - U[span + 1 - j];
        right[j] = U[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    std::vector<std::vector<double>> ders(order + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= order; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    double f = p;
    for (int k = 1; k <= order; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= f;
        f *= (p - k);
    }
    return ders;
}

double clamp_param(const KnotVector& kv, double u) { return std::clamp(u, kv.front(), kv.back()); }

}  // namespace

BasisValues basis_eval(const KnotVector& kv, double u) {
    const int span = kv.find_span(u);
    auto d = ders_basis(kv, span, clamp_param(kv, u), 0);
    return {span - kv.degree(), std::move(d[0])};
}

BasisValues basis_derivatives(const KnotVector& kv, double u, int order) {
    if (order < 1 || order > 2) throw DomainError("derivative order must be 1 or 2");
    if (order > kv.degree()) throw DomainError("derivative order exceeds spline degree");
    const int span = kv.find_span(u);
    auto d = ders_basis(kv, span, clamp_param(kv, u), order);
    return {span - kv.degree(), std::move(d[order])};
}

std::vector<double> greville_points(const KnotVector& kv) {
    const int p = kv.degree();
    const auto& U = kv.knots();
    std::vector<double> g(kv.n_basis());
    if (p == 0) {
        for (int i = 0; i < kv.n_basis(); ++i) g[i] = 0.5 * (U[i] + U[i + 1]);
        return g;
    }
    for (int i = 0; i < kv.n_basis(); ++i) {
        double s = 0.0;
        for (int k = 1; k <= p; ++k) s += U[i + k];
        g[i] = s / p;
    }
    return g;
}

SplineSpace2D::SplineSpace2D(KnotVector u, KnotVector v)
    : ku(std::move(u)), kv(std::move(v)), greville_u(greville_points(ku)), greville_v(greville_points(kv)) {}

SplineSpace2D SplineSpace2D::unit_mesh(int nu, int nv) {
    return SplineSpace2D(KnotVector::unit_spacing(nu, 3), KnotVector::unit_spacing(nv, 3));
}

Collocation1D assemble_collocation_1d(const KnotVector& kv, const std::vector<double>& sites) {
    using T = Eigen::Triplet<double>;
    const int p = kv.degree();
    const int n = kv.n_basis();
    const int rows = int(sites.size());
    std::vector<T> tv, t1, t2;
    for (int r = 0; r < rows; ++r) {
        const int span = kv.find_span(sites[r]);
        const int order = std::min(2, p);
        auto d = ders_basis(kv, span, clamp_param(kv, sites[r]), order);
        for (int k = 0; k <= p; ++k) {
            const int col = span - p + k;
            tv.emplace_back(r, col, d[0][k]);
            if (order >= 1) t1.emplace_back(r, col, d[1][k]);
            if (order >= 2) t2.emplace_back(r, col, d[2][k]);
        }
    }
    Collocation1D out;
    out.value.resize(rows, n);
    out.d1.resize(rows, n);
    out.d2.resize(rows, n);
    out.value.setFromTriplets(tv.begin(), tv.end());
    out.d1.setFromTriplets(t1.begin(), t1.end());
    out.d2.setFromTriplets(t2.begin(), t2.end());
    return out;
}

namespace {

// Operator on the flattened index j*nu + i from 1D factors acting on i (a_u) and j (a_v).
SparseOp kron(const SparseOp& a_v, const SparseOp& a_u) {
    const int nu = int(a_u.rows());
    const int nv = int(a_v.rows());
    const int cu = int(a_u.cols());
    SparseOp out(nu * nv, cu * int(a_v.cols()));
    out.reserve(Eigen::VectorXi::Constant(nu * nv, int(a_u.nonZeros() / std::max(1, nu) + 1) *
                                                        int(a_v.nonZeros() / std::max(1, nv) + 1)));
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            const int row = j * nu + i;
            for (SparseOp::InnerIterator iv(a_v, j); iv; ++iv) {
                for (SparseOp::InnerIterator iu(a_u, i); iu; ++iu) {
                    out.insert(row, int(iv.col()) * cu + int(iu.col())) = iv.value() * iu.value();
                }
            }
        }
    }
    out.makeCompressed();
    return out;
}

}  // namespace

struct CollocationOperators::Factor1D {
    kernels::Lu1D lu;
};

CollocationOperators CollocationOperators::assemble(const SplineSpace2D& space) {
    const auto cu = assemble_collocation_1d(space.ku, space.greville_u);
    const auto cv = assemble_collocation_1d(space.kv, space.greville_v);
    CollocationOperators ops;
    ops.nu_ = space.nu();
    ops.nv_ = space.nv();
    ops.n_ = kron(cv.value, cu.value);
    ops.nx_ = kron(cv.value, cu.d1);
    ops.ny_ = kron(cv.d1, cu.value);
    ops.nxx_ = kron(cv.value, cu.d2);
    ops.nyy_ = kron(cv.d2, cu.value);
    ops.nxy_ = kron(cv.d1, cu.d1);

    auto factor = [](const SparseOp& m, const char* dir) {
        auto f = std::make_shared<Factor1D>();
        Eigen::SparseMatrix<double> cm(m);
        cm.makeCompressed();
        f->lu.compute(cm);
        if (f->lu.info() != Eigen::Success)
            throw ConfigError(std::string("singular collocation matrix in ") + dir + " direction");
        return std::shared_ptr<const Factor1D>(std::move(f));
    };
    ops.lu_u_ = factor(cu.value, "u");
    ops.lu_v_ = factor(cv.value, "v");
    return ops;
}

std::vector<double> CollocationOperators::apply(const SparseOp& op, std::span<const double> coeffs) const {
    std::vector<double> out(std::size_t(op.rows()));
    kernels::spmv(op, coeffs, out);
    return out;
}

std::vector<double> CollocationOperators::solve(std::span<const double> values) const {
    std::vector<double> c(values.begin(), values.end());
    kernels::tensor_solve(lu_u_->lu, lu_v_->lu, nu_, nv_, c);
    return c;
}

Field Field::from_values(const CollocationOperators& ops, std::vector<double> values) {
    Field f;
    f.coeffs = ops.solve(values);
    f.values = std::move(values);
    return f;
}

Field Field::from_coeffs(const CollocationOperators& ops, std::vector<double> coeffs) {
    Field f;
    f.values = ops.apply(ops.N(), coeffs);
    f.coeffs = std::move(coeffs);
    return f;
}

namespace {

constexpr std::array<double, 4> kGaussX = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                           0.8611363115940526};
constexpr std::array<double, 4> kGaussW = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                           0.3478548451374538};

struct QuadPoint1D {
    double weight;
    int first;
    std::vector<double> n, d;
};

std::vector<QuadPoint1D> quadrature_1d(const KnotVector& kv) {
    std::vector<QuadPoint1D> q;
    const auto& U = kv.knots();
    const int p = kv.degree();
    for (int s = p; s < kv.n_basis(); ++s) {
        const double a = U[s], b = U[s + 1];
        if (!(b > a)) continue;
        for (int g = 0; g < 4; ++g) {
            const double u = 0.5 * (a + b) + 0.5 * (b - a) * kGaussX[g];
            auto d = ders_basis(kv, s, u, std::min(1, p));
            QuadPoint1D qp{0.5 * (b - a) * kGaussW[g], s - p, d[0],
                           p >= 1 ? d[1] : std::vector<double>(p + 1, 0.0)};
            q.push_back(std::move(qp));
        }
    }
    return q;
}

}  // namespace

double integrate_gradient_squared(const SplineSpace2D& space, std::span<const double> coeffs) {
    const auto qu = quadrature_1d(space.ku);
    const auto qv = quadrature_1d(space.kv);
    const int nu = space.nu();
    const int pu = space.ku.degree(), pv = space.kv.degree();
    double total = 0.0;
    for (const auto& b : qv) {
        for (const auto& a : qu) {
            double gx = 0.0, gy = 0.0;
            for (int l = 0; l <= pv; ++l) {
                for (int k = 0; k <= pu; ++k) {
                    const double c = coeffs[std::size_t(b.first + l) * nu + a.first + k];
                    gx += a.d[k] * b.n[l] * c;
                    gy += a.n[k] * b.d[l] * c;
                }
            }
            total += a.weight * b.weight * (gx * gx + gy * gy);
        }
    }
    return total;
}

SplineSample evaluate(const SplineSpace2D& space, std::span<const double> coeffs, Point pt) {
    const int su = space.ku.find_span(pt.x);
    const int sv = space.kv.find_span(pt.y);
    const int pu = space.ku.degree(), pv = space.kv.degree();
    auto du = ders_basis(space.ku, su, clamp_param(space.ku, pt.x), std::min(1, pu));
    auto dv = ders_basis(space.kv, sv, clamp_param(space.kv, pt.y), std::min(1, pv));
    SplineSample s;
    const int nu = space.nu();
    for (int l = 0; l <= pv; ++l) {
        for (int k = 0; k <= pu; ++k) {
            const double c = coeffs[std::size_t(sv - pv + l) * nu + su - pu + k];
            s.value += du[0][k] * dv[0][l] * c;
            if (pu >= 1) s.dx += du[1][k] * dv[0][l] * c;
            if (pv >= 1) s.dy += du[0][k] * dv[1][l] * c;
        }
    }
    return s;
}

}  // namespace neurogrow
