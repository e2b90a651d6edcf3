#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference in
// `serial::` and an OpenMP version in `omp::`; the unqualified entry points
// dispatch on the process-wide backend. Both versions write disjoint outputs
// per index, so results do not depend on the thread count.

#include <cstddef>
#include <span>

#include <Eigen/SparseLU>

#include "neurogrow/grid.hpp"
#include "neurogrow/spline.hpp"

namespace neurogrow::kernels {

enum class Backend { serial, openmp };

Backend backend() noexcept;
void set_backend(Backend b) noexcept;

using Lu1D = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

/// Box-window bounds for a kernel of side l: offsets [lo, lo + l - 1], centered.
constexpr int box_lo(int l) noexcept { return -(l / 2); }

namespace serial {

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y);

/// In place: values laid out as an nu x nv column-major block become
/// coefficients of the tensor system (B_v (x) B_u) c = values.
void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data);

/// Direct l x l window sums with zero padding.
void box_sum(const RealGrid& in, int l, RealGrid& out);

template <class F>
void for_each(std::size_t n, F&& f) {
    for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace serial

namespace omp {

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y);
void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data);

/// Summed-area-table window sums with zero padding.
void box_sum(const RealGrid& in, int l, RealGrid& out);

template <class F>
void for_each(std::size_t n, F&& f) {
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
}

}  // namespace omp

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y);
void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data);
void box_sum(const RealGrid& in, int l, RealGrid& out);

template <class F>
void for_each(std::size_t n, F&& f) {
    if (backend() == Backend::openmp)
        omp::for_each(n, std::forward<F>(f));
    else
        serial::for_each(n, std::forward<F>(f));
}

}  // namespace neurogrow::kernels
