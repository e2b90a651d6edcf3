#include <atomic>

#include "neurogrow/kernels.hpp"

namespace neurogrow::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::openmp};
}

Backend backend() noexcept { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) noexcept { g_backend.store(b, std::memory_order_relaxed); }

namespace serial {

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y) {
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const double* val = a.valuePtr();
    for (int r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (int k = outer[r]; k < outer[r + 1]; ++k) s += val[k] * x[inner[k]];
        y[r] = s;
    }
}

void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data) {
    Eigen::Map<Eigen::MatrixXd> block(data.data(), nu, nv);
    // B_u Y = V, column by column.
    for (int j = 0; j < nv; ++j) {
        Eigen::VectorXd col = lu_u.solve(block.col(j));
        block.col(j) = col;
    }
    // C B_v^T = Y, i.e. B_v C^T = Y^T, row by row.
    for (int i = 0; i < nu; ++i) {
        Eigen::VectorXd row = lu_v.solve(block.row(i).transpose());
        block.row(i) = row.transpose();
    }
}

void box_sum(const RealGrid& in, int l, RealGrid& out) {
    const int lo = box_lo(l);
    out = RealGrid(in.nx(), in.ny(), 0.0);
    for (int y = 0; y < in.ny(); ++y) {
        for (int x = 0; x < in.nx(); ++x) {
            double s = 0.0;
            for (int dy = lo; dy < lo + l; ++dy) {
                for (int dx = lo; dx < lo + l; ++dx) {
                    if (in.contains(x + dx, y + dy)) s += in(x + dx, y + dy);
                }
            }
            out(x, y) = s;
        }
    }
}

}  // namespace serial

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y) {
    if (backend() == Backend::openmp)
        omp::spmv(a, x, y);
    else
        serial::spmv(a, x, y);
}

void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data) {
    if (backend() == Backend::openmp)
        omp::tensor_solve(lu_u, lu_v, nu, nv, data);
    else
        serial::tensor_solve(lu_u, lu_v, nu, nv, data);
}

void box_sum(const RealGrid& in, int l, RealGrid& out) {
    if (backend() == Backend::openmp)
        omp::box_sum(in, l, out);
    else
        serial::box_sum(in, l, out);
}

}  // namespace neurogrow::kernels
