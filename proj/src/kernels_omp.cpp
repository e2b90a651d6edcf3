#include <vector>

#include "neurogrow/kernels.hpp"

namespace neurogrow::kernels::omp {

void spmv(const SparseOp& a, std::span<const double> x, std::span<double> y) {
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const double* val = a.valuePtr();
    const int rows = static_cast<int>(a.rows());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = outer[r]; k < outer[r + 1]; ++k) s += val[k] * x[inner[k]];
        y[r] = s;
    }
}

void tensor_solve(const Lu1D& lu_u, const Lu1D& lu_v, int nu, int nv, std::span<double> data) {
    Eigen::Map<Eigen::MatrixXd> block(data.data(), nu, nv);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < nv; ++j) {
        Eigen::VectorXd col = lu_u.solve(block.col(j));
        block.col(j) = col;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nu; ++i) {
        Eigen::VectorXd row = lu_v.solve(block.row(i).transpose());
        block.row(i) = row.transpose();
    }
}

void box_sum(const RealGrid& in, int l, RealGrid& out) {
    const int nx = in.nx();
    const int ny = in.ny();
    const int lo = box_lo(l);
    // sat(x, y) = sum of in over [0, x) x [0, y)
    const int sx = nx + 1;
    std::vector<double> sat(std::size_t(sx) * (ny + 1), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < ny; ++y) {
        double run = 0.0;
        for (int x = 0; x < nx; ++x) {
            run += in(x, y);
            sat[std::size_t(y + 1) * sx + x + 1] = run;
        }
    }
#pragma omp parallel for schedule(static)
    for (int x = 1; x <= nx; ++x) {
        for (int y = 1; y <= ny; ++y) sat[std::size_t(y) * sx + x] += sat[std::size_t(y - 1) * sx + x];
    }
    out = RealGrid(nx, ny, 0.0);
    auto clampi = [](int v, int a, int b) { return v < a ? a : (v > b ? b : v); };
#pragma omp parallel for schedule(static)
    for (int y = 0; y < ny; ++y) {
        const int y0 = clampi(y + lo, 0, ny);
        const int y1 = clampi(y + lo + l, 0, ny);
        for (int x = 0; x < nx; ++x) {
            const int x0 = clampi(x + lo, 0, nx);
            const int x1 = clampi(x + lo + l, 0, nx);
            out(x, y) = sat[std::size_t(y1) * sx + x1] - sat[std::size_t(y0) * sx + x1] -
                        sat[std::size_t(y1) * sx + x0] + sat[std::size_t(y0) * sx + x0];
        }
    }
}

}  // namespace neurogrow::kernels::omp
