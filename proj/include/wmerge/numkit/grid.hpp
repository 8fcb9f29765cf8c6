#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>

#include "wmerge/errors.hpp"

namespace wmerge::numkit {

// Dense rank-2 carrier. Row-major so checkpoint / manifest serialization is a
// straight memcpy of the storage order the formats document.
template <typename Scalar>
using Grid2 = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Grid = Grid2<double>;
using GridF = Grid2<float>;
using Vec = Eigen::VectorXd;

template <typename Derived>
std::string shape_str(const Eigen::MatrixBase<Derived>& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

template <typename A, typename B>
Grid2<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a) + " vs " + shape_str(b));
    return a * b;
}

// Row-wise softmax of m/scale with per-row max subtraction.
template <typename Scalar>
Grid2<Scalar> softmax_rows(const Grid2<Scalar>& m, Scalar scale) {
    if (!(scale > Scalar(0))) throw ArgumentError("softmax_rows: scale must be > 0");
    require_finite(m, "softmax_rows");
    Grid2<Scalar> out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Scalar mx = m.row(r).maxCoeff();
        out.row(r) = ((m.row(r).array() - mx) / scale).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

template <typename Scalar>
Grid2<Scalar> sigmoid(const Grid2<Scalar>& m) {
    require_finite(m, "sigmoid");
    return (Scalar(1) / (Scalar(1) + (-m.array()).exp())).matrix();
}

}  // namespace wmerge::numkit

namespace wmerge {
using numkit::Grid;
using numkit::Vec;
}  // namespace wmerge
