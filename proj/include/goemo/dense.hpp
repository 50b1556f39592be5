#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <sstream>
#include <string>

namespace goemo {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
// 0/1 label indicators, one row per example.
using BinaryMatrix = MatrixX<std::uint8_t>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace goemo
