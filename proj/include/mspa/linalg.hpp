#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mspa {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major so a candidate matrix holds one embedding per contiguous row.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = Vec<double>;
using Matrix = Mat<double>;

inline constexpr double kUnitNormTol = 1e-6;

template <typename Derived>
bool is_unit_norm(const Eigen::MatrixBase<Derived>& v,
                  typename Derived::Scalar tol = typename Derived::Scalar(kUnitNormTol)) {
  using std::abs;
  return abs(v.norm() - typename Derived::Scalar(1)) <= tol;
}

template <typename Derived>
typename Derived::Scalar cosine(const Eigen::MatrixBase<Derived>& a,
                                const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

// Numerically stable log(sum(exp(x))).
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  const Scalar hi = x.maxCoeff();
  return hi + log((x.array() - hi).exp().sum());
}

template <typename Derived>
Vec<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& x) {
  return (x.array() - log_sum_exp(x)).matrix();
}

template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar hi = x.maxCoeff();
  Vec<Scalar> e = (x.array() - hi).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace mspa
