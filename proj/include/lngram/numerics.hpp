#pragma once

// Dense primitives shared by the codec, readout, backbone and analysis code.
// Everything is templated on the scalar: double is the test/oracle precision,
// float the training precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "lngram/errors.hpp"

namespace lngram {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Nonnegative entries summing to one.
using ProbVector = Eigen::VectorXd;

inline constexpr double kDefaultRmsEps = 1e-6;
inline constexpr double kKlFloor = 1e-12;

template <class T>
inline T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
inline T silu(T x) {
  return x * sigmoid(x);
}

template <class T>
inline T silu_grad(T x) {
  const T s = sigmoid(x);
  return s * (T(1) + x * (T(1) - s));
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <class Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw InputError(std::string(what) + ": non-finite entries");
  }
}

bool is_prob_vector(const ProbVector& p, double tol = 1e-9);

// x / sqrt(mean(x^2) + eps).
template <class Derived>
Vector<typename Derived::Scalar> rmsnorm(const Eigen::MatrixBase<Derived>& x,
                                         typename Derived::Scalar eps) {
  using T = typename Derived::Scalar;
  if (x.size() == 0) {
    throw DimensionError("rmsnorm: empty vector");
  }
  const T ms = x.squaredNorm() / T(x.size());
  const T inv = T(1) / std::sqrt(ms + eps);
  return (x * inv).eval();
}

// Row-wise rmsnorm. inv_rms (optional) receives 1/sqrt(ms + eps) per row.
template <class T>
Matrix<T> rmsnorm_rows(const Matrix<T>& x, T eps, Vector<T>* inv_rms = nullptr) {
  if (x.cols() == 0) {
    throw DimensionError("rmsnorm_rows: zero columns");
  }
  Matrix<T> out(x.rows(), x.cols());
  if (inv_rms) inv_rms->resize(x.rows());
  const T n = T(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T inv = T(1) / std::sqrt(x.row(i).squaredNorm() / n + eps);
    out.row(i) = x.row(i) * inv;
    if (inv_rms) (*inv_rms)(i) = inv;
  }
  return out;
}

// Gradient of rmsnorm for a single vector given the cached 1/rms.
template <class DX, class DY>
Vector<typename DX::Scalar> rmsnorm_backward(const Eigen::MatrixBase<DX>& x,
                                             typename DX::Scalar inv_rms,
                                             const Eigen::MatrixBase<DY>& dy) {
  using T = typename DX::Scalar;
  const T n = T(x.size());
  const T proj = x.dot(dy);
  return (dy * inv_rms - x * (inv_rms * inv_rms * inv_rms * proj / n)).eval();
}

template <class T>
Matrix<T> rmsnorm_rows_backward(const Matrix<T>& x, const Vector<T>& inv_rms, const Matrix<T>& dy) {
  Matrix<T> dx(x.rows(), x.cols());
  const T n = T(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T r = inv_rms(i);
    const T proj = x.row(i).dot(dy.row(i));
    dx.row(i) = dy.row(i) * r - x.row(i) * (r * r * r * proj / n);
  }
  return dx;
}

// Numerically stable softmax of scores / tau.
template <class Derived>
Vector<typename Derived::Scalar> softmax_temp(const Eigen::MatrixBase<Derived>& scores,
                                              typename Derived::Scalar tau) {
  using T = typename Derived::Scalar;
  if (!(tau > T(0))) {
    throw ParameterError("softmax_temp: tau must be positive");
  }
  if (scores.size() == 0) {
    return Vector<T>();
  }
  Vector<T> s = scores / tau;
  const T m = s.maxCoeff();
  Vector<T> e = (s.array() - m).exp().matrix();
  return e / e.sum();
}

// out[t,c] = sum_i kernels[c,i] * v[t - i*dilation, c] with zero left padding.
// Rows are split into independent sequences of seq_len rows each.
template <class T>
Matrix<T> depthwise_causal_conv(const Matrix<T>& v, const Matrix<T>& kernels, int dilation,
                                Eigen::Index seq_len = -1) {
  if (dilation < 1) throw ParameterError("depthwise_causal_conv: dilation must be >= 1");
  if (kernels.cols() < 1) throw ParameterError("depthwise_causal_conv: width must be >= 1");
  if (kernels.rows() != v.cols()) {
    throw DimensionError("depthwise_causal_conv: kernel rows must equal channel count");
  }
  if (seq_len < 0) seq_len = v.rows();
  if (seq_len == 0 || v.rows() % seq_len != 0) {
    throw DimensionError("depthwise_causal_conv: rows not a multiple of seq_len");
  }
  const Eigen::Index width = kernels.cols();
  Matrix<T> out = Matrix<T>::Zero(v.rows(), v.cols());
  for (Eigen::Index base = 0; base < v.rows(); base += seq_len) {
    for (Eigen::Index t = 0; t < seq_len; ++t) {
      for (Eigen::Index i = 0; i < width; ++i) {
        const Eigen::Index src = t - i * dilation;
        if (src < 0) break;
        out.row(base + t).array() += kernels.col(i).transpose().array() * v.row(base + src).array();
      }
    }
  }
  return out;
}

// Accumulates gradients of depthwise_causal_conv into dv and dkernels.
template <class T>
void depthwise_causal_conv_backward(const Matrix<T>& v, const Matrix<T>& kernels, int dilation,
                                    Eigen::Index seq_len, const Matrix<T>& dout, Matrix<T>& dv,
                                    Matrix<T>& dkernels) {
  const Eigen::Index width = kernels.cols();
  for (Eigen::Index base = 0; base < v.rows(); base += seq_len) {
    for (Eigen::Index t = 0; t < seq_len; ++t) {
      for (Eigen::Index i = 0; i < width; ++i) {
        const Eigen::Index src = t - i * dilation;
        if (src < 0) break;
        dv.row(base + src).array() += kernels.col(i).transpose().array() * dout.row(base + t).array();
        dkernels.col(i).array() += (dout.row(base + t).array() * v.row(base + src).array()).transpose();
      }
    }
  }
}

// sum_i p_i ln(p_i / q_i) with q floored at 1e-12 and 0 ln 0 = 0.
double kl_divergence(const ProbVector& p, const ProbVector& q);

// Central differences in double precision. Throws OracleError on non-finite f.
Eigen::VectorXd finite_difference_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& z, double h);

// ||a - b|| / max(||a||, ||b||, floor). Case-level relative error used by the
// gradient checks; elementwise ratios are meaningless for near-zero components.
template <class DA, class DB>
double vector_relative_error(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                             double floor = 1e-300) {
  if (a.size() != b.size()) throw DimensionError("vector_relative_error: size mismatch");
  const auto ad = a.template cast<double>().eval();
  const auto bd = b.template cast<double>().eval();
  const double scale = std::max({ad.norm(), bd.norm(), floor});
  return (ad - bd).norm() / scale;
}

}  // namespace lngram
