#pragma once

// Independent reference computations for the tests, built on Eigen so they
// share no code with the library's own linear algebra.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hda/linalg.hpp"
#include "hda/subspace.hpp"

namespace oracle {

using hda::Matrix;
using hda::Vector;

inline Eigen::VectorXd to_eigen(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline Vector from_eigen(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

inline Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

/// d x k matrix whose columns are the centered features.
inline Eigen::MatrixXd centered_columns(const std::vector<Vector>& features) {
  const Eigen::Index d = static_cast<Eigen::Index>(features.front().size());
  const Eigen::Index k = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd x(d, k);
  for (Eigen::Index j = 0; j < k; ++j) x.col(j) = to_eigen(features[j]);
  const Eigen::VectorXd mean = x.rowwise().mean();
  return x.colwise() - mean;
}

inline Eigen::VectorXd mean_of(const std::vector<Vector>& features) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.front().size()));
  for (const auto& f : features) acc += to_eigen(f);
  return acc / static_cast<double>(features.size());
}

/// Squared residual of the least-squares fit of (p - mean) by the centered
/// features themselves, i.e. min_c |mean + X c - p|^2.
inline double least_squares_distance_sq(const std::vector<Vector>& features, const Vector& p) {
  const Eigen::MatrixXd x = centered_columns(features);
  const Eigen::VectorXd rhs = to_eigen(p) - mean_of(features);
  const Eigen::VectorXd c = x.completeOrthogonalDecomposition().solve(rhs);
  return (x * c - rhs).squaredNorm();
}

/// Orthogonal projector onto the span of the centered features, from the
/// eigendecomposition of their scatter matrix. Eigenvalues are squared
/// singular values, so numerically null directions sit near 1e-16 * top.
inline Eigen::MatrixXd scatter_projector(const std::vector<Vector>& features, double eigen_cutoff = 1e-10) {
  const Eigen::MatrixXd x = centered_columns(features);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x * x.transpose());
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > eigen_cutoff * top) p += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
  }
  return p;
}

inline Eigen::VectorXd singular_values(const std::vector<Vector>& features) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(centered_columns(features)).singularValues();
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases.
inline Eigen::VectorXd principal_cosines(const Matrix& a, const Matrix& b) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(a).transpose() * to_eigen(b)).singularValues();
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

inline std::vector<Vector> random_features(std::size_t d, std::size_t k, std::mt19937_64& rng) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(random_vector(d, rng));
  return out;
}

inline double relative_difference(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace oracle
