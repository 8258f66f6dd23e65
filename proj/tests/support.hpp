#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

#include "godsbox/rng.hpp"

namespace testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gaussian(Index rows, Index cols, godsbox::SplitMix64& rng) {
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

/// Classical Gram-Schmidt, written independently of the library's QR.
inline MatrixXd gram_schmidt(const MatrixXd& a) {
  MatrixXd q = a;
  for (Index j = 0; j < a.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    }
    q.col(j) /= q.col(j).norm();
  }
  return q;
}

inline MatrixXd projector(const MatrixXd& q) { return q * q.transpose(); }

/// Random orthonormal d x k frame from the library-independent oracle.
inline MatrixXd random_frame(Index d, Index k, godsbox::SplitMix64& rng) {
  return gram_schmidt(gaussian(d, k, rng));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 gen(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("godsbox_" + tag + "_" + std::to_string(gen()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
