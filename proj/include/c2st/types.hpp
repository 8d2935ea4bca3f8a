#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>

namespace c2st {

// One sample per row.
using Samples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Scalar function on ambient space: a classifier logit, log p/q, a kernel witness.
using Witness = std::function<double(std::span<const double>)>;

// Same, applied to every row at once.
using BatchWitness = std::function<Eigen::VectorXd(const Samples&)>;

inline std::span<const double> row_span(const Samples& s, Eigen::Index i) {
  return {s.data() + i * s.cols(), static_cast<std::size_t>(s.cols())};
}

inline BatchWitness batched(Witness w) {
  return [w = std::move(w)](const Samples& x) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = w(row_span(x, i));
    return out;
  };
}

}  // namespace c2st
