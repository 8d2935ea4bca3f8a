#pragma once

#include <cstddef>
#include <vector>

namespace c2st {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

enum class QuadratureRule { kTrapezoid, kGaussLegendre };

// Tensor-product rule on a 1D or 2D box. Nodes are stored flattened with the
// last axis varying fastest.
class QuadratureGrid {
 public:
  static constexpr std::size_t kMinNodes = 16;
  static constexpr std::size_t kDefaultNodes1d = 2048;
  static constexpr std::size_t kDefaultNodes2d = 256;

  QuadratureGrid(std::vector<Interval> bounds, std::size_t nodes_per_axis,
                 QuadratureRule rule = QuadratureRule::kGaussLegendre);

  std::size_t dim() const { return bounds_.size(); }
  const std::vector<Interval>& bounds() const { return bounds_; }
  std::size_t nodes_per_axis() const { return nodes_per_axis_; }
  QuadratureRule rule() const { return rule_; }
  std::size_t size() const { return weights_.size(); }

  // Node j, coordinates [dim*j, dim*j + dim).
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  double volume() const;

  // Same box, twice the nodes per axis.
  QuadratureGrid refined() const;

 private:
  std::vector<Interval> bounds_;
  std::size_t nodes_per_axis_;
  QuadratureRule rule_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

// Gauss-Legendre nodes and weights on [-1, 1], ascending.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace c2st
