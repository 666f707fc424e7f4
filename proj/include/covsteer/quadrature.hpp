#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
// integrands. The final partition is returned so that other integrands can be
// evaluated on exactly the same nodes.

#include "covsteer/linalg.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace covsteer {

using Integrand = std::function<Vector(double)>;
using Partition = std::vector<std::pair<double, double>>;

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-12;
  int max_intervals = 4000;
};

struct QuadResult {
  Vector value;
  double error = 0.0;
  Partition partition;
};

QuadResult integrate_adaptive(const Integrand& f, double a, double b, const QuadOptions& options = {});

double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                        const QuadOptions& options = {});

struct QuadNode {
  double t;
  double weight;
};

/// The 15 Kronrod nodes of every interval, in partition order.
std::vector<QuadNode> kronrod_nodes(const Partition& partition);

}  // namespace covsteer
