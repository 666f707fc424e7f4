#include "covsteer/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace covsteer {
namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b;
  Vector value;
  double error;
};

Piece gk15(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Vector fc = f(center);
  Vector kronrod = kWgk[7] * fc;
  Vector gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    Vector f1 = f(center - dx);
    Vector f2 = f(center + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  double err = kronrod.size() ? (kronrod - gauss).cwiseAbs().maxCoeff() : 0.0;
  return {a, b, std::move(kronrod), err};
}

}  // namespace

QuadResult integrate_adaptive(const Integrand& f, double a, double b, const QuadOptions& options) {
  std::vector<Piece> pieces;
  pieces.push_back(gk15(f, a, b));
  auto total = [&pieces] {
    Vector v = pieces.front().value;
    double e = pieces.front().error;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      v += pieces[i].value;
      e += pieces[i].error;
    }
    return std::make_pair(v, e);
  };
  auto [value, error] = total();
  while (static_cast<int>(pieces.size()) < options.max_intervals) {
    double scale = value.size() ? value.cwiseAbs().maxCoeff() : 0.0;
    if (error <= std::max(options.abs_tol, options.rel_tol * scale)) break;
    auto worst = std::max_element(pieces.begin(), pieces.end(),
                                  [](const Piece& x, const Piece& y) { return x.error < y.error; });
    const double mid = 0.5 * (worst->a + worst->b);
    if (mid <= worst->a || mid >= worst->b) break;
    Piece left = gk15(f, worst->a, mid);
    Piece right = gk15(f, mid, worst->b);
    *worst = std::move(left);
    pieces.insert(worst + 1, std::move(right));
    std::tie(value, error) = total();
  }
  QuadResult out;
  out.value = std::move(value);
  out.error = error;
  out.partition.reserve(pieces.size());
  for (const auto& p : pieces) out.partition.emplace_back(p.a, p.b);
  return out;
}

double integrate_scalar(const std::function<double(double)>& f, double a, double b, const QuadOptions& options) {
  Integrand g = [&f](double t) {
    Vector v(1);
    v(0) = f(t);
    return v;
  };
  return integrate_adaptive(g, a, b, options).value(0);
}

std::vector<QuadNode> kronrod_nodes(const Partition& partition) {
  std::vector<QuadNode> nodes;
  nodes.reserve(partition.size() * 15);
  for (const auto& [a, b] : partition) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int j = 0; j < 7; ++j) nodes.push_back({center - half * kXgk[j], half * kWgk[j]});
    nodes.push_back({center, half * kWgk[7]});
    for (int j = 6; j >= 0; --j) nodes.push_back({center + half * kXgk[j], half * kWgk[j]});
  }
  return nodes;
}

}  // namespace covsteer
