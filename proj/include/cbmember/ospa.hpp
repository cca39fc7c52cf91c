#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cbmember/assignment.hpp"
#include "cbmember/rfs.hpp"

namespace cbmember {

struct OspaParams {
  double order = 2.0;     // p
  double cutoff = 100.0;  // c (m)

  void validate() const {
    if (!(order >= 1.0) || !std::isfinite(order)) throw std::invalid_argument("OSPA order must be >= 1");
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw std::invalid_argument("OSPA cutoff must be positive");
  }
};

/// total^p = localization^p + cardinality^p.
struct OspaResult {
  double total = 0.0;
  double localization = 0.0;
  double cardinality = 0.0;
};

/// OSPA distance between two finite sets of planar points, with the optimal
/// assignment solved exactly on the cutoff distance matrix.
inline OspaResult ospa(std::span<const Eigen::Vector2d> x, std::span<const Eigen::Vector2d> y,
                       const OspaParams& params) {
  params.validate();
  for (const auto& p : x)
    if (!p.allFinite()) throw std::invalid_argument("OSPA: non-finite point");
  for (const auto& p : y)
    if (!p.allFinite()) throw std::invalid_argument("OSPA: non-finite point");
  // Canonical argument order keeps ospa(X, Y) and ospa(Y, X) bit-identical.
  const auto lex_less = [](std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
                                          return u.x() < v.x() || (u.x() == v.x() && u.y() < v.y());
                                        });
  };
  if (x.size() > y.size() || (x.size() == y.size() && lex_less(y, x))) std::swap(x, y);
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  OspaResult out;
  if (n == 0) return out;

  const double p = params.order;
  const double c = params.cutoff;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::pow(std::min((x[i] - y[j]).norm(), c), p);
  const double loc_sum = m > 0 ? solve_assignment(cost).cost : 0.0;
  const double card_sum = std::pow(c, p) * static_cast<double>(n - m);
  const double nn = static_cast<double>(n);
  out.localization = std::pow(loc_sum / nn, 1.0 / p);
  out.cardinality = std::pow(card_sum / nn, 1.0 / p);
  out.total = std::min(c, std::pow((loc_sum + card_sum) / nn, 1.0 / p));
  return out;
}

/// OSPA on the position components of two state sets.
inline OspaResult ospa(std::span<const StateVector> x, std::span<const StateVector> y, const OspaParams& params) {
  std::vector<Eigen::Vector2d> px, py;
  px.reserve(x.size());
  py.reserve(y.size());
  for (const auto& s : x) px.push_back(position(s));
  for (const auto& s : y) py.push_back(position(s));
  return ospa(std::span<const Eigen::Vector2d>(px), std::span<const Eigen::Vector2d>(py), params);
}

}  // namespace cbmember
