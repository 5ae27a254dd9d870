#include "damrom/quadrature.hpp"

#include <cmath>

namespace damrom {

namespace {

void add_orbit(TriangleRule& rule, double a, double w) {
  // Barycentric (a, a, 1 - 2a) and its permutations.
  const double b = 1.0 - 2.0 * a;
  rule.points.push_back({a, a});
  rule.points.push_back({b, a});
  rule.points.push_back({a, b});
  for (int i = 0; i < 3; ++i) rule.weights.push_back(0.5 * w);
}

TriangleRule make_deg4() {
  TriangleRule rule;
  rule.degree = 4;
  add_orbit(rule, 0.44594849091596488632, 0.22338158967801146570);
  add_orbit(rule, 0.09157621350977074346, 0.10995174365532186764);
  return rule;
}

TriangleRule make_deg5() {
  TriangleRule rule;
  rule.degree = 5;
  const double sq = std::sqrt(15.0);
  rule.points.push_back({1.0 / 3.0, 1.0 / 3.0});
  rule.weights.push_back(0.5 * 9.0 / 40.0);
  add_orbit(rule, (6.0 - sq) / 21.0, (155.0 - sq) / 1200.0);
  add_orbit(rule, (6.0 + sq) / 21.0, (155.0 + sq) / 1200.0);
  return rule;
}

EdgeRule make_gauss3() {
  EdgeRule rule;
  rule.degree = 5;
  const double h = 0.5 * std::sqrt(3.0 / 5.0);
  rule.points = {0.5 - h, 0.5, 0.5 + h};
  rule.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  return rule;
}

}  // namespace

const TriangleRule& triangle_rule_deg4() {
  static const TriangleRule rule = make_deg4();
  return rule;
}

const TriangleRule& triangle_rule_deg5() {
  static const TriangleRule rule = make_deg5();
  return rule;
}

const EdgeRule& edge_rule_gauss3() {
  static const EdgeRule rule = make_gauss3();
  return rule;
}

namespace shape {

std::array<double, 6> p2(double r, double s) {
  const double l0 = 1.0 - r - s, l1 = r, l2 = s;
  return {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
          4.0 * l0 * l1,         4.0 * l1 * l2,         4.0 * l2 * l0};
}

std::array<std::array<double, 2>, 6> p2_grad(double r, double s) {
  const double l0 = 1.0 - r - s, l1 = r, l2 = s;
  // dl0 = (-1, -1), dl1 = (1, 0), dl2 = (0, 1)
  return {{
      {-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)},
      {4.0 * l1 - 1.0, 0.0},
      {0.0, 4.0 * l2 - 1.0},
      {4.0 * (l0 - l1), -4.0 * l1},
      {4.0 * l2, 4.0 * l1},
      {-4.0 * l2, 4.0 * (l0 - l2)},
  }};
}

}  // namespace shape

}  // namespace damrom
