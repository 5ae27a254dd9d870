#pragma once

#include <array>
#include <span>
#include <vector>

namespace damrom {

/// Quadrature on the reference triangle {(r, s): r, s >= 0, r + s <= 1}.
/// Weights sum to the reference area 1/2.
struct TriangleRule {
  std::vector<std::array<double, 2>> points;  // (r, s)
  std::vector<double> weights;
  int degree = 0;
};

/// Quadrature on the reference segment [0, 1]; weights sum to 1.
struct EdgeRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Six-point rule, exact for degree 4. Used by all operator assembly.
const TriangleRule& triangle_rule_deg4();
/// Seven-point rule, exact for degree 5. Used for error norms.
const TriangleRule& triangle_rule_deg5();
/// Three-point Gauss-Legendre, exact for degree 5.
const EdgeRule& edge_rule_gauss3();

/// Lagrange shape functions on the reference triangle.
namespace shape {

inline std::array<double, 3> p1(double r, double s) { return {1.0 - r - s, r, s}; }

/// Reference gradients (d/dr, d/ds) of the P1 basis; constant.
inline constexpr std::array<std::array<double, 2>, 3> p1_grad = {{{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}}};

/// P2 basis: vertices 0, 1, 2 then midpoints of edges (0,1), (1,2), (2,0).
std::array<double, 6> p2(double r, double s);
std::array<std::array<double, 2>, 6> p2_grad(double r, double s);

}  // namespace shape

}  // namespace damrom
