#include "damrom/assembly.hpp"

#include <cmath>
#include <string>

#include "damrom/error.hpp"
#include "damrom/quadrature.hpp"

namespace damrom {

namespace {

struct AffineMap {
  Point2 origin;
  double dx1, dy1, dx2, dy2, det;

  Point2 to_physical(double r, double s) const {
    return {origin.x + dx1 * r + dx2 * s, origin.y + dy1 * r + dy2 * s};
  }
  std::array<double, 2> grad(const std::array<double, 2>& g) const {
    return {(dy2 * g[0] - dy1 * g[1]) / det, (-dx2 * g[0] + dx1 * g[1]) / det};
  }
};

AffineMap affine_map(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles()[t];
  const Point2 a = mesh.node(tri[0]), b = mesh.node(tri[1]), c = mesh.node(tri[2]);
  AffineMap m{a, b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y, 0.0};
  m.det = m.dx1 * m.dy2 - m.dx2 * m.dy1;
  const double scale = std::abs(m.dx1 * m.dy2) + std::abs(m.dx2 * m.dy1);
  if (!(m.det > 1e-14 * scale) || !std::isfinite(m.det))
    throw NumericalError("element " + std::to_string(t) + " has a singular Jacobian");
  return m;
}

std::array<double, 3> edge_p2(double s) { return {(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)}; }

void check_finite(const Eigen::VectorXd& P) {
  for (Index i = 0; i < P.size(); ++i) {
    if (!std::isfinite(P[i])) throw NumericalError("non-finite pressure at dof " + std::to_string(i));
  }
}

}  // namespace

SpMat assemble_elastic_stiffness(const Mesh& mesh, const DofMap& dofs, const ElasticParams& elastic) {
  const double lam = elastic.lambda, mu = elastic.mu, l2m = lam + 2.0 * mu;
  const TriangleRule& rule = triangle_rule_deg4();
  std::vector<std::array<std::array<double, 2>, 6>> ref_grads;
  for (const auto& q : rule.points) ref_grads.push_back(shape::p2_grad(q[0], q[1]));

  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(mesh.num_triangles() * 144);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map = affine_map(mesh, t);
    double ke[12][12] = {};
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double w = rule.weights[q] * map.det;
      std::array<std::array<double, 2>, 6> g;
      for (int a = 0; a < 6; ++a) g[a] = map.grad(ref_grads[q][a]);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double ax = g[a][0], ay = g[a][1], bx = g[b][0], by = g[b][1];
          ke[2 * a][2 * b] += w * (l2m * ax * bx + mu * ay * by);
          ke[2 * a][2 * b + 1] += w * (lam * ax * by + mu * ay * bx);
          ke[2 * a + 1][2 * b] += w * (lam * ay * bx + mu * ax * by);
          ke[2 * a + 1][2 * b + 1] += w * (l2m * ay * by + mu * ax * bx);
        }
      }
    }
    const auto ud = dofs.element_u_dofs(t);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) trips.emplace_back(static_cast<int>(ud[i]), static_cast<int>(ud[j]), ke[i][j]);
  }
  SpMat K(dofs.num_u(), dofs.num_u());
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

namespace {

std::vector<Index> flat_u_dofs(const Mesh& mesh, const DofMap& dofs) {
  std::vector<Index> out;
  out.reserve(mesh.num_triangles() * 12);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto d = dofs.element_u_dofs(t);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

std::vector<Index> flat_p_dofs(const Mesh& mesh, const DofMap& dofs) {
  std::vector<Index> out;
  out.reserve(mesh.num_triangles() * 3);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto d = dofs.element_p_dofs(t);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

}  // namespace

Assembler::Assembler(std::shared_ptr<const Mesh> mesh, MaterialParams material, BoundarySetup setup,
                     PhysicsOptions options)
    : mesh_(std::move(mesh)),
      dofs_(*mesh_),
      material_(material),
      setup_(std::move(setup)),
      options_(std::move(options)),
      up_pattern_(dofs_.num_u(), dofs_.num_p(), 12, 3, flat_u_dofs(*mesh_, dofs_), flat_p_dofs(*mesh_, dofs_)),
      pu_pattern_(dofs_.num_p(), dofs_.num_u(), 3, 12, flat_p_dofs(*mesh_, dofs_), flat_u_dofs(*mesh_, dofs_)),
      pp_pattern_(dofs_.num_p(), dofs_.num_p(), 3, 3, flat_p_dofs(*mesh_, dofs_), flat_p_dofs(*mesh_, dofs_)) {
  material_.validate();
  K_ = std::make_shared<const SpMat>(assemble_elastic_stiffness(*mesh_, dofs_, material_.elastic));

  const TriangleRule& rule = triangle_rule_deg4();
  cache_.resize(mesh_->num_triangles());
  for (std::size_t t = 0; t < mesh_->num_triangles(); ++t) {
    const AffineMap map = affine_map(*mesh_, t);
    ElementCache& ec = cache_[t];
    for (int a = 0; a < 3; ++a) ec.grad_p[a] = map.grad(shape::p1_grad[a]);
    ec.qp.resize(rule.points.size());
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double r = rule.points[q][0], s = rule.points[q][1];
      QuadPoint& qp = ec.qp[q];
      qp.weight = rule.weights[q] * map.det;
      qp.x = map.to_physical(r, s);
      qp.n_u = shape::p2(r, s);
      qp.n_p = shape::p1(r, s);
      const auto g = shape::p2_grad(r, s);
      for (int a = 0; a < 6; ++a) {
        const auto pg = map.grad(g[a]);
        qp.div[2 * a] = pg[0];
        qp.div[2 * a + 1] = pg[1];
      }
    }
  }

  const SpMat& hp = pp_pattern_.zero_matrix();
  for (const auto& e : mesh_->boundary_edges()) {
    EdgeCache ec{e.tag, e.nodes, dofs_.edge_node(e.nodes[0], e.nodes[1]), mesh_->edge_length(e),
                 mesh_->outward_normal(e), mesh_->node(e.nodes[0]), mesh_->node(e.nodes[1])};
    edges_.push_back(ec);
    const Index a = DofMap::p_dof(e.nodes[0]), b = DofMap::p_dof(e.nodes[1]);
    seepage_slots_.push_back({find_slot(hp, a, a), find_slot(hp, a, b), find_slot(hp, b, a), find_slot(hp, b, b)});
  }

  build_constraints();
}

void Assembler::build_constraints() {
  for (const auto& e : edges_) {
    const MechanicalBC& mech = setup_.mech(e.tag);
    if (mech.fix_x || mech.fix_y) {
      for (int node : {e.vertices[0], e.vertices[1], e.midpoint}) {
        const Point2 x = dofs_.node_position(node);
        const Point2 value = mech.displacement ? mech.displacement(x) : Point2{};
        if (mech.fix_x) constraints_.add(DofMap::u_dof(node, 0), value.x);
        if (mech.fix_y) constraints_.add(DofMap::u_dof(node, 1), value.y);
      }
    }
    const FlowBC& flow = setup_.hyd(e.tag);
    if (flow.kind == FlowBCKind::Dirichlet) {
      if (!flow.pressure) throw ConfigError(std::string("Dirichlet pressure on ") + std::string(tag_name(e.tag)) + " has no value");
      for (int v : e.vertices) {
        const Index dof = dofs_.p_global(v);
        const bool first = !constraints_.contains(dof);
        constraints_.add(dof, flow.pressure(mesh_->node(v)));
        if (first) p_dirichlet_by_tag_[static_cast<std::size_t>(e.tag)].push_back(DofMap::p_dof(v));
      }
    } else if (flow.kind == FlowBCKind::Seepage && !(flow.seepage_scale >= 0.0)) {
      throw ConfigError("seepage coefficient must be non-negative");
    }
  }
}

OperatorSet Assembler::assemble(const Eigen::VectorXd& P, double t, const Eigen::VectorXd& active_P) const {
  if (P.size() != dofs_.num_p()) throw NumericalError("pressure vector has wrong size");
  check_finite(P);

  const VanGenuchtenParams& vg = material_.vg;
  const FluidSolidParams& fl = material_.fluid;
  const double gamma_w = fl.gamma_w;

  OperatorSet ops;
  ops.K = K_;
  ops.Q = up_pattern_.zero_matrix();
  ops.C = pu_pattern_.zero_matrix();
  ops.S = pp_pattern_.zero_matrix();
  ops.H = pp_pattern_.zero_matrix();
  ops.f_u = Eigen::VectorXd::Zero(dofs_.num_u());
  ops.f_p = Eigen::VectorXd::Zero(dofs_.num_p());
  ops.pressure = P;
  ops.time = t;

  double* qv = ops.Q.valuePtr();
  double* cv = ops.C.valuePtr();
  double* sv = ops.S.valuePtr();
  double* hv = ops.H.valuePtr();

  for (std::size_t e = 0; e < cache_.size(); ++e) {
    const ElementCache& ec = cache_[e];
    const auto& nodes = dofs_.element_nodes(e);
    const double pv[3] = {P[nodes[0]], P[nodes[1]], P[nodes[2]]};

    double qe[12][3] = {}, ce[3][12] = {}, se[3][3] = {};
    double k_int = 0.0;
    double fpe[3] = {}, fue[12] = {};
    for (const QuadPoint& qp : ec.qp) {
      const double p = qp.n_p[0] * pv[0] + qp.n_p[1] * pv[1] + qp.n_p[2] * pv[2];
      const HydraulicState hs = evaluate_hydraulics(p, vg, gamma_w, material_.k_min_ratio);
      const double w = qp.weight;
      for (int i = 0; i < 12; ++i) {
        const double ws = w * hs.saturation * qp.div[i];
        const double wt = w * hs.water_content * qp.div[i];
        for (int j = 0; j < 3; ++j) {
          qe[i][j] += ws * qp.n_p[j];
          ce[j][i] += wt * qp.n_p[j];
        }
      }
      const double storage = -w * (hs.capacity + hs.water_content / fl.K_w);
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l) se[j][l] += storage * qp.n_p[j] * qp.n_p[l];
      k_int += w * hs.conductivity;

      Point2 body{};
      if (options_.gravity) {
        const double rho = (1.0 - fl.porosity) * fl.rho_s + hs.water_content * fl.rho_w;
        body.y -= rho * fl.g;
      }
      if (options_.body_force) body = body + options_.body_force(qp.x);
      for (int a = 0; a < 6; ++a) {
        fue[2 * a] += w * body.x * qp.n_u[a];
        fue[2 * a + 1] += w * body.y * qp.n_u[a];
      }
      if (options_.gravity) {
        for (int j = 0; j < 3; ++j) fpe[j] -= w * hs.conductivity * ec.grad_p[j][1];
      }
      if (options_.fluid_source) {
        const double src = options_.fluid_source(qp.x);
        for (int j = 0; j < 3; ++j) fpe[j] += w * src * qp.n_p[j];
      }
    }

    const auto qs = up_pattern_.slots(e);
    const auto cs = pu_pattern_.slots(e);
    const auto ps = pp_pattern_.slots(e);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 3; ++j) {
        qv[qs[i * 3 + j]] += qe[i][j];
        cv[cs[j * 12 + i]] += ce[j][i];
      }
    const double kg = k_int / gamma_w;
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 3; ++l) {
        sv[ps[j * 3 + l]] += se[j][l];
        hv[ps[j * 3 + l]] += kg * (ec.grad_p[j][0] * ec.grad_p[l][0] + ec.grad_p[j][1] * ec.grad_p[l][1]);
      }
    for (int j = 0; j < 3; ++j) ops.f_p[nodes[j]] += fpe[j];
    for (int a = 0; a < 6; ++a) {
      ops.f_u[DofMap::u_dof(nodes[a], 0)] += fue[2 * a];
      ops.f_u[DofMap::u_dof(nodes[a], 1)] += fue[2 * a + 1];
    }
  }

  const EdgeRule& er = edge_rule_gauss3();
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const EdgeCache& ed = edges_[k];
    const MechanicalBC& mech = setup_.mech(ed.tag);
    if (mech.traction) {
      const int nodes[3] = {ed.vertices[0], ed.vertices[1], ed.midpoint};
      for (std::size_t q = 0; q < er.points.size(); ++q) {
        const double s = er.points[q];
        const double w = er.weights[q] * ed.length;
        const Point2 x = (1.0 - s) * ed.a + s * ed.b;
        const Point2 tr = mech.traction(x, ed.normal, t);
        const auto n = edge_p2(s);
        for (int a = 0; a < 3; ++a) {
          ops.f_u[DofMap::u_dof(nodes[a], 0)] += w * n[a] * tr.x;
          ops.f_u[DofMap::u_dof(nodes[a], 1)] += w * n[a] * tr.y;
        }
      }
    }
  }

  if (active_P.size() != P.size()) throw NumericalError("active-set pressure vector has wrong size");
  const SpMat R = seepage_block(active_P);
  for (Index k = 0; k < R.nonZeros(); ++k) hv[k] += R.valuePtr()[k];
  return ops;
}

SpMat Assembler::seepage_block(const Eigen::VectorXd& P) const {
  SpMat R = pp_pattern_.zero_matrix();
  double* rv = R.valuePtr();
  const EdgeRule& er = edge_rule_gauss3();
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const EdgeCache& ed = edges_[k];
    const FlowBC& flow = setup_.hyd(ed.tag);
    if (flow.kind != FlowBCKind::Seepage) continue;
    const double beta = flow.seepage_scale / ed.length;
    const double pa = P[ed.vertices[0]], pb = P[ed.vertices[1]];
    double m[2][2] = {};
    for (std::size_t q = 0; q < er.points.size(); ++q) {
      const double s = er.points[q];
      const double p = (1.0 - s) * pa + s * pb;
      if (!(p > 0.0)) continue;
      const double w = er.weights[q] * ed.length * beta;
      const double n[2] = {1.0 - s, s};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m[i][j] += w * n[i] * n[j];
    }
    const auto& sl = seepage_slots_[k];
    rv[sl[0]] += m[0][0];
    rv[sl[1]] += m[0][1];
    rv[sl[2]] += m[1][0];
    rv[sl[3]] += m[1][1];
  }
  return R;
}

void apply_dirichlet(SpMat& A, Eigen::VectorXd& b, const Constraints& constraints) {
  if (constraints.empty()) return;
  if (A.rows() != A.cols() || A.rows() != b.size()) throw NumericalError("apply_dirichlet: dimension mismatch");
  const std::vector<char> mask = constraints.mask(A.rows());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(A.rows());
  for (const auto& [dof, value] : constraints.entries()) g[dof] = value;

  for (Index c = 0; c < A.outerSize(); ++c) {
    const bool col_fixed = mask[static_cast<std::size_t>(c)] != 0;
    for (SpMat::InnerIterator it(A, c); it; ++it) {
      const bool row_fixed = mask[static_cast<std::size_t>(it.row())] != 0;
      if (col_fixed && !row_fixed) b[it.row()] -= it.value() * g[c];
      if (col_fixed || row_fixed) it.valueRef() = 0.0;
    }
  }
  for (const auto& [dof, value] : constraints.entries()) {
    A.valuePtr()[find_slot(A, dof, dof)] = 1.0;
    b[dof] = value;
  }
}

std::vector<Point2> darcy_flux(const Assembler& assembler, const Eigen::VectorXd& P) {
  const Mesh& mesh = assembler.mesh();
  const MaterialParams& mat = assembler.material();
  const double gamma_w = mat.fluid.gamma_w;
  std::vector<Point2> out(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map = affine_map(mesh, t);
    const auto& tri = mesh.triangles()[t];
    Point2 grad{};
    double p = 0.0;
    for (int a = 0; a < 3; ++a) {
      const auto g = map.grad(shape::p1_grad[a]);
      grad.x += g[0] * P[tri[a]];
      grad.y += g[1] * P[tri[a]];
      p += P[tri[a]] / 3.0;
    }
    if (assembler.options().gravity) grad.y += gamma_w;
    const double k = hydraulic_conductivity(p, mat.vg, gamma_w, mat.k_min_ratio);
    out[t] = (-k / gamma_w) * grad;
  }
  return out;
}

double BoundaryFluxes::net() const {
  double s = 0.0;
  for (double f : by_tag) s += f;
  return s;
}

double BoundaryFluxes::max_abs() const {
  double m = 0.0;
  for (double f : by_tag) m = std::max(m, std::abs(f));
  return m;
}

BoundaryFluxes boundary_fluxes(const Assembler& assembler, const Eigen::VectorXd& P) {
  const OperatorSet ops = assembler.assemble(P, 0.0);
  const Eigen::VectorXd residual = ops.H * P - assembler.seepage_block(P) * P - ops.f_p;

  BoundaryFluxes out;
  for (BoundaryTag tag : kAllTags) {
    double flux = 0.0;
    for (Index dof : assembler.dirichlet_pressure_dofs(tag)) flux -= residual[dof];
    out.by_tag[static_cast<std::size_t>(tag)] = flux;
  }
  const Mesh& mesh = assembler.mesh();
  const EdgeRule& er = edge_rule_gauss3();
  for (BoundaryTag tag : kAllTags) {
    const FlowBC& flow = assembler.setup().hyd(tag);
    if (flow.kind != FlowBCKind::Seepage) continue;
    double flux = 0.0;
    for (const auto& e : mesh.boundary_edges()) {
      if (e.tag != tag) continue;
      const double len = mesh.edge_length(e);
      const double beta = flow.seepage_scale / len;
      for (std::size_t q = 0; q < er.points.size(); ++q) {
        const double s = er.points[q];
        const double p = (1.0 - s) * P[e.nodes[0]] + s * P[e.nodes[1]];
        if (p > 0.0) flux += er.weights[q] * len * beta * p;
      }
    }
    out.by_tag[static_cast<std::size_t>(tag)] += flux;
  }
  return out;
}

double l2_error_displacement(const Mesh& mesh, const DofMap& dofs, const Eigen::VectorXd& U,
                             const std::function<Point2(Point2)>& exact) {
  const TriangleRule& rule = triangle_rule_deg5();
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map = affine_map(mesh, t);
    const auto& nodes = dofs.element_nodes(t);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double r = rule.points[q][0], s = rule.points[q][1];
      const auto n = shape::p2(r, s);
      Point2 uh{};
      for (int a = 0; a < 6; ++a) {
        uh.x += n[a] * U[DofMap::u_dof(nodes[a], 0)];
        uh.y += n[a] * U[DofMap::u_dof(nodes[a], 1)];
      }
      const Point2 d = uh - exact(map.to_physical(r, s));
      sum += rule.weights[q] * map.det * (d.x * d.x + d.y * d.y);
    }
  }
  return std::sqrt(sum);
}

double l2_error_pressure(const Mesh& mesh, const DofMap& dofs, const Eigen::VectorXd& P,
                         const std::function<double(Point2)>& exact) {
  const TriangleRule& rule = triangle_rule_deg5();
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map = affine_map(mesh, t);
    const auto& nodes = dofs.element_nodes(t);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double r = rule.points[q][0], s = rule.points[q][1];
      const auto n = shape::p1(r, s);
      const double ph = n[0] * P[nodes[0]] + n[1] * P[nodes[1]] + n[2] * P[nodes[2]];
      const double d = ph - exact(map.to_physical(r, s));
      sum += rule.weights[q] * map.det * d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace damrom
