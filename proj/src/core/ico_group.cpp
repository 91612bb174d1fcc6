#include "core/ico_group.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace i2i {

namespace {

constexpr double kDedupTol = 1e-6;

bool same_rotation(const Rotation& a, const Rotation& b) {
  return geodesic_angle(a, b) < kDedupTol;
}

int find_element(const std::vector<Rotation>& elems, const Rotation& r) {
  for (int i = 0; i < static_cast<int>(elems.size()); ++i)
    if (same_rotation(elems[i], r)) return i;
  return -1;
}

bool quat_less_desc(const Quat& a, const Quat& b) {
  if (a.w != b.w) return a.w > b.w;
  if (a.x != b.x) return a.x > b.x;
  if (a.y != b.y) return a.y > b.y;
  return a.z > b.z;
}

int nearest_point(const std::vector<Vec3>& points, Vec3 p, double tol) {
  int best = -1;
  double best_d = tol;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    double d = norm(points[i] - p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  require(best >= 0, ErrorCode::ConstructionFailure,
          "group element does not map the mesh onto itself");
  return best;
}

std::vector<int> permutation_of(const std::vector<Vec3>& points, const Mat3& m) {
  std::vector<int> perm(points.size());
  std::vector<bool> taken(points.size(), false);
  for (size_t p = 0; p < points.size(); ++p) {
    int q = nearest_point(points, m * points[p], 1e-9);
    require(!taken[q], ErrorCode::ConstructionFailure, "action is not a permutation");
    taken[q] = true;
    perm[p] = q;
  }
  return perm;
}

}  // namespace

Quotient build_quotient() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Quotient q;
  for (double a : {-1.0, 1.0}) {
    for (double b : {-phi, phi}) {
      q.vertices.push_back(normalized({0, a, b}));
      q.vertices.push_back(normalized({a, b, 0}));
      q.vertices.push_back(normalized({b, 0, a}));
    }
  }

  // Adjacent vertices are the closest pairs; collect them as the edge list.
  double min_d = 1e30;
  for (int i = 0; i < kNumVertices; ++i)
    for (int j = i + 1; j < kNumVertices; ++j)
      min_d = std::min(min_d, norm(q.vertices[i] - q.vertices[j]));
  for (int i = 0; i < kNumVertices; ++i)
    for (int j = i + 1; j < kNumVertices; ++j)
      if (norm(q.vertices[i] - q.vertices[j]) < min_d + 1e-9) q.edges.emplace_back(i, j);
  require(q.edges.size() == 30, ErrorCode::ConstructionFailure,
          "expected 30 icosahedron edges, got " + std::to_string(q.edges.size()));

  q.submesh = q.vertices;
  for (auto [i, j] : q.edges)
    q.submesh.push_back(normalized(q.vertices[i] + q.vertices[j]));
  return q;
}

IcoGroup build_group() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Rotation gen_vertex = Rotation::about_axis({0, 1, phi}, 2.0 * M_PI / 5.0);
  Rotation gen_edge = Rotation::rot_z(M_PI);

  std::vector<Rotation> elems = {Rotation(), gen_vertex, gen_edge};
  bool grew = true;
  while (grew) {
    grew = false;
    size_t n = elems.size();
    for (size_t a = 0; a < n; ++a) {
      for (size_t b = 0; b < n; ++b) {
        Rotation p = elems[a] * elems[b];
        if (find_element(elems, p) < 0) {
          elems.push_back(p);
          grew = true;
          require(elems.size() <= 2 * kGroupOrder, ErrorCode::ConstructionFailure,
                  "closure exceeded 120 elements; generator or tolerance bug");
        }
      }
    }
  }
  require(elems.size() == kGroupOrder, ErrorCode::ConstructionFailure,
          "closure stabilized at " + std::to_string(elems.size()) + " elements, expected 60");

  // Kill drift accumulated during closure, then fix the canonical order.
  for (auto& e : elems) e = procrustes_9d(e.matrix());
  std::sort(elems.begin(), elems.end(),
            [](const Rotation& a, const Rotation& b) { return quat_less_desc(a.quat(), b.quat()); });
  require(same_rotation(elems[0], Rotation()), ErrorCode::ConstructionFailure,
          "identity did not sort to index 0");

  IcoGroup g;
  g.elements = std::move(elems);
  g.quotient = build_quotient();

  g.cayley.assign(kGroupOrder, std::vector<int>(kGroupOrder, -1));
  g.inverse.assign(kGroupOrder, -1);
  for (int a = 0; a < kGroupOrder; ++a) {
    for (int b = 0; b < kGroupOrder; ++b) {
      int idx = find_element(g.elements, g.elements[a] * g.elements[b]);
      require(idx >= 0, ErrorCode::ConstructionFailure, "group is not closed");
      g.cayley[a][b] = idx;
      if (idx == 0) g.inverse[a] = b;
    }
    require(g.inverse[a] >= 0, ErrorCode::ConstructionFailure, "element has no inverse");
  }

  for (int a = 0; a < kGroupOrder; ++a) {
    g.vertex_perm.push_back(permutation_of(g.quotient.vertices, g.elements[a].matrix()));
    g.submesh_perm.push_back(permutation_of(g.quotient.submesh, g.elements[a].matrix()));
  }
  return g;
}

NearestElement nearest_element(const IcoGroup& group, const Rotation& r) {
  int best = 0;
  double best_trace = -4.0;
  for (int gidx = 0; gidx < kGroupOrder; ++gidx) {
    // trace(M^T r) is the Frobenius inner product of the two matrices.
    const auto& m = group.elements[gidx].matrix().m;
    const auto& rm = r.matrix().m;
    double t = 0.0;
    for (int i = 0; i < 9; ++i) t += m[i] * rm[i];
    if (t > best_trace) {
      best_trace = t;
      best = gidx;
    }
  }
  NearestElement out;
  out.index = best;
  out.offset = Rotation::from_matrix(transpose(group.elements[best].matrix()) * r.matrix());
  return out;
}

int element_order(const IcoGroup& group, int g) {
  int acc = g;
  int order = 1;
  while (acc != 0) {
    acc = group.cayley[acc][g];
    ++order;
    require(order <= kGroupOrder, ErrorCode::ConstructionFailure, "order computation diverged");
  }
  return order;
}

}  // namespace i2i
