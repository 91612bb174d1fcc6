#pragma once

#include <utility>
#include <vector>

#include "core/rotation.hpp"

namespace i2i {

// The 12 icosahedron vertices (quotient space of I60 by the 5-fold vertex
// stabilizers) plus the 42-point submesh that adds the 30 normalized edge
// midpoints. First 12 submesh entries are the vertices.
struct Quotient {
  std::vector<Vec3> vertices;               // 12, unit norm
  std::vector<Vec3> submesh;                // 42, unit norm
  std::vector<std::pair<int, int>> edges;   // 30 vertex index pairs
};

Quotient build_quotient();

inline constexpr int kGroupOrder = 60;
inline constexpr int kNumVertices = 12;
inline constexpr int kSubmeshSize = 42;

// The icosahedral rotation group in a fixed canonical element order, with its
// Cayley, inverse, and permutation-action tables. Immutable once built.
struct IcoGroup {
  std::vector<Rotation> elements;         // 60, element 0 = identity
  std::vector<std::vector<int>> cayley;   // 60x60: index of elements[a]*elements[b]
  std::vector<int> inverse;               // 60
  std::vector<std::vector<int>> vertex_perm;   // 60x12 action on vertices
  std::vector<std::vector<int>> submesh_perm;  // 60x42 action on the submesh
  Quotient quotient;

  // Index q with submesh[q] = M(g) * submesh[p].
  int act(int g, int p) const { return submesh_perm[g][p]; }
};

// Generates I60 by closure from a 72 degree rotation about the vertex axis
// (0, 1, phi) and a 180 degree rotation about z, deduplicates at 1e-6,
// refines elements through procrustes_9d, and orders them by descending
// canonical quaternion lexicographic comparison (identity sorts first).
// Throws Error(ConstructionFailure) if closure does not stabilize at 60.
IcoGroup build_group();

struct NearestElement {
  int index = 0;
  Rotation offset;  // r = M(index) * offset
};

// argmax over g of trace(M(g)^T r); exact ties resolved to the lowest index.
NearestElement nearest_element(const IcoGroup& group, const Rotation& r);

// Multiplicative order of an element computed by repeated Cayley lookups.
int element_order(const IcoGroup& group, int g);

}  // namespace i2i
