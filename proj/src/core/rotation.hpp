#pragma once

#include <array>

#include "core/geom3.hpp"
#include "core/rng.hpp"

namespace i2i {

// Unit quaternion, (w, x, y, z). Canonical sign: w >= 0, and if w == 0 the
// first nonzero imaginary component is positive, so equality tests are
// well-defined.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

Quat quat_from_matrix(const Mat3& m);
Mat3 matrix_from_quat(const Quat& q);
Quat canonicalize(Quat q);

// An element of SO(3), stored redundantly as both a row-major 3x3 matrix and
// a canonical unit quaternion. The two stay consistent by construction.
class Rotation {
 public:
  Rotation() : matrix_(Mat3::identity()) {}

  // Projects near-orthonormal input to the group and validates it.
  static Rotation from_matrix(const Mat3& m);
  static Rotation from_quat(const Quat& q);

  // Rotation by `angle` radians about `axis` (normalized internally).
  static Rotation about_axis(Vec3 axis, double angle);
  static Rotation rot_z(double angle);

  const Mat3& matrix() const { return matrix_; }
  const Quat& quat() const { return quat_; }

  Vec3 operator*(Vec3 v) const { return matrix_ * v; }
  Rotation operator*(const Rotation& rhs) const;
  Rotation inverse() const;

 private:
  Mat3 matrix_;
  Quat quat_;
};

// arccos(clamp((trace(a^T b) - 1)/2, -1, 1)); the bi-invariant metric on SO(3).
double geodesic_angle(const Rotation& a, const Rotation& b);

// Threshold below which a 6D regression output carries no usable direction.
inline constexpr double kGramSchmidtEps = 1e-8;

// Two 3-vectors to a rotation: column 1 = a normalized, column 2 = b with its
// a-component removed and normalized, column 3 = their cross product.
// Throws Error(DegenerateInput) when either normalization is below eps.
Rotation gram_schmidt_6d(Vec3 a, Vec3 b);

// Nearest rotation to an arbitrary 3x3 matrix in Frobenius norm: from the SVD
// m = U S V^T the result is U diag(1, 1, det(UV^T)) V^T. Throws
// Error(DegenerateInput) when the smallest singular value is <= 1e-8.
Rotation procrustes_9d(const Mat3& m);

// Haar-uniform rotation from a normalized 4D Gaussian quaternion.
Rotation random_rotation(Rng& rng);

// 3x3 SVD by one-sided Jacobi iteration, a = u * diag(s) * v^T with
// s[0] >= s[1] >= s[2] >= 0 and u, v orthogonal (u may have det -1).
struct Svd3 {
  Mat3 u;
  Vec3 s;
  Mat3 v;
};
Svd3 svd3(const Mat3& a);

// Known label symmetry of an object class.
struct SymmetrySpec {
  enum class Kind { None, CyclicZ, ContinuousZ };
  Kind kind = Kind::None;
  int order = 0;  // cyclic-z only, >= 2

  static SymmetrySpec none() { return {}; }
  static SymmetrySpec cyclic_z(int n);
  static SymmetrySpec continuous_z() { return {Kind::ContinuousZ, 0}; }
};

// min over the symmetry set s of geodesic_angle(pred, truth * s); the
// continuous-z case is minimized in closed form over all z-rotations.
double symmetry_aware_error(const Rotation& pred, const Rotation& truth,
                            const SymmetrySpec& sym);

// Canonical coset representative of r under sym: the element of
// {r * s} minimizing angle to identity (continuous-z in closed form).
// Idempotent; the identity map for sym = none.
Rotation canonicalize_label(const Rotation& r, const SymmetrySpec& sym);

}  // namespace i2i
