#include "core/rotation.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace i2i {

namespace {

double clamp1(double v) { return std::min(1.0, std::max(-1.0, v)); }

double quat_norm(const Quat& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

Quat normalized(Quat q) {
  double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  require(n2 > 0.0, ErrorCode::InvalidArgument, "zero quaternion");
  // Already-unit input passes through bit-identically, which keeps
  // serialize/deserialize round trips exact.
  if (std::abs(n2 - 1.0) <= 1e-12) return q;
  double n = std::sqrt(n2);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

}  // namespace

Quat canonicalize(Quat q) {
  double lead = q.w;
  if (lead == 0.0) lead = (q.x != 0.0) ? q.x : (q.y != 0.0 ? q.y : q.z);
  if (lead < 0.0) return {-q.w, -q.x, -q.y, -q.z};
  return q;
}

Quat quat_from_matrix(const Mat3& m) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  Quat q;
  double t = trace(m);
  if (t > 0.0) {
    double s = std::sqrt(t + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (m(2, 1) - m(1, 2)) / s;
    q.y = (m(0, 2) - m(2, 0)) / s;
    q.z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
    q.w = (m(2, 1) - m(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (m(0, 1) + m(1, 0)) / s;
    q.z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
    q.w = (m(0, 2) - m(2, 0)) / s;
    q.x = (m(0, 1) + m(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (m(1, 2) + m(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
    q.w = (m(1, 0) - m(0, 1)) / s;
    q.x = (m(0, 2) + m(2, 0)) / s;
    q.y = (m(1, 2) + m(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return canonicalize(normalized(q));
}

Mat3 matrix_from_quat(const Quat& q) {
  Mat3 m;
  double w = q.w, x = q.x, y = q.y, z = q.z;
  m(0, 0) = 1 - 2 * (y * y + z * z);
  m(0, 1) = 2 * (x * y - w * z);
  m(0, 2) = 2 * (x * z + w * y);
  m(1, 0) = 2 * (x * y + w * z);
  m(1, 1) = 1 - 2 * (x * x + z * z);
  m(1, 2) = 2 * (y * z - w * x);
  m(2, 0) = 2 * (x * z - w * y);
  m(2, 1) = 2 * (y * z + w * x);
  m(2, 2) = 1 - 2 * (x * x + y * y);
  return m;
}

Rotation Rotation::from_quat(const Quat& q) {
  Rotation r;
  r.quat_ = canonicalize(normalized(q));
  r.matrix_ = matrix_from_quat(r.quat_);
  return r;
}

Rotation Rotation::from_matrix(const Mat3& m) {
  Mat3 gram = transpose(m) * m;
  double dev = max_abs_diff(gram, Mat3::identity());
  require(dev < 1e-6 && std::abs(det(m) - 1.0) < 1e-6, ErrorCode::InvalidArgument,
          "matrix is not a rotation (orthonormality deviation " + std::to_string(dev) + ")");
  // Rebuild the matrix from the quaternion so the stored pair is consistent
  // to machine precision.
  return from_quat(quat_from_matrix(m));
}

Rotation Rotation::about_axis(Vec3 axis, double angle) {
  double n = norm(axis);
  require(n > 0.0, ErrorCode::InvalidArgument, "zero rotation axis");
  double s = std::sin(0.5 * angle) / n;
  return from_quat({std::cos(0.5 * angle), s * axis.x, s * axis.y, s * axis.z});
}

Rotation Rotation::rot_z(double angle) { return about_axis({0, 0, 1}, angle); }

Rotation Rotation::operator*(const Rotation& rhs) const {
  return from_quat(quat_mul(quat_, rhs.quat_));
}

Rotation Rotation::inverse() const {
  return from_quat({quat_.w, -quat_.x, -quat_.y, -quat_.z});
}

double geodesic_angle(const Rotation& a, const Rotation& b) {
  // arccos((trace(a^T b) - 1)/2), evaluated through the relative quaternion:
  // 2*atan2(|vec|, |w|) is the same function but stays well-conditioned near
  // 0 and pi, where the arccos form loses half the significand.
  const Quat& qa = a.quat();
  Quat rel = quat_mul({qa.w, -qa.x, -qa.y, -qa.z}, b.quat());
  double vec = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
  return 2.0 * std::atan2(vec, std::abs(rel.w));
}

Rotation gram_schmidt_6d(Vec3 a, Vec3 b) {
  double na = norm(a);
  require(na > kGramSchmidtEps, ErrorCode::DegenerateInput,
          "gram_schmidt_6d: first vector has near-zero norm");
  Vec3 c1 = (1.0 / na) * a;
  Vec3 u = b - dot(c1, b) * c1;
  double nu = norm(u);
  require(nu > kGramSchmidtEps, ErrorCode::DegenerateInput,
          "gram_schmidt_6d: second vector is near-collinear with the first");
  Vec3 c2 = (1.0 / nu) * u;
  Vec3 c3 = cross(c1, c2);
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    m(r, 0) = c1[r];
    m(r, 1) = c2[r];
    m(r, 2) = c3[r];
  }
  return Rotation::from_matrix(m);
}

Svd3 svd3(const Mat3& a) {
  // One-sided Jacobi: orthogonalize the columns of w = a * v.
  Mat3 w = a;
  Mat3 v = Mat3::identity();
  constexpr double kTol = 1e-14;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool converged = true;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (int r = 0; r < 3; ++r) {
          app += w(r, p) * w(r, p);
          aqq += w(r, q) * w(r, q);
          apq += w(r, p) * w(r, q);
        }
        if (std::abs(apq) <= kTol * std::sqrt(app * aqq)) continue;
        converged = false;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double cs = 1.0 / std::sqrt(1.0 + t * t);
        double sn = cs * t;
        for (int r = 0; r < 3; ++r) {
          double wp = w(r, p), wq = w(r, q);
          w(r, p) = cs * wp - sn * wq;
          w(r, q) = sn * wp + cs * wq;
          double vp = v(r, p), vq = v(r, q);
          v(r, p) = cs * vp - sn * vq;
          v(r, q) = sn * vp + cs * vq;
        }
      }
    }
    if (converged) break;
  }

  Svd3 out;
  std::array<int, 3> order = {0, 1, 2};
  std::array<double, 3> sigma;
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int r = 0; r < 3; ++r) s += w(r, c) * w(r, c);
    sigma[c] = std::sqrt(s);
  }
  std::sort(order.begin(), order.end(), [&](int i, int j) { return sigma[i] > sigma[j]; });
  for (int c = 0; c < 3; ++c) {
    int src = order[c];
    out.s[c] = sigma[src];
    for (int r = 0; r < 3; ++r) {
      out.v(r, c) = v(r, src);
      out.u(r, c) = sigma[src] > 1e-300 ? w(r, src) / sigma[src] : 0.0;
    }
  }
  // A null column of u (rank-deficient input) is completed orthogonally.
  if (out.s[2] <= 1e-300) {
    Vec3 u0{out.u(0, 0), out.u(1, 0), out.u(2, 0)};
    Vec3 u1{out.u(0, 1), out.u(1, 1), out.u(2, 1)};
    Vec3 u2 = cross(u0, u1);
    for (int r = 0; r < 3; ++r) out.u(r, 2) = u2[r];
  }
  return out;
}

Rotation procrustes_9d(const Mat3& m) {
  Svd3 f = svd3(m);
  require(f.s[2] > 1e-8, ErrorCode::DegenerateInput,
          "procrustes_9d: rank-deficient input (sigma_min <= 1e-8)");
  double sign = det(f.u) * det(f.v) < 0.0 ? -1.0 : 1.0;
  Mat3 d = Mat3::identity();
  d(2, 2) = sign;
  return Rotation::from_matrix(f.u * d * transpose(f.v));
}

Rotation random_rotation(Rng& rng) {
  Quat q;
  do {
    q = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  } while (quat_norm(q) < 1e-12);
  return Rotation::from_quat(q);
}

SymmetrySpec SymmetrySpec::cyclic_z(int n) {
  require(n >= 2, ErrorCode::InvalidArgument, "cyclic-z symmetry needs order >= 2");
  return {Kind::CyclicZ, n};
}

namespace {

// trace(r * rot_z(alpha)) = c*(r00+r11) + s*(r01-r10) + r22; the maximizing
// angle and value come from the amplitude-phase form of that sinusoid.
double max_trace_over_z(const Mat3& r, double* best_alpha) {
  double cc = r(0, 0) + r(1, 1);
  double sc = r(0, 1) - r(1, 0);
  if (best_alpha) *best_alpha = std::atan2(sc, cc);
  return std::sqrt(cc * cc + sc * sc) + r(2, 2);
}

}  // namespace

double symmetry_aware_error(const Rotation& pred, const Rotation& truth,
                            const SymmetrySpec& sym) {
  switch (sym.kind) {
    case SymmetrySpec::Kind::None:
      return geodesic_angle(pred, truth);
    case SymmetrySpec::Kind::CyclicZ: {
      double best = geodesic_angle(pred, truth);
      for (int j = 1; j < sym.order; ++j) {
        double a = geodesic_angle(pred, truth * Rotation::rot_z(2.0 * M_PI * j / sym.order));
        best = std::min(best, a);
      }
      return best;
    }
    case SymmetrySpec::Kind::ContinuousZ: {
      // With relative quaternion q = conj(q_truth) * q_pred, the minimum over
      // z-rotations of the geodesic angle is 2*atan2(hypot(x,y), hypot(w,z)).
      const Quat& qt = truth.quat();
      Quat rel = quat_mul({qt.w, -qt.x, -qt.y, -qt.z}, pred.quat());
      return 2.0 * std::atan2(std::hypot(rel.x, rel.y), std::hypot(rel.w, rel.z));
    }
  }
  return 0.0;
}

Rotation canonicalize_label(const Rotation& r, const SymmetrySpec& sym) {
  switch (sym.kind) {
    case SymmetrySpec::Kind::None:
      return r;
    case SymmetrySpec::Kind::CyclicZ: {
      Rotation best = r;
      double best_angle = geodesic_angle(r, Rotation());
      for (int j = 1; j < sym.order; ++j) {
        Rotation cand = r * Rotation::rot_z(2.0 * M_PI * j / sym.order);
        double a = geodesic_angle(cand, Rotation());
        if (a < best_angle - 1e-15) {
          best = cand;
          best_angle = a;
        }
      }
      return best;
    }
    case SymmetrySpec::Kind::ContinuousZ: {
      double alpha = 0.0;
      max_trace_over_z(r.matrix(), &alpha);
      return r * Rotation::rot_z(alpha);
    }
  }
  return r;
}

}  // namespace i2i
