#include "core/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "core/frozen_constants.hpp"
#include "core/heads.hpp"
#include "core/model.hpp"

namespace i2i {

namespace {

using Clock = std::chrono::steady_clock;

struct Timer {
  Clock::time_point start = Clock::now();
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

SphereSignal random_sphere(Rng& rng, int n) {
  SphereSignal f;
  f.n = n;
  f.values.resize(static_cast<size_t>(kSubmeshSize) * n);
  for (auto& v : f.values) v = rng.normal();
  return f;
}

DynamicFilter random_filter(Rng& rng, const std::vector<int>& visible, int m, int n) {
  DynamicFilter psi;
  psi.vertices = visible;
  psi.m = m;
  psi.n = n;
  for (size_t v = 0; v < visible.size(); ++v) {
    std::vector<double> mat(static_cast<size_t>(m) * n);
    for (auto& x : mat) x = rng.normal();
    psi.values.push_back(std::move(mat));
  }
  return psi;
}

double quant_angle(const IcoGroup& g, const Rotation& r) {
  return geodesic_angle(nearest_element(g, r).offset, Rotation());
}

}  // namespace

CheckResult check_group_axioms(const IcoGroup& g) {
  Timer timer;
  CheckResult res{"group axioms", true, "", 0.0};
  std::ostringstream why;

  if (g.elements.size() != kGroupOrder) {
    res.pass = false;
    why << "element count " << g.elements.size() << "; ";
  } else {
    double min_sep = 1e9, worst_closure = 0.0;
    bool assoc = true, latin = true, ident = true, inv = true;
    for (int a = 0; a < kGroupOrder; ++a) {
      std::set<int> row, col;
      for (int b = 0; b < kGroupOrder; ++b) {
        if (a < b) min_sep = std::min(min_sep, geodesic_angle(g.elements[a], g.elements[b]));
        worst_closure = std::max(
            worst_closure,
            geodesic_angle(g.elements[a] * g.elements[b], g.elements[g.cayley[a][b]]));
        row.insert(g.cayley[a][b]);
        col.insert(g.cayley[b][a]);
      }
      latin = latin && row.size() == kGroupOrder && col.size() == kGroupOrder;
      ident = ident && g.cayley[0][a] == a && g.cayley[a][0] == a;
      inv = inv && g.cayley[a][g.inverse[a]] == 0 && g.cayley[g.inverse[a]][a] == 0;
    }
    for (int a = 0; a < kGroupOrder && assoc; ++a)
      for (int b = 0; b < kGroupOrder && assoc; ++b)
        for (int c = 0; c < kGroupOrder; ++c)
          if (g.cayley[g.cayley[a][b]][c] != g.cayley[a][g.cayley[b][c]]) {
            assoc = false;
            break;
          }

    std::map<int, int> spectrum;
    bool spectrum_ok = true;
    try {
      for (int a = 0; a < kGroupOrder; ++a) spectrum[element_order(g, a)]++;
      spectrum_ok = spectrum == std::map<int, int>{{1, 1}, {2, 15}, {3, 20}, {5, 24}};
    } catch (const Error&) {
      spectrum_ok = false;  // corrupted tables can make orders diverge
    }

    bool has_c2z = false;
    Rotation c2z = Rotation::rot_z(M_PI);
    for (const auto& e : g.elements) has_c2z = has_c2z || geodesic_angle(e, c2z) < 1e-9;

    std::set<std::vector<int>> perms(g.vertex_perm.begin(), g.vertex_perm.end());
    bool faithful = perms.size() == kGroupOrder;

    res.pass = min_sep > 1e-6 && worst_closure < 1e-9 && assoc && latin && ident && inv &&
               spectrum_ok && has_c2z && faithful;
    why << "closure dev " << fmt(worst_closure) << ", min separation " << fmt(min_sep)
        << ", spectrum";
    for (auto [order, count] : spectrum) why << " " << order << ":" << count;
    if (!assoc) why << ", ASSOCIATIVITY FAILED";
    if (!latin) why << ", NOT A LATIN SQUARE";
    if (!ident || !inv) why << ", IDENTITY/INVERSE FAILED";
    if (!has_c2z) why << ", C2Z MISSING";
    if (!faithful) why << ", VERTEX ACTION NOT FAITHFUL";
  }
  res.detail = why.str();
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_quotient(const IcoGroup& g) {
  Timer timer;
  CheckResult res{"quotient mesh", true, "", 0.0};
  const Quotient& q = g.quotient;
  double norm_dev = 0.0, map_dev = 0.0;
  for (const auto& v : q.submesh) norm_dev = std::max(norm_dev, std::abs(norm(v) - 1.0));
  for (int a = 0; a < kGroupOrder; ++a)
    for (int p = 0; p < kSubmeshSize; ++p)
      map_dev = std::max(map_dev, norm(g.elements[a].matrix() * q.submesh[p] -
                                       q.submesh[g.act(a, p)]));
  bool counts = q.vertices.size() == 12 && q.submesh.size() == 42 && q.edges.size() == 30;
  res.pass = counts && norm_dev < 1e-12 && map_dev < 1e-9;
  res.detail = "12/42/30 points, norm dev " + fmt(norm_dev) + ", self-map dev " + fmt(map_dev);
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_oracle_equivalence(const IcoGroup& g) {
  Timer timer;
  ProjectionPlan plan = build_plan(g.quotient, 8, 8, 0.2, 0.9, ProjectionScheme::Submesh42);
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int m = 1 + static_cast<int>(rng.uniform_index(4));
    int n = 1 + static_cast<int>(rng.uniform_index(5));
    SphereSignal f = random_sphere(rng, n);
    DynamicFilter psi = random_filter(rng, plan.visible, m, n);
    std::vector<std::vector<double>> full(kSubmeshSize, std::vector<double>(m * n, 0.0));
    for (size_t v = 0; v < psi.vertices.size(); ++v) full[psi.vertices[v]] = psi.values[v];
    GroupSignal fast = ico_conv(f, psi, g);
    GroupSignal slow = brute_force_conv(f, full, m, n, g);
    for (size_t i = 0; i < fast.values.size(); ++i)
      worst = std::max(worst, std::abs(fast.values[i] - slow.values[i]));
  }
  CheckResult res{"oracle equivalence (eq.2 vs eq.3)", worst < 1e-10,
                  "100 trials, max abs diff " + fmt(worst), timer.seconds()};
  return res;
}

CheckResult check_layer_equivariance(const IcoGroup& g) {
  Timer timer;
  ProjectionPlan plan = build_plan(g.quotient, 8, 8, 0.2, 0.9, ProjectionScheme::Submesh42);
  Rng rng(405);
  const int m = 3, n = 4;
  SphereSignal f = random_sphere(rng, n);
  DynamicFilter psi = random_filter(rng, plan.visible, m, n);
  GroupSignal base = ico_conv(f, psi, g);
  double worst = 0.0;
  for (int shift = 0; shift < kGroupOrder; ++shift) {
    SphereSignal moved;
    moved.n = n;
    moved.values.resize(f.values.size());
    for (int p = 0; p < kSubmeshSize; ++p)
      for (int j = 0; j < n; ++j)
        moved.values[p * n + j] = f.values[g.act(shift, p) * n + j];
    GroupSignal out = ico_conv(moved, psi, g);
    for (int h = 0; h < kGroupOrder; ++h)
      for (int i = 0; i < m; ++i)
        worst = std::max(worst, std::abs(out.values[h * m + i] -
                                         base.values[g.cayley[shift][h] * m + i]));
  }
  return {"layer equivariance (all 60 shifts)", worst < 1e-10, "max abs dev " + fmt(worst),
          timer.seconds()};
}

CheckResult check_encoder_c4() {
  Timer timer;
  Rng rng(406);
  EncoderConfig cfg;
  cfg.out_channels = 12;
  Encoder<double> enc = Encoder<double>::init(cfg, rng);
  Tensor<double> img = Tensor<double>::zeros({1, 32, 32});
  for (std::int64_t i = 0; i < img.size(); ++i) img.ptr()[i] = rng.normal();
  Tensor<double> base = enc.forward(img);
  Tensor<double> rot = enc.forward(rotate90(img, 1));
  Tensor<double> expect = rotate90(base, 1);
  double worst = 0.0;
  for (std::int64_t i = 0; i < rot.size(); ++i)
    worst = std::max(worst, std::abs(rot.ptr()[i] - expect.ptr()[i]));

  EncoderConfig pcfg = cfg;
  pcfg.equivariant = false;
  Encoder<double> plain = Encoder<double>::init(pcfg, rng);
  Tensor<double> pbase = plain.forward(img);
  Tensor<double> prot = plain.forward(rotate90(img, 1));
  Tensor<double> pexpect = rotate90(pbase, 1);
  double plain_dev = 0.0;
  for (std::int64_t i = 0; i < prot.size(); ++i)
    plain_dev = std::max(plain_dev, std::abs(prot.ptr()[i] - pexpect.ptr()[i]));

  return {"encoder C4 equivariance", worst < 1e-10 && plain_dev > 1e-3,
          "equivariant dev " + fmt(worst) + ", plain control dev " + fmt(plain_dev),
          timer.seconds()};
}

CheckResult check_end_to_end_180(const IcoGroup& g) {
  Timer timer;
  int c2 = -1;
  Rotation c2z = Rotation::rot_z(M_PI);
  for (int i = 0; i < kGroupOrder; ++i)
    if (geodesic_angle(g.elements[i], c2z) < 1e-9) c2 = i;
  if (c2 < 0) return {"end-to-end 180 equivariance", false, "C2Z not in group", timer.seconds()};

  Rng rng(407);
  ModelConfig mc;
  mc.task = Task::Pose;
  mc.variant = Variant::I2I;
  auto group_ptr = std::shared_ptr<const IcoGroup>(&g, [](const IcoGroup*) {});
  Model<double> model = Model<double>::init(mc, group_ptr, rng);

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> img = Tensor<double>::zeros({1, 32, 32});
    for (std::int64_t i = 0; i < img.size(); ++i) img.ptr()[i] = rng.normal();
    Tensor<double> base = model.forward_signal(img);
    Tensor<double> rot = model.forward_signal(rotate90(img, 2));
    // Half-turn of the image right-translates the group signal by the C2
    // z-axis element: out'(h) = out(h * c2).
    for (int h = 0; h < kGroupOrder; ++h)
      for (int i = 0; i < 7; ++i)
        worst = std::max(worst, std::abs(rot.ptr()[h * 7 + i] -
                                         base.ptr()[g.cayley[h][c2] * 7 + i]));
  }
  return {"end-to-end 180 equivariance", worst < 1e-8, "20 images, max abs dev " + fmt(worst),
          timer.seconds()};
}

CheckResult check_gradients(const IcoGroup& g) {
  Timer timer;
  Rng rng(408);
  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](const std::string& name, const GradCheckReport& rep) {
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_name = name;
    }
  };

  auto randn = [&rng](Shape s) {
    Tensor<double> t = Tensor<double>::zeros(std::move(s));
    for (std::int64_t i = 0; i < t.size(); ++i) t.ptr()[i] = rng.normal();
    return t;
  };
  auto pinned = [](const Tensor<double>& x, std::uint64_t seed) {
    Rng local(seed);
    Tensor<double> coeff = Tensor<double>::zeros(x.shape);
    for (std::int64_t i = 0; i < coeff.size(); ++i) coeff.ptr()[i] = local.normal();
    return sum(mul(x, coeff));
  };

  track("elementwise", grad_check(
                           [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                             Tensor<double> q =
                                 div(sub(mul(p[0], p[1]), p[2]),
                                     add_scalar(mul(p[1], p[1]), 1.0));
                             return pinned(relu(q), 1);
                           },
                           {randn({6}), randn({6}), randn({6})}));
  track("matmul+linear",
        grad_check(
            [&](Tape<double>&, std::vector<Tensor<double>>& p) {
              return pinned(linear(reshape(matmul(p[0], p[1]), {6}), p[2], p[3]), 2);
            },
            {randn({2, 3}), randn({3, 3}), randn({4, 6}), randn({4})}));
  track("conv2d+pool",
        grad_check(
            [&](Tape<double>&, std::vector<Tensor<double>>& p) {
              return pinned(mean_channel_groups(avgpool2x2(conv2d(p[0], p[1], p[2])), 2), 3);
            },
            {randn({2, 6, 6}), randn({4, 2, 3, 3}), randn({4})}));
  track("rotate90+index",
        grad_check(
            [&](Tape<double>&, std::vector<Tensor<double>>& p) {
              return pinned(gather_rows(reshape(rotate90(p[0], 1), {4, 4}), {1, 3}), 4);
            },
            {randn({1, 4, 4})}));
  track("losses", grad_check(
                      [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                        return add(add(softmax_cross_entropy(p[0], 1),
                                       frobenius_l2(p[1], p[2])),
                                   add(sum(sqrt_op(add_scalar(mul(p[0], p[0]), 1.0))),
                                       pinned(softmax(p[0]), 5)));
                      },
                      {randn({5}), randn({2, 2}), randn({2, 2})}));

  ProjectionPlan plan = build_plan(g.quotient, 6, 6, 0.2, 0.9, ProjectionScheme::Submesh42);
  track("projection", grad_check(
                          [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                            return pinned(project_op(plan, p[0]), 6);
                          },
                          {randn({3, 6, 6})}));
  const int m = 2, n = 3, nv = plan.num_visible();
  track("ico_conv", grad_check(
                        [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                          return pinned(ico_conv_op(p[0], p[1], g, plan.visible), 7);
                        },
                        {randn({nv, m, n}), randn({kSubmeshSize, n})}));
  track("ico_conv_vector",
        grad_check(
            [&](Tape<double>&, std::vector<Tensor<double>>& p) {
              return pinned(ico_conv_vector_op(p[0], p[1], m, g, plan.visible), 8);
            },
            {randn({nv, n}), randn({kSubmeshSize, m * n})}));
  track("group_pool", grad_check(
                          [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                            return add(pinned(group_pool_op(p[0], PoolMode::Max), 9),
                                       pinned(group_pool_op(p[0], PoolMode::Avg), 10));
                          },
                          {randn({kGroupOrder, 3})}));

  Rotation truth = random_rotation(rng);
  track("pose loss", grad_check(
                         [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                           return pose_loss_op(p[0], truth, g, 100.0).total;
                         },
                         {randn({kGroupOrder, 7})}));
  for (bool proc : {false, true}) {
    BaselineHead<double> head = BaselineHead<double>::init(8, proc, rng);
    track(proc ? "procrustes head" : "gram-schmidt head",
          grad_check(
              [&](Tape<double>&, std::vector<Tensor<double>>& p) {
                BaselineHead<double> live = head;
                live.w = p[0];
                live.b = p[1];
                return live.loss_op(p[2], truth);
              },
              {head.w, head.b, randn({8})}));
  }

  return {"gradient checks", worst < 1e-4,
          "worst rel err " + fmt(worst) + " (" + worst_name + ")", timer.seconds()};
}

CheckResult check_rotation_contracts(const IcoGroup& g) {
  Timer timer;
  Rng rng(409);
  double gs_dev = 0.0, proc_dev = 0.0, round_dev = 0.0, quat_dev = 0.0;
  for (int i = 0; i < 100000; ++i) {
    Vec3 a{rng.normal(), rng.normal(), rng.normal()};
    Vec3 b{rng.normal(), rng.normal(), rng.normal()};
    Rotation r = gram_schmidt_6d(a, b);
    const Mat3& m = r.matrix();
    gs_dev = std::max(gs_dev, max_abs_diff(transpose(m) * m, Mat3::identity()));
    gs_dev = std::max(gs_dev, std::abs(det(m) - 1.0));

    Mat3 rnd;
    for (auto& v : rnd.m) v = rng.normal();
    if (std::abs(det(rnd)) > 1e-3) {
      const Mat3& pm = procrustes_9d(rnd).matrix();
      proc_dev = std::max(proc_dev, max_abs_diff(transpose(pm) * pm, Mat3::identity()));
      proc_dev = std::max(proc_dev, std::abs(det(pm) - 1.0));
    }

    Rotation hr = random_rotation(rng);
    quat_dev = std::max(quat_dev,
                        max_abs_diff(Rotation::from_quat(quat_from_matrix(hr.matrix())).matrix(),
                                     hr.matrix()));
  }
  for (int i = 0; i < 10000; ++i) {
    Rotation truth = random_rotation(rng);
    NearestElement near = nearest_element(g, truth);
    Rotation back = g.elements[near.index] * near.offset;
    round_dev = std::max(round_dev, geodesic_angle(back, truth));
  }
  bool pass = gs_dev < 1e-10 && proc_dev < 1e-10 && round_dev < 1e-9 && quat_dev < 1e-12;
  return {"rotation representation contracts", pass,
          "gs dev " + fmt(gs_dev) + ", procrustes dev " + fmt(proc_dev) + ", roundtrip " +
              fmt(round_dev) + " rad, quat dev " + fmt(quat_dev),
          timer.seconds()};
}

CheckResult check_quantization_stats(const IcoGroup& g, int samples) {
  Timer timer;
  double medians[2], radii[2];
  for (int pass = 0; pass < 2; ++pass) {
    Rng rng(pass == 0 ? 101 : 202);
    std::vector<double> angles(samples);
    Rotation worst_rot;
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
      Rotation r = random_rotation(rng);
      angles[i] = quant_angle(g, r);
      if (angles[i] > worst) {
        worst = angles[i];
        worst_rot = r;
      }
    }
    std::sort(angles.begin(), angles.end());
    medians[pass] = 0.5 * (angles[samples / 2 - 1] + angles[samples / 2]) * 180.0 / M_PI;
    // Local ascent onto the deep hole sharpens the Monte-Carlo maximum.
    Rotation cur = worst_rot;
    double best = worst;
    Rng ascent(pass == 0 ? 11 : 22);
    for (double scale : {0.05, 0.02, 0.01, 0.004, 0.002, 0.001, 0.0004, 0.0002, 0.0001}) {
      for (int it = 0; it < 400; ++it) {
        Vec3 axis{ascent.normal(), ascent.normal(), ascent.normal()};
        Rotation cand = cur * Rotation::about_axis(axis, scale * ascent.uniform());
        double a = quant_angle(g, cand);
        if (a > best) {
          best = a;
          cur = cand;
        }
      }
    }
    radii[pass] = best * 180.0 / M_PI;
  }

  ProjectionPlan plan = build_plan(g.quotient, 8, 8, 0.2, 0.9, ProjectionScheme::Submesh42);
  bool visible_ok = plan.num_visible() == frozen::kVisibleCount42;
  bool stable = true;
  for (int pass = 0; pass < 2; ++pass) {
    stable = stable && std::abs(medians[pass] - frozen::kMedianQuantAngleDeg) <= 0.2 &&
             std::abs(radii[pass] - frozen::kCoveringRadiusDeg) <= 0.2;
  }
  std::ostringstream detail;
  detail << "covering radius " << fmt(radii[0]) << "/" << fmt(radii[1]) << " deg (frozen "
         << frozen::kCoveringRadiusDeg << "), median quantization " << fmt(medians[0]) << "/"
         << fmt(medians[1]) << " deg (frozen " << frozen::kMedianQuantAngleDeg
         << "), visible points " << plan.num_visible() << " (frozen " << frozen::kVisibleCount42
         << ")";
  return {"quantization statistics vs frozen oracle constants", stable && visible_ok,
          detail.str(), timer.seconds()};
}

std::vector<CheckResult> run_verification(const IcoGroup& group, int mc_samples) {
  std::vector<CheckResult> results;
  results.push_back(check_group_axioms(group));
  results.push_back(check_quotient(group));
  results.push_back(check_oracle_equivalence(group));
  results.push_back(check_layer_equivariance(group));
  results.push_back(check_encoder_c4());
  results.push_back(check_end_to_end_180(group));
  results.push_back(check_gradients(group));
  results.push_back(check_rotation_contracts(group));
  results.push_back(check_quantization_stats(group, mc_samples));
  return results;
}

std::string verification_report(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail;
    os.precision(2);
    os << std::fixed << " (" << r.seconds << "s)\n";
    os.unsetf(std::ios_base::floatfield);
    os.precision(6);
  }
  os << (all_passed(results) ? "verification OK\n" : "verification FAILED\n");
  return os.str();
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace i2i
