#include "singflow/equilibria.hpp"

#include "singflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace singflow {

std::string to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::lorenz_like: return "lorenz_like";
    case EquilibriumKind::saddle_focus: return "saddle_focus";
    case EquilibriumKind::saddle: return "saddle";
    case EquilibriumKind::sink: return "sink";
    case EquilibriumKind::source: return "source";
    case EquilibriumKind::non_hyperbolic: return "non_hyperbolic";
  }
  return "non_hyperbolic";
}

EquilibriumKind equilibrium_kind_from_string(const std::string& s) {
  for (auto k : {EquilibriumKind::lorenz_like, EquilibriumKind::saddle_focus,
                 EquilibriumKind::saddle, EquilibriumKind::sink, EquilibriumKind::source,
                 EquilibriumKind::non_hyperbolic}) {
    if (to_string(k) == s) return k;
  }
  throw ParameterError("unknown equilibrium kind '" + s + "'");
}

namespace {

using cd = std::complex<double>;

// lambda^3 + c2 lambda^2 + c1 lambda + c0
struct Cubic {
  double c2, c1, c0;
  double value(double x) const { return ((x + c2) * x + c1) * x + c0; }
  double slope(double x) const { return (3.0 * x + 2.0 * c2) * x + c1; }
};

double polish_real(const Cubic& p, double x) {
  for (int i = 0; i < 8; ++i) {
    const double d = p.slope(x);
    if (d == 0.0) break;
    const double step = p.value(x) / d;
    if (!std::isfinite(step)) break;
    const double nx = x - step;
    if (std::abs(p.value(nx)) > std::abs(p.value(x))) break;
    x = nx;
  }
  return x;
}

// One real root by the trigonometric / Cardano formulae.
double real_root(const Cubic& p) {
  const double a = p.c2, b = p.c1, c = p.c0;
  const double q = (a * a - 3.0 * b) / 9.0;
  const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
  if (r * r < q * q * q) {
    const double theta = std::acos(std::clamp(r / std::sqrt(q * q * q), -1.0, 1.0));
    return -2.0 * std::sqrt(q) * std::cos(theta / 3.0) - a / 3.0;
  }
  const double big = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r * r - q * q * q)), r);
  const double small = big == 0.0 ? 0.0 : q / big;
  return big + small - a / 3.0;
}

}  // namespace

std::array<std::complex<double>, 3> characteristic_roots(const Mat3& j) {
  const double tr = j.trace();
  const double minors = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0) + j(0, 0) * j(2, 2) -
                        j(0, 2) * j(2, 0) + j(1, 1) * j(2, 2) - j(1, 2) * j(2, 1);
  const Cubic p{-tr, minors, -j.determinant()};
  const double x0 = polish_real(p, real_root(p));
  // Deflate: lambda^2 + b1 lambda + b0
  const double b1 = p.c2 + x0;
  const double b0 = p.c1 + x0 * b1;
  const double disc = b1 * b1 - 4.0 * b0;
  std::array<cd, 3> roots;
  roots[0] = x0;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    const double q = -0.5 * (b1 + std::copysign(s, b1));
    double r1 = q;
    double r2 = q != 0.0 ? b0 / q : 0.0;
    roots[1] = polish_real(p, r1);
    roots[2] = polish_real(p, r2);
  } else {
    const double re = -0.5 * b1;
    const double im = 0.5 * std::sqrt(-disc);
    roots[1] = cd(re, -im);
    roots[2] = cd(re, im);
  }
  std::sort(roots.begin(), roots.end(), [](const cd& a, const cd& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return roots;
}

EquilibriumReport classify(const Vec3& location, const Mat3& jacobian) {
  EquilibriumReport rep;
  rep.location = location;
  rep.eigenvalues = characteristic_roots(jacobian);
  const double scale = std::max(1.0, jacobian.norm());
  const double imag_tol = 1e-12 * scale;
  bool all_real = true;
  bool hyperbolic = true;
  int positive = 0, negative = 0;
  for (const auto& e : rep.eigenvalues) {
    if (std::abs(e.imag()) > imag_tol) all_real = false;
    if (std::abs(e.real()) < kHyperbolicityTol) hyperbolic = false;
    if (e.real() > 0.0) ++positive;
    if (e.real() < 0.0) ++negative;
  }
  // Rates.
  double lu = kNaN, ls = kNaN;
  for (const auto& e : rep.eigenvalues) {
    if (e.real() >= 0.0 && !(e.real() >= lu)) lu = e.real();
    if (e.real() < 0.0 && !(e.real() <= ls)) ls = e.real();
  }
  rep.lambda_u = lu;
  rep.lambda_s = ls;
  if (all_real && negative == 2) rep.lambda_ss = rep.eigenvalues[0].real();

  if (!hyperbolic) {
    rep.kind = EquilibriumKind::non_hyperbolic;
  } else if (negative == 3) {
    rep.kind = EquilibriumKind::sink;
  } else if (positive == 3) {
    rep.kind = EquilibriumKind::source;
  } else if (!all_real) {
    rep.kind = EquilibriumKind::saddle_focus;
  } else {
    rep.kind = EquilibriumKind::saddle;
    if (negative == 2) {
      const double ss = rep.eigenvalues[0].real();
      const double s = rep.eigenvalues[1].real();
      const double u = rep.eigenvalues[2].real();
      const double tol = kHyperbolicityTol;
      if (ss < s - tol && s < -tol && u > tol && -u < s - tol) {
        rep.kind = EquilibriumKind::lorenz_like;
      }
    }
  }
  return rep;
}

std::vector<EquilibriumReport> find_equilibria(const Field3& field, double grid_res) {
  const Box& box = field.domain();
  const Vec3 ext = box.extent();
  double min_edge = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (ext[a] > 0.0) min_edge = std::min(min_edge, ext[a]);
  }
  if (!(grid_res > 0.0) || grid_res > min_edge / 10.0 + 1e-12) {
    throw ParameterError("grid resolution must be positive and at most 1/10 of the smallest box edge");
  }
  std::array<int, 3> counts{};
  for (int a = 0; a < 3; ++a) {
    counts[a] = ext[a] > 0.0 ? static_cast<int>(std::floor(ext[a] / grid_res + 1e-9)) + 1 : 1;
  }
  auto node = [&](int i, int j, int k) {
    const int idx[3] = {i, j, k};
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = ext[a] > 0.0 ? box.lo[a] + idx[a] * grid_res : box.lo[a];
    return p;
  };

  double vel_scale = 0.0;
  for (int i = 0; i < counts[0]; ++i)
    for (int j = 0; j < counts[1]; ++j)
      for (int k = 0; k < counts[2]; ++k) {
        const Vec3 p = node(i, j, k);
        if (field.contains(p)) vel_scale = std::max(vel_scale, field.eval(p).norm());
      }
  vel_scale = std::max(vel_scale, 1e-300);

  const double diam = box.diameter();
  const double dedupe = 1e-6 * diam;
  const double slack = 1e-9 * std::max(diam, 1.0);
  auto inside = [&](const Vec3& p) {
    const Vec3 q = field.wrap(p);
    for (int a = 0; a < 3; ++a) {
      if (q[a] < box.lo[a] - slack || q[a] > box.hi[a] + slack) return false;
    }
    return field.contains(q) || !field.has_member_predicate();
  };

  std::vector<Vec3> roots;
  for (int i = 0; i < counts[0]; ++i)
    for (int j = 0; j < counts[1]; ++j)
      for (int k = 0; k < counts[2]; ++k) {
        Vec3 x = node(i, j, k);
        if (!field.contains(x)) continue;
        Vec3 f = field.eval(x);
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
          const double fn = f.norm();
          if (fn <= 1e-14 * vel_scale) {
            converged = true;
            break;
          }
          const Mat3 jm = field.jac(x);
          const Eigen::FullPivLU<Mat3> lu(jm);
          const Vec3 dx = lu.isInvertible() ? Vec3(lu.solve(-f))
                                            : Vec3(jm.completeOrthogonalDecomposition().solve(-f));
          if (!dx.allFinite()) break;
          double lambda = 1.0;
          bool improved = false;
          for (int ls = 0; ls < 30; ++ls) {
            const Vec3 trial = x + lambda * dx;
            if (inside(trial)) {
              const Vec3 ft = field.eval(trial);
              if (ft.norm() < fn) {
                x = trial;
                f = ft;
                improved = true;
                break;
              }
            }
            lambda *= 0.5;
          }
          if (!improved) {
            converged = fn <= 1e-10 * vel_scale;
            break;
          }
          if (lambda * dx.norm() <= 1e-15 * std::max(1.0, x.norm())) {
            converged = f.norm() <= 1e-10 * vel_scale;
            break;
          }
        }
        if (!converged || f.norm() > 1e-10 * vel_scale) continue;
        x = field.wrap(x);
        bool dup = false;
        for (const auto& r : roots) {
          if ((r - x).norm() <= dedupe) {
            dup = true;
            break;
          }
        }
        if (!dup) roots.push_back(x);
      }

  std::vector<EquilibriumReport> reports;
  reports.reserve(roots.size());
  for (const auto& r : roots) reports.push_back(classify(r, field.jac(r)));
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    for (int i = 0; i < 3; ++i) {
      if (a.location[i] != b.location[i]) return a.location[i] < b.location[i];
    }
    return false;
  });
  return reports;
}

int count_lorenz_like(const std::vector<EquilibriumReport>& reports,
                      const std::function<bool(const Vec3&)>& member) {
  int n = 0;
  for (const auto& r : reports) {
    if (r.kind == EquilibriumKind::lorenz_like && (!member || member(r.location))) ++n;
  }
  return n;
}

Vec3 real_eigenvector(const Mat3& j, double lambda) {
  const Mat3 a = j - lambda * Mat3::Identity();
  // Null vector: the largest cross product of two rows.
  Vec3 best = Vec3::Zero();
  for (int r1 = 0; r1 < 3; ++r1) {
    for (int r2 = r1 + 1; r2 < 3; ++r2) {
      const Vec3 c = Vec3(a.row(r1)).cross(Vec3(a.row(r2)));
      if (c.norm() > best.norm()) best = c;
    }
  }
  if (best.norm() == 0.0) {
    // Rank <= 1: any vector orthogonal to the nonzero row.
    Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullV);
    best = svd.matrixV().col(2);
  }
  best.normalize();
  int arg = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(best[i]) > std::abs(best[arg])) arg = i;
  }
  if (best[arg] < 0.0) best = -best;
  return best;
}

nlohmann::json to_json(const EquilibriumReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json eig = nlohmann::json::array();
  for (const auto& e : r.eigenvalues) eig.push_back({{"re", e.real()}, {"im", e.imag()}});
  return {{"location", {r.location.x(), r.location.y(), r.location.z()}},
          {"eigenvalues", eig},
          {"kind", to_string(r.kind)},
          {"lambda_s", num(r.lambda_s)},
          {"lambda_u", num(r.lambda_u)},
          {"lambda_ss", num(r.lambda_ss)}};
}

}  // namespace singflow
