#pragma once

#include "singflow/field.hpp"
#include "singflow/types.hpp"

#include <json.hpp>

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace singflow {

enum class EquilibriumKind { lorenz_like, saddle_focus, saddle, sink, source, non_hyperbolic };

std::string to_string(EquilibriumKind kind);
EquilibriumKind equilibrium_kind_from_string(const std::string& s);

struct EquilibriumReport {
  Vec3 location = Vec3::Zero();
  std::array<std::complex<double>, 3> eigenvalues{};
  EquilibriumKind kind = EquilibriumKind::non_hyperbolic;
  double lambda_s = kNaN;   ///< weak stable rate
  double lambda_u = kNaN;   ///< expansion rate
  double lambda_ss = kNaN;  ///< strong stable rate (real spectra only)
};

inline constexpr double kHyperbolicityTol = 1e-8;

/// Roots of det(J - lambda I) from the cubic characteristic polynomial,
/// sorted by real part then imaginary part.
std::array<std::complex<double>, 3> characteristic_roots(const Mat3& j);

/// Classify an equilibrium from its Jacobian.
EquilibriumReport classify(const Vec3& location, const Mat3& jacobian);

/// Newton search seeded on a grid of spacing grid_res over the field domain.
std::vector<EquilibriumReport> find_equilibria(const Field3& field, double grid_res);

/// Number of lorenz_like reports whose location satisfies `member` (all when empty).
int count_lorenz_like(const std::vector<EquilibriumReport>& reports,
                      const std::function<bool(const Vec3&)>& member = {});

/// Unit eigenvector of a real eigenvalue, oriented so its largest-magnitude
/// component is positive.
Vec3 real_eigenvector(const Mat3& j, double lambda);

nlohmann::json to_json(const EquilibriumReport& r);

}  // namespace singflow
