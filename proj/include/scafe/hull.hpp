#pragma once

#include <optional>
#include <vector>

#include "scafe/core.hpp"

namespace scafe::hull {

/// Superellipsoid |x/a|^n + |y/b|^n + |z/c|^n = 1 (n = 2 is an ellipsoid).
struct SuperEllipsoid {
  double a = 0.3;
  double b = 0.3;
  double c = 0.05;
  double n = 2.0;

  /// Implicit function value S(p); S = 1 on the surface, < 1 inside.
  double implicit(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;
  /// Parametric surface point, u in [-pi/2, pi/2], v in [-pi, pi].
  Vec3 parametric(double u, double v) const;
  /// Local area element of the parametric map at (u, v).
  double area_element(double u, double v) const;
};

struct RayHit {
  double k = 0;
  Vec3 point{Vec3::Zero()};
};

/// Intersections of the ray o + k d with the hull surface, ascending k,
/// found by bracketing + bisection to |dS| < 1e-12. Tangency yields one hit.
std::vector<RayHit> ray_intersect(const SuperEllipsoid& hull, const Vec3& o, const Vec3& d);

/// Radial projection of p onto the surface (deterministic, not closest-point).
Vec3 project(const SuperEllipsoid& hull, const Vec3& p);

/// Area-weighted rejection sample of the surface.
Vec3 sample_uniform(const SuperEllipsoid& hull, Rng& rng);

}  // namespace scafe::hull
