#include "scafe/hull.hpp"

#include <algorithm>

namespace scafe::hull {

namespace {

double signed_pow(double t, double e) {
  return t >= 0 ? std::pow(t, e) : -std::pow(-t, e);
}

}  // namespace

double SuperEllipsoid::implicit(const Vec3& p) const {
  return std::pow(std::abs(p.x() / a), n) + std::pow(std::abs(p.y() / b), n) +
         std::pow(std::abs(p.z() / c), n);
}

Vec3 SuperEllipsoid::gradient(const Vec3& p) const {
  auto term = [this](double x, double s) {
    if (x == 0.0) return 0.0;
    const double m = std::abs(x / s);
    return (x > 0 ? 1.0 : -1.0) * n * std::pow(m, n - 1.0) / s;
  };
  return {term(p.x(), a), term(p.y(), b), term(p.z(), c)};
}

Vec3 SuperEllipsoid::parametric(double u, double v) const {
  const double e = 2.0 / n;
  return {a * signed_pow(std::cos(u), e) * signed_pow(std::cos(v), e),
          b * signed_pow(std::cos(u), e) * signed_pow(std::sin(v), e),
          c * signed_pow(std::sin(u), e)};
}

double SuperEllipsoid::area_element(double u, double v) const {
  // Central differences are accurate enough for sampling weights and avoid
  // the pole singularities of the analytic form for n != 2.
  const double h = 1e-5;
  const Vec3 du = (parametric(u + h, v) - parametric(u - h, v)) / (2 * h);
  const Vec3 dv = (parametric(u, v + h) - parametric(u, v - h)) / (2 * h);
  return du.cross(dv).norm();
}

std::vector<RayHit> ray_intersect(const SuperEllipsoid& hull, const Vec3& o, const Vec3& d) {
  if (d.norm() <= 0) throw DomainError("ray_intersect: zero direction");
  const Vec3 dir = d.normalized();
  auto g = [&](double k) { return hull.implicit(o + k * dir) - 1.0; };

  // S along a line is convex (n >= 1): locate the minimizer by golden-section
  // on an expanding bracket, then bisect each side for at most two roots.
  const double scale = std::max({hull.a, hull.b, hull.c, o.norm()});
  double lo = -8.0 * scale, hi = 8.0 * scale;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * scale; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = g(x2);
    }
  }
  const double k_min = 0.5 * (lo + hi);
  const double g_min = g(k_min);
  std::vector<RayHit> hits;
  if (g_min > 1e-12) return hits;  // ray misses the hull

  auto bisect = [&](double a, double b) {
    // g(a) and g(b) must straddle zero.
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      const double gm = g(m);
      if (std::abs(gm) < 1e-12) return m;
      if ((g(a) > 0) == (gm > 0))
        a = m;
      else
        b = m;
    }
    return 0.5 * (a + b);
  };

  if (std::abs(g_min) <= 1e-12) {
    hits.push_back({k_min, o + k_min * dir});  // tangent: single root
  } else {
    double left = k_min - scale;
    while (g(left) < 0) left -= scale;
    double right = k_min + scale;
    while (g(right) < 0) right += scale;
    const double k1 = bisect(left, k_min);
    const double k2 = bisect(right, k_min);
    hits.push_back({k1, o + k1 * dir});
    hits.push_back({k2, o + k2 * dir});
  }
  const double dn = d.norm();
  for (RayHit& h : hits) h.k /= dn;  // parameters in units of the raw direction
  std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) { return a.k < b.k; });
  return hits;
}

Vec3 project(const SuperEllipsoid& hull, const Vec3& p) {
  if (p.norm() < 1e-12) return {hull.a, 0, 0};
  const double s = hull.implicit(p);
  return p * std::pow(s, -1.0 / hull.n);
}

Vec3 sample_uniform(const SuperEllipsoid& hull, Rng& rng) {
  // Rejection sampling with the exact parametric area element as the
  // acceptance weight; the envelope constant is scanned once per hull shape.
  static thread_local SuperEllipsoid cached{-1, -1, -1, -1};
  static thread_local double g_max = 0;
  if (cached.a != hull.a || cached.b != hull.b || cached.c != hull.c || cached.n != hull.n) {
    g_max = 0;
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 80; ++j) {
        const double u = -M_PI / 2 + M_PI * i / 40.0;
        const double v = -M_PI + 2 * M_PI * j / 80.0;
        g_max = std::max(g_max, hull.area_element(u, v));
      }
    g_max *= 1.05;
    cached = hull;
  }
  for (int it = 0; it < 100000; ++it) {
    const double u = rng.uniform(-M_PI / 2, M_PI / 2);
    const double v = rng.uniform(-M_PI, M_PI);
    if (rng.uniform() * g_max <= hull.area_element(u, v)) return hull.parametric(u, v);
  }
  throw SolverError("sample_uniform: rejection sampling failed");
}

}  // namespace scafe::hull
