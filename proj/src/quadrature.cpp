#include "stokeslab/quadrature.hpp"

#include "stokeslab/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace stokeslab {

namespace {

LineRule make_gauss_legendre(int n) {
  LineRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p_prev = 1.0, p = z;
      for (int k = 2; k <= n; ++k) {
        const double next = ((2.0 * k - 1.0) * z * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
      }
      dp = n * (z * p - p_prev) / (z * z - 1.0);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[n - 1 - i] = 0.5 * (1.0 + z);
    r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

TriangleRule dunavant4() {
  TriangleRule r;
  r.degree = 4;
  const double a = 0.445948490915965, wa = 0.223381589678011;
  const double b = 0.091576213509771, wb = 0.109951743655322;
  for (double v : {a, b}) {
    const double w = v == a ? wa : wb;
    r.bary.push_back({v, v, 1.0 - 2.0 * v});
    r.bary.push_back({v, 1.0 - 2.0 * v, v});
    r.bary.push_back({1.0 - 2.0 * v, v, v});
    for (int k = 0; k < 3; ++k) r.w.push_back(w);
  }
  return r;
}

TriangleRule dunavant6() {
  TriangleRule r;
  r.degree = 6;
  const double a = 0.249286745170910, wa = 0.116786275726379;
  const double b = 0.063089014491502, wb = 0.050844906370207;
  for (double v : {a, b}) {
    const double w = v == a ? wa : wb;
    r.bary.push_back({v, v, 1.0 - 2.0 * v});
    r.bary.push_back({v, 1.0 - 2.0 * v, v});
    r.bary.push_back({1.0 - 2.0 * v, v, v});
    for (int k = 0; k < 3; ++k) r.w.push_back(w);
  }
  const double c0 = 0.053145049844817, c1 = 0.310352451033784, c2 = 0.636502499121399;
  const double wc = 0.082851075618374;
  const std::array<std::array<double, 3>, 6> perms{{{c0, c1, c2}, {c0, c2, c1}, {c1, c0, c2},
                                                    {c1, c2, c0}, {c2, c0, c1}, {c2, c1, c0}}};
  for (const auto& p : perms) {
    r.bary.push_back(p);
    r.w.push_back(wc);
  }
  return r;
}

TriangleRule collapsed_gauss(int degree) {
  const int n = (degree + 3) / 2;
  const LineRule& g = gauss_legendre(n);
  TriangleRule r;
  r.degree = degree;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = g.x[i], v = g.x[j];
      const double l1 = u, l2 = v * (1.0 - u);
      r.bary.push_back({1.0 - l1 - l2, l1, l2});
      r.w.push_back(2.0 * g.w[i] * g.w[j] * (1.0 - u));
    }
  }
  return r;
}

}  // namespace

const LineRule& gauss_legendre(int n) {
  require(n >= 1 && n <= 200, ErrorKind::invalid_argument, "Gauss-Legendre order out of range");
  static std::mutex mutex;
  static std::map<int, LineRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

const TriangleRule& triangle_rule(int degree) {
  require(degree >= 0 && degree <= 60, ErrorKind::invalid_argument, "triangle rule degree out of range");
  static const TriangleRule d4 = dunavant4();
  static const TriangleRule d6 = dunavant6();
  if (degree <= 4) return d4;
  if (degree <= 6) return d6;
  static std::mutex mutex;
  static std::map<int, TriangleRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, collapsed_gauss(degree)).first;
  return it->second;
}

}  // namespace stokeslab
