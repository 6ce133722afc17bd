#pragma once

// Brute-force reference implementations, kept independent of the library.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

// Upper tail of chi-square(1) by composite Simpson on the normal density:
// P(X > x) = 2 * integral_{sqrt x}^{inf} phi(u) du.
inline double chi2_tail(double x, int panels = 20000) {
  const double a = std::sqrt(x);
  const double b = a + 40.0;
  const double h = (b - a) / panels;
  auto f = [](double u) { return std::exp(-0.5 * u * u); };
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return 2.0 * s * h / 3.0 / std::sqrt(2.0 * M_PI);
}

inline double chi2_plain(double b, double c) { return b + c == 0 ? 0.0 : (b - c) * (b - c) / (b + c); }

inline double chi2_corrected(double b, double c) {
  if (b + c == 0) return 0.0;
  const double d = std::max(std::abs(b - c) - 1.0, 0.0);
  return d * d / (b + c);
}

// Plurality over present answers; ties go to the earliest position.
template <class T>
std::optional<T> plurality_first(const std::vector<std::optional<T>>& v) {
  std::optional<T> best;
  std::size_t best_n = 0;
  for (const auto& a : v) {
    if (!a) continue;
    std::size_t n = 0;
    for (const auto& b : v) n += b && *b == *a;
    if (n > best_n) {
      best_n = n;
      best = a;
    }
  }
  return best;
}

}  // namespace oracle
