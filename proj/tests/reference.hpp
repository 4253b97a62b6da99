#pragma once

// Brute-force reference implementations used only by the tests. They follow
// the textbook definitions directly and share no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace aso::reference {

// Rank by counting: #strictly smaller + (#equal + 1) / 2.
inline std::vector<double> count_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) less += 1;
      if (x == v[i]) equal += 1;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  return cov / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(count_ranks(x), count_ranks(y));
}

// Tie-free closed form 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_tie_free(const std::vector<double>& x,
                                const std::vector<double>& y) {
  const auto rx = count_ranks(x), ry = count_ranks(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

inline double mae(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

inline double acc(const std::vector<double>& x, const std::vector<double>& y,
                  double tol) {
  double hit = 0;
  for (std::size_t i = 0; i < x.size(); ++i) hit += std::fabs(x[i] - y[i]) <= tol;
  return hit / static_cast<double>(x.size());
}

// Enumerates every unordered pair inside every unit.
inline double relaxed_match(const std::vector<std::vector<double>>& units,
                            double threshold) {
  double pairs = 0, hits = 0;
  for (const auto& u : units) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (j <= i) continue;
        pairs += 1;
        hits += std::fabs(u[i] - u[j]) <= threshold;
      }
    }
  }
  return hits / pairs;
}

// Interval alpha from pairwise disagreements, without a coincidence matrix:
//   D_o = (1/n) sum_u 1/(m_u - 1) sum_{i != j in u} (v_i - v_j)^2
//   D_e = 1/(n (n-1)) sum_{a != b over all pairable values} (v_a - v_b)^2
inline double interval_alpha(const std::vector<std::vector<double>>& units) {
  std::vector<double> pooled;
  double observed = 0;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    double within = 0;
    for (double a : u) {
      for (double b : u) within += (a - b) * (a - b);
    }
    observed += within / static_cast<double>(u.size() - 1);
    pooled.insert(pooled.end(), u.begin(), u.end());
  }
  const double n = static_cast<double>(pooled.size());
  double expected = 0;
  for (double a : pooled) {
    for (double b : pooled) expected += (a - b) * (a - b);
  }
  observed /= n;
  expected /= n * (n - 1.0);
  return 1.0 - observed / expected;
}

}  // namespace aso::reference
