#pragma once
// Independent reference implementations used by the unit and acceptance tests. They work on
// plain nested loops over std::vector so they share no code path with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat random_unit_rows(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(n, std::vector<double>(d));
  for (auto& row : m) {
    double s = 0;
    for (auto& v : row) {
      v = g(rng);
      s += v * v;
    }
    for (auto& v : row) v /= std::sqrt(s);
  }
  return m;
}

/// -(1/2) sum_i log softmax_j(a_i . b_j / tau)[i], or / N with mean reduction.
inline double infonce(const Mat& a, const Mat& b, double tau, bool mean_reduction) {
  const std::size_t n = a.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < a[i].size(); ++k) dot += a[i][k] * b[j][k];
      logits[j] = dot / tau;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double l : logits) z += std::exp(l - mx);
    total += (logits[i] - mx) - std::log(z);
  }
  return mean_reduction ? -total / static_cast<double>(n) : -0.5 * total;
}

inline double align(const Mat& t, const Mat& l, const Mat& i, double tau, double wtl, double wti, double wli,
                    bool mean_reduction) {
  return wtl / 2 * (infonce(t, l, tau, mean_reduction) + infonce(l, t, tau, mean_reduction)) +
         wti / 2 * (infonce(t, i, tau, mean_reduction) + infonce(i, t, tau, mean_reduction)) +
         wli / 2 * (infonce(l, i, tau, mean_reduction) + infonce(i, l, tau, mean_reduction));
}

/// Per-sample mean over valid channels, averaged over the batch.
inline double regression(const Mat& yhat, const Mat& y, const Mat& mask) {
  double total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double s = 0, valid = 0;
    for (std::size_t c = 0; c < y[i].size(); ++c) {
      if (mask[i][c] > 0) {
        s += (yhat[i][c] - y[i][c]) * (yhat[i][c] - y[i][c]);
        valid += 1;
      }
    }
    if (valid > 0) total += s / valid;
  }
  return total / static_cast<double>(y.size());
}

/// mean_i |v_i - (x1_i - x0_i)|^2 given the network's velocity rows.
inline double flow_matching(const Mat& v, const Mat& x0, const Mat& x1) {
  double total = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t k = 0; k < v[i].size(); ++k) {
      const double r = v[i][k] - (x1[i][k] - x0[i][k]);
      total += r * r;
    }
  }
  return total / static_cast<double>(v.size());
}

/// Central difference of f with respect to x[k].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double orig = x;
  x = orig + h;
  const double up = f();
  x = orig - h;
  const double down = f();
  x = orig;
  return (up - down) / (2 * h);
}

/// 1 - SS_res / SS_tot in two passes.
inline double r_squared(const std::vector<double>& pred, const std::vector<double>& truth) {
  double mean = 0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double res = 0, tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return 1.0 - res / tot;
}

}  // namespace oracle
