#pragma once

// Max-normalized histograms of stroboscopic samples over [0, N].

#include <algorithm>
#include <cmath>
#include <vector>

#include "qbif/error.hpp"

namespace qbif {

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> weights;  // max-normalized
  std::vector<long> counts;

  [[nodiscard]] int bins() const noexcept { return static_cast<int>(weights.size()); }
  [[nodiscard]] double width() const noexcept { return (hi - lo) / static_cast<double>(weights.size()); }
  [[nodiscard]] double edge(int i) const noexcept { return lo + i * width(); }
  [[nodiscard]] double center(int i) const noexcept { return lo + (i + 0.5) * width(); }

  [[nodiscard]] int occupied() const {
    return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; }));
  }

  /// Distance between the bins holding the 25% and 75% quantiles of the pooled samples.
  [[nodiscard]] double interquartile_width() const {
    long total = 0;
    for (long c : counts) total += c;
    auto quantile_bin = [&](double q) {
      long acc = 0;
      for (int i = 0; i < bins(); ++i) {
        acc += counts[static_cast<std::size_t>(i)];
        if (static_cast<double>(acc) >= q * static_cast<double>(total)) return i;
      }
      return bins() - 1;
    };
    return (quantile_bin(0.75) - quantile_bin(0.25)) * width();
  }
};

inline Histogram build_histogram(const std::vector<std::vector<double>>& series, int N, int n_bins) {
  if (n_bins < 1) throw InvalidParameter("build_histogram: n_bins must be >= 1");
  if (N < 1) throw InvalidParameter("build_histogram: N must be >= 1");
  Histogram h;
  h.lo = 0.0;
  h.hi = static_cast<double>(N);
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  long total = 0;
  for (const auto& s : series)
    for (double v : s) {
      if (!std::isfinite(v)) throw IntegrityError("build_histogram: non-finite sample");
      int b = static_cast<int>(std::floor(v / h.hi * n_bins));
      b = std::clamp(b, 0, n_bins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
      ++total;
    }
  if (total == 0) throw InvalidParameter("build_histogram: no samples to pool");
  const long peak = *std::max_element(h.counts.begin(), h.counts.end());
  h.weights.resize(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    h.weights[i] = static_cast<double>(h.counts[i]) / static_cast<double>(peak);
  return h;
}

inline Histogram build_histogram(const std::vector<double>& series, int N, int n_bins) {
  return build_histogram(std::vector<std::vector<double>>{series}, N, n_bins);
}

/// Number of groups left after splitting the sorted samples at gaps wider than `gap`.
inline int cluster_count(std::vector<double> samples, double gap) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  int n = 1;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i] - samples[i - 1] > gap) ++n;
  return n;
}

/// Number of peaks whose topographic prominence is at least `prominence`
/// (weights are max-normalized, so the global peak always counts). Plateaus
/// count once; of two equally high peaks the left one is the reference.
inline int histogram_modes(const Histogram& h, double prominence = 0.1) {
  const auto& w = h.weights;
  const int n = static_cast<int>(w.size());
  auto at = [&](int k) { return w[static_cast<std::size_t>(k)]; };
  int modes = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && at(j + 1) == at(i)) ++j;
    const double v = at(i);
    const bool left = i == 0 || at(i - 1) < v;
    const bool right = j == n - 1 || at(j + 1) < v;
    if (v > 0.0 && left && right) {
      // Lowest point on each side before reaching higher ground (or the edge).
      double lmin = v;
      bool lhigher = false;
      for (int k = i - 1; k >= 0; --k) {
        if (at(k) >= v) { lhigher = true; break; }
        lmin = std::min(lmin, at(k));
      }
      double rmin = v;
      bool rhigher = false;
      for (int k = j + 1; k < n; ++k) {
        if (at(k) > v) { rhigher = true; break; }
        rmin = std::min(rmin, at(k));
      }
      double base = 0.0;
      if (lhigher && rhigher) base = std::max(lmin, rmin);
      else if (lhigher) base = lmin;
      else if (rhigher) base = rmin;
      if (v - base >= prominence) ++modes;
    }
    i = j + 1;
  }
  return modes;
}

}  // namespace qbif
