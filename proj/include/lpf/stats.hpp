#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lpf/error.hpp"

namespace lpf::stats {

/// Neumaier-compensated accumulator. Sums are order-insensitive to within
/// the last ulp, so folds stay stable when inputs arrive in any order.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) {
  KahanSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw PreconditionError("mean of empty series");
  return sum(xs) / static_cast<double>(xs.size());
}

/// Sample (n - 1) standard deviation; 0 for a single point.
inline double sample_stdev(std::span<const double> xs) {
  if (xs.empty()) throw PreconditionError("stdev of empty series");
  if (xs.size() == 1) return 0.0;
  const double m = mean(xs);
  KahanSum acc;
  for (double x : xs) acc.add((x - m) * (x - m));
  return std::sqrt(acc.value() / static_cast<double>(xs.size() - 1));
}

/// Weighted mean sum(w_i x_i) / sum(w_i).
inline double weighted_mean(std::span<const double> xs, std::span<const double> ws) {
  if (xs.size() != ws.size() || xs.empty()) throw PreconditionError("weighted_mean: size mismatch");
  KahanSum num;
  KahanSum den;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num.add(xs[i] * ws[i]);
    den.add(ws[i]);
  }
  if (den.value() <= 0.0) throw PreconditionError("weighted_mean: non-positive total weight");
  return num.value() / den.value();
}

/// Pearson correlation, population moments. Throws on zero variance.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("pearson: series lengths differ");
  if (a.size() < 2) throw PreconditionError("pearson: need at least 2 points");
  const double ma = mean(a);
  const double mb = mean(b);
  KahanSum sab;
  KahanSum saa;
  KahanSum sbb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab.add(da * db);
    saa.add(da * da);
    sbb.add(db * db);
  }
  if (saa.value() == 0.0 || sbb.value() == 0.0) {
    throw PreconditionError("pearson: zero variance series, correlation undefined");
  }
  const double r = sab.value() / std::sqrt(saa.value() * sbb.value());
  return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks, ties receive the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

/// Fixed-point rendering with round-half-away-from-zero applied to the
/// shortest round-trip decimal form, so 73.15 renders as "73.2" at one
/// decimal even though its binary value sits just below the midpoint.
inline std::string format_fixed(double value, int precision) {
  if (precision < 0) throw PreconditionError("format_fixed: negative precision");
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (res.ec != std::errc()) throw Error("format_fixed: to_chars failed");
  std::string s(buf, res.ptr);
  const bool negative = !s.empty() && s[0] == '-';
  if (negative) s.erase(0, 1);
  std::size_t dot = s.find('.');
  std::string int_part = dot == std::string::npos ? s : s.substr(0, dot);
  std::string frac = dot == std::string::npos ? std::string() : s.substr(dot + 1);
  const bool round_up = frac.size() > static_cast<std::size_t>(precision) &&
                        frac[static_cast<std::size_t>(precision)] >= '5';
  frac.resize(static_cast<std::size_t>(precision), '0');
  std::string digits = int_part + frac;
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0) {
      if (digits[static_cast<std::size_t>(i)] == '9') {
        digits[static_cast<std::size_t>(i)] = '0';
        --i;
      } else {
        ++digits[static_cast<std::size_t>(i)];
        break;
      }
    }
    if (i < 0) digits.insert(digits.begin(), '1');
  }
  const std::size_t int_len = digits.size() - static_cast<std::size_t>(precision);
  std::string out = digits.substr(0, int_len);
  if (precision > 0) out += "." + digits.substr(int_len);
  const bool all_zero = std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; });
  if (negative && !all_zero) out.insert(out.begin(), '-');
  return out;
}

}  // namespace lpf::stats
