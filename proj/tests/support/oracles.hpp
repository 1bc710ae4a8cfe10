#pragma once

// Brute-force reference implementations. They restrict themselves to
// ASCII input and spell out each definition directly, sharing no code
// with the library beyond its data types.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace lpf::oracle {

inline bool ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

/// Whitespace split, lowercase, trim punctuation at both ends.
inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && ascii_punct(cur[b])) ++b;
    while (e > b && ascii_punct(cur[e - 1])) --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

inline double distinct_n(const std::vector<std::string>& texts, int n) {
  std::map<std::string, int> counts;
  int total = 0;
  for (const auto& t : texts) {
    const auto tok = tokens(t);
    for (int i = 0; i + n <= static_cast<int>(tok.size()); ++i) {
      std::string gram;
      for (int k = 0; k < n; ++k) gram += tok[static_cast<std::size_t>(i + k)] + '\x1f';
      ++counts[gram];
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(counts.size()) / total;
}

using Probs = std::map<std::string, double>;

inline std::string argmax(const Probs& p) {
  return std::max_element(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

/// Two or more agreeing classifiers decide; otherwise the voted label with
/// the largest total probability (lexicographically first on ties).
inline std::string majority(const std::vector<Probs>& verdicts) {
  std::vector<std::string> votes;
  for (const auto& v : verdicts) votes.push_back(argmax(v));
  for (const auto& candidate : votes) {
    if (2 * std::count(votes.begin(), votes.end(), candidate) > static_cast<long>(votes.size())) return candidate;
  }
  std::set<std::string> voted(votes.begin(), votes.end());
  long top = 0;
  for (const auto& l : voted) top = std::max<long>(top, std::count(votes.begin(), votes.end(), l));
  std::string best;
  double best_mass = -1;
  for (const auto& l : voted) {
    if (std::count(votes.begin(), votes.end(), l) != top) continue;
    double mass = 0;
    for (const auto& v : verdicts) mass += v.count(l) ? v.at(l) : 0.0;
    if (mass > best_mass + 1e-12) {
      best_mass = mass;
      best = l;
    }
  }
  return best;
}

struct Lemmas {
  std::map<std::string, std::string> base;
  std::map<std::string, std::set<std::string>> extended;

  std::string lemma(const std::string& t) const { return base.count(t) ? base.at(t) : t; }
  std::set<std::string> ext(const std::string& t) const {
    std::set<std::string> out{lemma(t)};
    if (extended.count(t)) out.insert(extended.at(t).begin(), extended.at(t).end());
    return out;
  }
};

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct KeywordScores {
  double any = 0, all = 0, cov = 0, ext_cov = 0;
};

inline KeywordScores keywords(const std::vector<std::string>& kws, const std::vector<std::string>& texts,
                              const Lemmas& lem) {
  KeywordScores s;
  for (const auto& t : texts) {
    const auto tok = tokens(t);
    int exact = 0, base = 0, ext = 0;
    for (const auto& raw : kws) {
      const auto k = lower(raw);
      bool e = false, b = false, x = false;
      for (const auto& w : tok) {
        e = e || w == k;
        b = b || lem.lemma(w) == lem.lemma(k);
        for (const auto& a : lem.ext(w))
          for (const auto& c : lem.ext(k)) x = x || a == c;
      }
      exact += e;
      base += b;
      ext += x;
    }
    const double n = static_cast<double>(kws.size());
    s.any += exact > 0;
    s.all += exact == static_cast<int>(kws.size());
    s.cov += base / n;
    s.ext_cov += ext / n;
  }
  const double m = static_cast<double>(texts.size());
  return {100 * s.any / m, 100 * s.all / m, 100 * s.cov / m, 100 * s.ext_cov / m};
}

inline double mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// values[seed][dataset] = per-control values. Returns {mean, sd} over seeds
/// of the weight-averaged dataset means.
inline std::pair<double, double> weighted(const std::map<long, std::map<std::string, std::vector<double>>>& values,
                                          const std::map<std::string, double>& weights) {
  std::vector<double> points;
  for (const auto& [seed, by_ds] : values) {
    double num = 0, den = 0;
    for (const auto& [ds, vals] : by_ds) {
      num += weights.at(ds) * mean(vals);
      den += weights.at(ds);
    }
    points.push_back(num / den);
  }
  return {mean(points), sample_sd(points)};
}

}  // namespace lpf::oracle
