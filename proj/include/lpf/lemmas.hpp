#pragma once

// Lemma lookup for keyword coverage. The default provider reads two TSV
// tables: `token<TAB>lemma` and `token<TAB>lemma1,lemma2,...`. Tokens
// absent from a table are their own lemma.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "lpf/error.hpp"
#include "lpf/text.hpp"

namespace lpf {

class LemmaProvider {
 public:
  virtual ~LemmaProvider() = default;
  virtual std::string base_lemma(std::string_view token) const = 0;
  /// Always contains base_lemma(token).
  virtual std::set<std::string> extended_lemmas(std::string_view token) const = 0;
};

/// Provider with no tables: every token is its own lemma.
class IdentityLemmas : public LemmaProvider {
 public:
  std::string base_lemma(std::string_view token) const override { return text::lowercase(token); }
  std::set<std::string> extended_lemmas(std::string_view token) const override { return {base_lemma(token)}; }
};

class TableLemmas : public LemmaProvider {
 public:
  TableLemmas() = default;

  static TableLemmas from_files(const std::filesystem::path& base_tsv, const std::filesystem::path& extended_tsv = {}) {
    TableLemmas t;
    read_tsv(base_tsv, [&](const std::string& token, const std::string& value) {
      t.base_[token] = text::lowercase(text::trim(value));
    });
    if (!extended_tsv.empty()) {
      read_tsv(extended_tsv, [&](const std::string& token, const std::string& value) {
        auto& set = t.extended_[token];
        for (const auto& l : text::split(value, ',')) {
          const auto lemma = text::lowercase(text::trim(l));
          if (!lemma.empty()) set.insert(lemma);
        }
      });
    }
    return t;
  }

  void add_base(std::string_view token, std::string_view lemma) {
    base_[text::lowercase(token)] = text::lowercase(lemma);
  }
  void add_extended(std::string_view token, std::string_view lemma) {
    extended_[text::lowercase(token)].insert(text::lowercase(lemma));
  }

  std::string base_lemma(std::string_view token) const override {
    const std::string key = text::lowercase(token);
    const auto it = base_.find(key);
    return it == base_.end() ? key : it->second;
  }

  std::set<std::string> extended_lemmas(std::string_view token) const override {
    const std::string key = text::lowercase(token);
    std::set<std::string> out{base_lemma(key)};
    const auto it = extended_.find(key);
    if (it != extended_.end()) out.insert(it->second.begin(), it->second.end());
    return out;
  }

  std::size_t base_size() const { return base_.size(); }
  std::size_t extended_size() const { return extended_.size(); }

 private:
  template <typename Fn>
  static void read_tsv(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open lemma table " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw LoadError(path.string() + ":" + std::to_string(line_no) + ": expected token<TAB>lemma");
      }
      fn(text::lowercase(text::trim(line.substr(0, tab))), line.substr(tab + 1));
    }
  }

  std::unordered_map<std::string, std::string> base_;
  std::unordered_map<std::string, std::set<std::string>> extended_;
};

}  // namespace lpf
