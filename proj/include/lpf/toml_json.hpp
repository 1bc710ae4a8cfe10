#pragma once

// TOML documents are converted to nlohmann::json so profiles and run
// configs share one loading path regardless of file format.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <toml++/toml.hpp>

#include "lpf/error.hpp"

namespace lpf {

namespace detail {

inline nlohmann::json toml_to_json(const toml::node& node) {
  if (const auto* tbl = node.as_table()) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [key, value] : *tbl) obj[std::string(key.str())] = toml_to_json(value);
    return obj;
  }
  if (const auto* arr = node.as_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& value : *arr) out.push_back(toml_to_json(value));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  std::ostringstream os;
  if (const auto* d = node.as_date()) os << d->get();
  else if (const auto* t = node.as_time()) os << t->get();
  else if (const auto* dt = node.as_date_time()) os << dt->get();
  return os.str();
}

}  // namespace detail

/// Reads a .toml or .json file into JSON.
inline nlohmann::json load_structured_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  if (path.extension() == ".json") {
    auto j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed JSON in " + path.string());
    return j;
  }
  try {
    const toml::table tbl = toml::parse(content, path.string());
    return detail::toml_to_json(tbl);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "malformed TOML in " << path.string() << ": " << e.description() << " (line "
       << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace lpf
