#pragma once

#include "svmstl/error.hpp"
#include "svmstl/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace svmstl {

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// Incremental hash over named inputs (files, directories, strings).
class ContentHash {
public:
  void add(std::string_view label, std::string_view data) {
    buffer_ += label;
    buffer_ += '\0';
    buffer_ += sha256_hex(data);
    buffer_ += '\n';
  }

  void add_file(const std::filesystem::path& path, const std::string& label) {
    add(label, text::read_file(path.string()));
  }

  /// Every regular file below `dir`, in sorted relative-path order.
  void add_tree(const std::filesystem::path& dir, const std::string& label) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      add_file(f, label + "/" + std::filesystem::relative(f, dir).generic_string());
    }
  }

  std::string hex() const { return sha256_hex(buffer_); }

private:
  std::string buffer_;
};

/// INI-style pipeline configuration: `[section]` headers and `key = value`
/// lines. Keys are validated against a schema of known section.key names.
class Config {
public:
  using Schema = std::map<std::string, std::set<std::string>>;

  Config() = default;

  static Config parse(const std::string& contents, const Schema& schema) {
    Config c;
    std::istringstream in(contents);
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError("config: " + e.message(), e.line());
    }
    c.schema_ = schema;
    for (const auto& [section, keys] : c.tree_) {
      if (keys.empty() && !keys.data().empty()) {
        throw ConfigError("config: top-level key '" + section + "' must live in a [section]");
      }
      for (const auto& [key, value] : keys) {
        c.check_known(section, key);
      }
    }
    return c;
  }

  static Config load(const std::string& path, const Schema& schema) {
    return parse(text::read_file(path), schema);
  }

  /// Applies a `section.key=value` override.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + assignment + "' must look like section.key=value");
    }
    set(assignment.substr(0, dot), std::string(text::trim(assignment.substr(dot + 1, eq - dot - 1))),
        std::string(text::trim(assignment.substr(eq + 1))));
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    check_known(section, key);
    tree_.put(boost::property_tree::ptree::path_type(section + "\x1f" + key, '\x1f'), value);
  }

  bool has(const std::string& section, const std::string& key) const {
    return tree_.get_optional<std::string>(path(section, key)).has_value();
  }

  std::string str(const std::string& section, const std::string& key, const std::string& fallback) const {
    auto v = tree_.get_optional<std::string>(path(section, key));
    return v ? std::string(text::trim(*v)) : fallback;
  }

  double real(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) {
      return fallback;
    }
    try {
      return text::parse_double(str(section, key, ""));
    } catch (const ParseError&) {
      throw ConfigError("config " + section + "." + key + ": expected a number, got '" + str(section, key, "") + "'");
    }
  }

  long long integer(const std::string& section, const std::string& key, long long fallback) const {
    if (!has(section, key)) {
      return fallback;
    }
    try {
      return text::parse_int(str(section, key, ""));
    } catch (const ParseError&) {
      throw ConfigError("config " + section + "." + key + ": expected an integer, got '" + str(section, key, "") +
                        "'");
    }
  }

  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) const {
    const long long v = integer(section, key, static_cast<long long>(fallback));
    if (v < 0) {
      throw ConfigError("config " + section + "." + key + " must be non-negative");
    }
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) {
      return fallback;
    }
    const std::string v = str(section, key, "");
    if (v == "true" || v == "yes" || v == "1" || v == "on") {
      return true;
    }
    if (v == "false" || v == "no" || v == "0" || v == "off") {
      return false;
    }
    throw ConfigError("config " + section + "." + key + ": expected true/false, got '" + v + "'");
  }

  /// Comma-separated list; empty entries are dropped.
  std::vector<std::string> list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    if (!has(section, key)) {
      return out;
    }
    const std::string raw = str(section, key, "");
    for (auto item : text::split(raw, ',')) {
      if (!item.empty()) {
        out.emplace_back(item);
      }
    }
    return out;
  }

  std::vector<double> reals(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : list(section, key)) {
      try {
        out.push_back(text::parse_double(item));
      } catch (const ParseError&) {
        throw ConfigError("config " + section + "." + key + ": '" + item + "' is not a number");
      }
    }
    return out;
  }

  /// Canonical `section.key=value` lines in sorted order, skipping the
  /// given sections and dotted keys.
  std::string canonical(const std::set<std::string>& exclude = {}) const {
    std::map<std::string, std::string> flat;
    for (const auto& [section, keys] : tree_) {
      if (exclude.count(section)) {
        continue;
      }
      for (const auto& [key, value] : keys) {
        if (!exclude.count(section + "." + key)) {
          flat[section + "." + key] = std::string(text::trim(value.data()));
        }
      }
    }
    std::string out;
    for (const auto& [k, v] : flat) {
      out += k + "=" + v + "\n";
    }
    return out;
  }

private:
  static boost::property_tree::ptree::path_type path(const std::string& section, const std::string& key) {
    return boost::property_tree::ptree::path_type(section + "\x1f" + key, '\x1f');
  }

  void check_known(const std::string& section, const std::string& key) const {
    if (schema_.empty()) {
      return;
    }
    const auto it = schema_.find(section);
    if (it == schema_.end()) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    if (!it->second.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }

  boost::property_tree::ptree tree_;
  Schema schema_;
};

} // namespace svmstl
