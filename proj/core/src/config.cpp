#include "ioest/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ioest/error.hpp"

namespace ioest::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Section empty_section;

}  // namespace

Section::Section(std::string name, std::map<std::string, std::string> entries)
    : name_(std::move(name)), entries_(entries.begin(), entries.end()) {}

bool Section::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::string Section::qualified(std::string_view key) const {
  return name_ + "." + std::string(key);
}

std::string Section::get_string(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw Error(ErrorKind::InvalidConfig, "missing required key '" + qualified(key) + "'");
  }
  return it->second;
}

std::string Section::get_string(std::string_view key, std::string_view fallback) const {
  return has(key) ? get_string(key) : std::string(fallback);
}

double Section::get_double(std::string_view key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used == raw.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidConfig,
              "key '" + qualified(key) + "' expects a finite number, got '" + raw + "'");
}

double Section::get_double(std::string_view key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::uint64_t Section::get_u64(std::string_view key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t used = 0;
    if (!raw.empty() && raw[0] != '-') {
      const auto v = std::stoull(raw, &used);
      if (used == raw.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidConfig,
              "key '" + qualified(key) + "' expects a non-negative integer, got '" + raw + "'");
}

std::uint64_t Section::get_u64(std::string_view key, std::uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

bool Section::get_bool(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string raw = get_string(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw Error(ErrorKind::InvalidConfig,
              "key '" + qualified(key) + "' expects true/false, got '" + raw + "'");
}

std::vector<double> Section::get_doubles(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used == item.size() && std::isfinite(v)) {
        out.push_back(v);
        continue;
      }
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidConfig,
                "key '" + qualified(key) + "' has a bad list element '" + item + "'");
  }
  return out;
}

std::vector<std::uint64_t> Section::get_u64s(std::string_view key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(get_string(key))) {
    try {
      std::size_t used = 0;
      if (item[0] != '-') {
        const auto v = std::stoull(item, &used);
        if (used == item.size()) {
          out.push_back(v);
          continue;
        }
      }
      // Accept integral values written in floating-point form, e.g. 1e6.
      const double d = std::stod(item, &used);
      if (used == item.size() && d >= 0 && d == std::floor(d) && d < 1.8e19) {
        out.push_back(static_cast<std::uint64_t>(d));
        continue;
      }
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidConfig,
                "key '" + qualified(key) + "' has a bad integer element '" + item + "'");
  }
  return out;
}

void Section::reject_unknown(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, value] : entries_) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) {
      throw Error(ErrorKind::InvalidConfig, "unknown key '" + qualified(key) + "'");
    }
  }
}

Document Document::parse(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(e.line()) + ": " +
                                              e.message());
  }
  Document doc;
  doc.text_ = text;
  doc.source_ = source;
  for (const auto& [name, child] : tree) {
    if (child.empty()) {
      throw Error(ErrorKind::InvalidConfig,
                  source + ": key '" + name + "' appears outside any [section]");
    }
    std::map<std::string, std::string> entries;
    for (const auto& [key, value] : child) entries.emplace(key, trim(value.data()));
    doc.sections_.emplace(name, Section(name, std::move(entries)));
  }
  return doc;
}

Document Document::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

bool Document::has_section(std::string_view name) const {
  return sections_.find(name) != sections_.end();
}

const Section& Document::section(std::string_view name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) {
    empty_section = Section(std::string(name), {});
    return empty_section;
  }
  return it->second;
}

const Section& Document::require_section(std::string_view name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) {
    throw Error(ErrorKind::InvalidConfig,
                source_ + ": missing required section [" + std::string(name) + "]");
  }
  return it->second;
}

void Document::reject_unknown_sections(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [name, section] : sections_) {
    bool known = false;
    for (auto a : allowed) known = known || a == name;
    if (!known) {
      throw Error(ErrorKind::InvalidConfig, source_ + ": unknown section [" + name + "]");
    }
  }
}

std::vector<std::string> Document::section_names() const {
  std::vector<std::string> out;
  for (const auto& [name, section] : sections_) out.push_back(name);
  return out;
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ioest::config
