#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ioest::config {

/// One [section] of a key = value document. Lookups of absent or malformed
/// keys throw InvalidConfig naming "section.key".
class Section {
 public:
  Section() = default;
  Section(std::string name, std::map<std::string, std::string> entries);

  const std::string& name() const noexcept { return name_; }
  bool has(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& entries() const noexcept {
    return entries_;
  }

  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  std::uint64_t get_u64(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Comma-separated list.
  std::vector<double> get_doubles(std::string_view key) const;
  std::vector<std::uint64_t> get_u64s(std::string_view key) const;

  /// Throws InvalidConfig for any key outside `allowed`.
  void reject_unknown(std::initializer_list<std::string_view> allowed) const;

 private:
  std::string qualified(std::string_view key) const;

  std::string name_;
  std::map<std::string, std::string, std::less<>> entries_;
};

/// INI-style document: "[section]" headers, "key = value" lines, ';' or '#'
/// comments. Keys before the first header are rejected.
class Document {
 public:
  static Document parse(const std::string& text, const std::string& source = "<config>");
  static Document load_file(const std::string& path);

  const std::string& text() const noexcept { return text_; }
  const std::string& source() const noexcept { return source_; }

  bool has_section(std::string_view name) const;
  /// Empty section when absent.
  const Section& section(std::string_view name) const;
  const Section& require_section(std::string_view name) const;
  void reject_unknown_sections(std::initializer_list<std::string_view> allowed) const;
  std::vector<std::string> section_names() const;

 private:
  std::string text_;
  std::string source_;
  std::map<std::string, Section, std::less<>> sections_;
};

/// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string content_hash(std::string_view text);

}  // namespace ioest::config
