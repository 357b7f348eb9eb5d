#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "stormlog/value.hpp"

// Grok-style named patterns compiled down to a single regular expression.
//
// A pattern expression is a regular expression that may embed references to
// library entries:
//
//   %{NAME}               inline NAME's body, no capture
//   %{NAME:field}         capture as text
//   %{NAME:field:type}    capture and convert; type is one of
//                         int, float, text, ip, timestamp, level, duration
//
// Plain parentheses in bodies never capture; only `%{NAME:field}` references
// do. Expressions match anywhere in a line unless they start with `^`.
namespace stormlog::grok {

class PatternError : public Error {
 public:
  enum class Code {
    MalformedLine,
    DuplicateName,
    BuiltinShadowed,
    UnknownPattern,
    CyclicReference,
    DuplicateCapture,
    InvalidExpression,
  };

  PatternError(Code code, std::string message, int line = 0)
      : Error(std::move(message)), code_(code), line_(line) {}

  Code code() const noexcept { return code_; }
  // 1-based line in the definitions document, 0 when not applicable.
  int line() const noexcept { return line_; }

 private:
  Code code_;
  int line_;
};

enum class CaptureType { Int, Float, Text, Ip, Timestamp, Level, Duration };

std::string_view to_string(CaptureType type);
std::optional<CaptureType> parse_capture_type(std::string_view name);

struct IpAddress {
  std::string text;
  bool v6 = false;
  std::array<std::uint8_t, 16> bytes{};  // v4 uses the first four

  std::uint32_t v4() const {
    return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
           (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  }
  friend bool operator==(const IpAddress&, const IpAddress&) = default;
};

std::optional<IpAddress> parse_ip(std::string_view text);

struct Timestamp {
  std::int64_t epoch_ms = 0;
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

using TypedValue =
    std::variant<std::int64_t, double, std::string, IpAddress, Timestamp, LogLevel>;

// Converts a captured substring; absent when the text is not a valid value of
// the requested type.
std::optional<TypedValue> convert(CaptureType type, std::string_view text);

struct PatternDef {
  std::string name;
  std::string body;
};

class PatternLibrary {
 public:
  // Contains only the builtins.
  PatternLibrary();

  // Parses `NAME body` lines; `#` comments and blank lines are skipped.
  static PatternLibrary load(std::string_view definitions);

  // Throws DuplicateName, BuiltinShadowed or MalformedLine.
  void add(PatternDef def, int line = 0);
  void merge(std::string_view definitions);

  const PatternDef* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  static bool is_builtin(std::string_view name);
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, PatternDef, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, PatternDef, std::less<>> entries_;
};

struct Capture {
  std::string field;
  CaptureType type = CaptureType::Text;

  friend bool operator==(const Capture&, const Capture&) = default;
};

struct MatchResult {
  // In capture declaration order.
  std::vector<std::pair<std::string, TypedValue>> fields;

  const TypedValue* find(std::string_view field) const;
};

class CompiledPattern {
 public:
  // Fully expanded regular expression.
  const std::string& source() const { return source_; }
  const std::vector<Capture>& captures() const { return captures_; }

  std::optional<MatchResult> match(std::string_view line) const;

 private:
  friend CompiledPattern compile(const PatternLibrary&, std::string_view);
  struct Regex;

  std::string source_;
  std::vector<Capture> captures_;
  std::shared_ptr<const Regex> regex_;
};

CompiledPattern compile(const PatternLibrary& library, std::string_view expr);

inline std::optional<MatchResult> match_line(const CompiledPattern& pattern,
                                             std::string_view line) {
  return pattern.match(line);
}

}  // namespace stormlog::grok
