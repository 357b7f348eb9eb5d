#include "stormlog/pattern_engine.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <boost/regex.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "stormlog/time.hpp"

namespace stormlog::grok {
namespace {

// `type` is what an untyped capture of the builtin converts to.
struct Builtin {
  std::string_view name;
  std::string_view body;
  CaptureType type = CaptureType::Text;
};

constexpr std::string_view kOctet = R"((?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d))";

const std::vector<Builtin>& builtins() {
  static const std::vector<Builtin> kBuiltins = [] {
    static const std::string ipv4 = "\\b" + std::string(kOctet) + "(?:\\." +
                                    std::string(kOctet) + "){3}\\b";
    static const std::string h16 = "[0-9A-Fa-f]{1,4}";
    static const std::string ipv6 = "(?:(?:" + h16 + ":){7}" + h16 + "|(?:" + h16 +
                                    "(?::" + h16 + "){0,6})?::(?:" + h16 + "(?::" +
                                    h16 + "){0,6})?)";
    static const std::string ip = "(?:" + ipv4 + "|" + ipv6 + ")";
    return std::vector<Builtin>{
        {"IP", ip, CaptureType::Ip},
        {"IPV4", ipv4, CaptureType::Ip},
        {"IPV6", ipv6, CaptureType::Ip},
        {"ISO8601_TIMESTAMP",
         R"(\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?)",
         CaptureType::Timestamp},
        {"INT", R"([+-]?\d+)", CaptureType::Int},
        {"NUMBER", R"([+-]?\d+(?:\.\d+)?)", CaptureType::Float},
        {"WORD", R"(\b\w+\b)"},
        {"LOGLEVEL", R"(\b(?:FATAL|ERROR|WARNING|WARN|INFO|DEBUG)\b)", CaptureType::Level},
        {"NOTSPACE", R"(\S+)"},
        {"SPACE", R"(\s*)"},
        {"DATA", R"(.*?)"},
        {"GREEDYDATA", R"(.*)"},
    };
  }();
  return kBuiltins;
}

CaptureType builtin_type(std::string_view name) {
  for (const auto& b : builtins()) {
    if (b.name == name) return b.type;
  }
  return CaptureType::Text;
}

bool valid_pattern_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool valid_field_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
           c == '@' || c == '-';
  });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

PatternError error(PatternError::Code code, std::string msg) {
  return PatternError(code, std::move(msg));
}

// Rewrites a pattern expression into plain regex syntax, inlining references.
class Expander {
 public:
  explicit Expander(const PatternLibrary& lib) : lib_(lib) {}

  std::string run(std::string_view expr) {
    std::string out;
    out.reserve(expr.size() * 4);
    expand(expr, out);
    return out;
  }

  std::vector<Capture> take_captures() { return std::move(captures_); }

 private:
  void expand(std::string_view expr, std::string& out) {
    std::size_t i = 0;
    const std::size_t n = expr.size();
    while (i < n) {
      char c = expr[i];
      if (c == '\\') {
        if (i + 1 >= n) {
          throw error(PatternError::Code::InvalidExpression, "trailing backslash");
        }
        out.append(expr.substr(i, 2));
        i += 2;
      } else if (c == '[') {
        std::size_t j = i + 1;
        if (j < n && expr[j] == '^') ++j;
        if (j < n && expr[j] == ']') ++j;
        while (j < n && expr[j] != ']') {
          j += (expr[j] == '\\') ? 2 : 1;
        }
        if (j >= n) {
          throw error(PatternError::Code::InvalidExpression, "unterminated character class");
        }
        out.append(expr.substr(i, j - i + 1));
        i = j + 1;
      } else if (c == '(') {
        if (i + 1 < n && expr[i + 1] == '?') {
          bool named = expr.substr(i).starts_with("(?<") &&
                       !expr.substr(i).starts_with("(?<=") &&
                       !expr.substr(i).starts_with("(?<!");
          if (named || expr.substr(i).starts_with("(?P<") ||
              expr.substr(i).starts_with("(?'")) {
            throw error(PatternError::Code::InvalidExpression,
                        "regex named groups are not supported; use %{NAME:field}");
          }
          out += '(';
          ++i;
        } else {
          out += "(?:";
          ++i;
        }
      } else if (c == '%' && i + 1 < n && expr[i + 1] == '{') {
        std::size_t close = expr.find('}', i + 2);
        if (close == std::string_view::npos) {
          throw error(PatternError::Code::InvalidExpression, "unterminated %{ reference");
        }
        reference(expr.substr(i + 2, close - i - 2), out);
        i = close + 1;
      } else {
        out += c;
        ++i;
      }
    }
  }

  void reference(std::string_view spec, std::string& out) {
    std::string_view name = spec;
    std::string_view field;
    std::string_view type_name;
    if (auto p = spec.find(':'); p != std::string_view::npos) {
      name = spec.substr(0, p);
      field = spec.substr(p + 1);
      if (auto q = field.find(':'); q != std::string_view::npos) {
        type_name = field.substr(q + 1);
        field = field.substr(0, q);
      }
    }
    if (!valid_pattern_name(name)) {
      throw error(PatternError::Code::InvalidExpression,
                  "invalid pattern name '" + std::string(name) + "'");
    }
    const PatternDef* def = lib_.find(name);
    if (def == nullptr) {
      throw error(PatternError::Code::UnknownPattern,
                  "unknown pattern '" + std::string(name) + "'");
    }
    if (std::find(stack_.begin(), stack_.end(), name) != stack_.end()) {
      std::string chain;
      for (const auto& s : stack_) chain += s + " -> ";
      throw error(PatternError::Code::CyclicReference,
                  "cyclic reference: " + chain + std::string(name));
    }

    const bool capturing = !field.empty() || spec.find(':') != std::string_view::npos;
    if (capturing) {
      if (!valid_field_name(field)) {
        throw error(PatternError::Code::InvalidExpression,
                    "invalid field name '" + std::string(field) + "'");
      }
      CaptureType type = builtin_type(name);
      if (!type_name.empty()) {
        auto t = parse_capture_type(type_name);
        if (!t) {
          throw error(PatternError::Code::InvalidExpression,
                      "unknown capture type '" + std::string(type_name) + "'");
        }
        type = *t;
      }
      if (!fields_.insert(std::string(field)).second) {
        throw error(PatternError::Code::DuplicateCapture,
                    "duplicate capture field '" + std::string(field) + "'");
      }
      captures_.push_back({std::string(field), type});
    }
    std::string body;
    stack_.emplace_back(name);
    expand(def->body, body);
    stack_.pop_back();
    // Skipping redundant groups keeps deep chains under the engine's nesting limit.
    if (capturing) {
      out += '(' + body + ')';
    } else if (is_atom(body)) {
      out += body;
    } else {
      out += "(?:" + body + ')';
    }
  }

  // True when `re` is one quantifiable unit: a literal, an escape, a class or
  // a group closing at the final character.
  static bool is_atom(std::string_view re) {
    if (re.size() == 1) return std::isalnum(static_cast<unsigned char>(re[0])) != 0;
    if (re.size() == 2 && re[0] == '\\') return true;
    if (re.empty() || (re.front() != '(' && re.front() != '[')) return false;
    int depth = 0;
    bool in_class = false;
    for (std::size_t i = 0; i < re.size(); ++i) {
      char c = re[i];
      if (c == '\\') {
        ++i;
        continue;
      }
      if (in_class) {
        if (c == ']') {
          in_class = false;
          if (depth == 0) return i + 1 == re.size();
        }
        continue;
      }
      if (c == '[') {
        in_class = true;
        // A leading ']' or '^]' is literal inside the class.
        if (i + 1 < re.size() && re[i + 1] == '^') ++i;
        if (i + 1 < re.size() && re[i + 1] == ']') ++i;
      } else if (c == '(') {
        ++depth;
      } else if (c == ')') {
        if (--depth == 0) return i + 1 == re.size();
      }
    }
    return false;
  }

  const PatternLibrary& lib_;
  std::vector<std::string> stack_;
  std::vector<Capture> captures_;
  std::unordered_set<std::string> fields_;
};

}  // namespace

struct CompiledPattern::Regex {
  boost::regex re;
};

std::string_view to_string(CaptureType type) {
  switch (type) {
    case CaptureType::Int: return "int";
    case CaptureType::Float: return "float";
    case CaptureType::Text: return "text";
    case CaptureType::Ip: return "ip";
    case CaptureType::Timestamp: return "timestamp";
    case CaptureType::Level: return "level";
    case CaptureType::Duration: return "duration";
  }
  return "text";
}

std::optional<CaptureType> parse_capture_type(std::string_view name) {
  for (auto t : {CaptureType::Int, CaptureType::Float, CaptureType::Text, CaptureType::Ip,
                 CaptureType::Timestamp, CaptureType::Level, CaptureType::Duration}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<IpAddress> parse_ip(std::string_view text) {
  if (text.empty() || text.size() > 45) return std::nullopt;
  std::string s(text);
  IpAddress ip;
  ip.text = s;
  if (s.find(':') == std::string::npos) {
    if (inet_pton(AF_INET, s.c_str(), ip.bytes.data()) != 1) return std::nullopt;
  } else {
    if (inet_pton(AF_INET6, s.c_str(), ip.bytes.data()) != 1) return std::nullopt;
    ip.v6 = true;
  }
  return ip;
}

std::optional<TypedValue> convert(CaptureType type, std::string_view text) {
  switch (type) {
    case CaptureType::Text:
      return TypedValue{std::string(text)};
    case CaptureType::Int: {
      std::string_view digits = text;
      if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
      std::int64_t v = 0;
      auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (digits.empty() || res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) {
        return std::nullopt;
      }
      return TypedValue{v};
    }
    case CaptureType::Float: {
      std::string_view digits = text;
      if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
      double v = 0;
      auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (digits.empty() || res.ec != std::errc{} ||
          res.ptr != digits.data() + digits.size() || !std::isfinite(v)) {
        return std::nullopt;
      }
      return TypedValue{v};
    }
    case CaptureType::Ip: {
      auto ip = parse_ip(text);
      if (!ip) return std::nullopt;
      return TypedValue{std::move(*ip)};
    }
    case CaptureType::Timestamp: {
      auto t = time::parse_iso8601(text);
      if (!t) return std::nullopt;
      return TypedValue{Timestamp{*t}};
    }
    case CaptureType::Level: {
      auto l = parse_log_level(text);
      if (!l) return std::nullopt;
      return TypedValue{*l};
    }
    case CaptureType::Duration: {
      // h:mm.ss
      auto colon = text.find(':');
      auto dot = text.find('.', colon == std::string_view::npos ? 0 : colon);
      if (colon == std::string_view::npos || dot == std::string_view::npos ||
          dot != colon + 3 || text.size() != dot + 3 || colon == 0) {
        return std::nullopt;
      }
      std::int64_t h = 0, m = 0, s = 0;
      auto parse = [](std::string_view part, std::int64_t& out) {
        auto r = std::from_chars(part.data(), part.data() + part.size(), out);
        return r.ec == std::errc{} && r.ptr == part.data() + part.size();
      };
      if (!parse(text.substr(0, colon), h) || !parse(text.substr(colon + 1, 2), m) ||
          !parse(text.substr(dot + 1, 2), s) || m > 59 || s > 59 || h < 0) {
        return std::nullopt;
      }
      return TypedValue{h * 3600 + m * 60 + s};
    }
  }
  return std::nullopt;
}

PatternLibrary::PatternLibrary() {
  for (const auto& b : builtins()) {
    entries_.emplace(std::string(b.name), PatternDef{std::string(b.name), std::string(b.body)});
  }
}

bool PatternLibrary::is_builtin(std::string_view name) {
  return std::any_of(builtins().begin(), builtins().end(),
                     [&](const Builtin& b) { return b.name == name; });
}

void PatternLibrary::add(PatternDef def, int line) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
  if (!valid_pattern_name(def.name)) {
    throw PatternError(PatternError::Code::MalformedLine,
                       where + "invalid pattern name '" + def.name + "'", line);
  }
  if (def.body.empty()) {
    throw PatternError(PatternError::Code::MalformedLine,
                       where + "empty body for '" + def.name + "'", line);
  }
  if (is_builtin(def.name)) {
    throw PatternError(PatternError::Code::BuiltinShadowed,
                       where + "builtin shadowed: " + def.name, line);
  }
  if (entries_.contains(def.name)) {
    throw PatternError(PatternError::Code::DuplicateName,
                       where + "duplicate pattern name: " + def.name, line);
  }
  std::string name = def.name;
  entries_.emplace(std::move(name), std::move(def));
}

void PatternLibrary::merge(std::string_view definitions) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= definitions.size()) {
    std::size_t eol = definitions.find('\n', pos);
    if (eol == std::string_view::npos) eol = definitions.size();
    std::string_view line = trim(definitions.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos) {
      throw PatternError(PatternError::Code::MalformedLine,
                         "line " + std::to_string(line_no) + ": expected 'NAME body'",
                         line_no);
    }
    add({std::string(line.substr(0, sp)), std::string(trim(line.substr(sp + 1)))}, line_no);
  }
}

PatternLibrary PatternLibrary::load(std::string_view definitions) {
  PatternLibrary lib;
  lib.merge(definitions);
  return lib;
}

const PatternDef* PatternLibrary::find(std::string_view name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

const TypedValue* MatchResult::find(std::string_view field) const {
  for (const auto& [name, value] : fields) {
    if (name == field) return &value;
  }
  return nullptr;
}

CompiledPattern compile(const PatternLibrary& library, std::string_view expr) {
  Expander expander(library);
  CompiledPattern out;
  out.source_ = expander.run(expr);
  out.captures_ = expander.take_captures();
  try {
    out.regex_ = std::make_shared<const CompiledPattern::Regex>(
        CompiledPattern::Regex{boost::regex(out.source_, boost::regex::perl)});
  } catch (const boost::regex_error& e) {
    throw PatternError(PatternError::Code::InvalidExpression,
                       std::string("invalid regular expression: ") + e.what());
  }
  if (out.regex_->re.mark_count() != out.captures_.size()) {
    throw PatternError(PatternError::Code::InvalidExpression,
                       "unexpected capture group count");
  }
  return out;
}

std::optional<MatchResult> CompiledPattern::match(std::string_view line) const {
  if (!regex_) return std::nullopt;
  boost::match_results<const char*> m;
  if (!boost::regex_search(line.data(), line.data() + line.size(), m, regex_->re)) {
    return std::nullopt;
  }
  MatchResult result;
  result.fields.reserve(captures_.size());
  for (std::size_t i = 0; i < captures_.size(); ++i) {
    const auto& sub = m[static_cast<int>(i + 1)];
    if (!sub.matched) return std::nullopt;
    auto value = convert(captures_[i].type,
                         std::string_view(sub.first, static_cast<std::size_t>(sub.length())));
    if (!value) return std::nullopt;
    result.fields.emplace_back(captures_[i].field, std::move(*value));
  }
  return result;
}

}  // namespace stormlog::grok
