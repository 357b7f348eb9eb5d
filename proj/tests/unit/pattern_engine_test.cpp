#include "stormlog/pattern_engine.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <limits>
#include <random>
#include <regex>
#include <string>
#include <vector>

using namespace stormlog;
using namespace stormlog::grok;

namespace {

PatternError::Code error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PatternError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected PatternError";
  return PatternError::Code::InvalidExpression;
}

}  // namespace

TEST(PatternLibrary, SingleDefinition) {
  auto lib = PatternLibrary::load("STATUS INFO|WARN|ERROR");
  ASSERT_TRUE(lib.contains("STATUS"));
  EXPECT_EQ(lib.find("STATUS")->body, "INFO|WARN|ERROR");
  EXPECT_EQ(lib.size(), PatternLibrary().size() + 1);
}

TEST(PatternLibrary, EmptyDocumentHasOnlyBuiltins) {
  auto lib = PatternLibrary::load("");
  EXPECT_EQ(lib.size(), PatternLibrary().size());
  for (auto name : {"IP", "ISO8601_TIMESTAMP", "INT", "NUMBER", "WORD", "LOGLEVEL"}) {
    EXPECT_TRUE(lib.contains(name)) << name;
    EXPECT_TRUE(PatternLibrary::is_builtin(name)) << name;
  }
}

TEST(PatternLibrary, CommentsAndBlankLinesAreSkipped) {
  auto lib = PatternLibrary::load("# header\n\nA a+\n   \n# B b\nC c\n");
  EXPECT_TRUE(lib.contains("A"));
  EXPECT_FALSE(lib.contains("B"));
  EXPECT_TRUE(lib.contains("C"));
}

TEST(PatternLibrary, BuiltinCannotBeShadowed) {
  EXPECT_EQ(error_code([] { PatternLibrary::load("IP \\d+"); }),
            PatternError::Code::BuiltinShadowed);
}

TEST(PatternLibrary, DuplicateNameIsRejected) {
  EXPECT_EQ(error_code([] { PatternLibrary::load("A a\nA b"); }),
            PatternError::Code::DuplicateName);
}

TEST(PatternLibrary, MalformedLineReportsLineNumber) {
  try {
    PatternLibrary::load("A a\n# note\nlowercase body\n");
    FAIL() << "expected PatternError";
  } catch (const PatternError& e) {
    EXPECT_EQ(e.code(), PatternError::Code::MalformedLine);
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  try {
    PatternLibrary::load("A a\nLONELY\n");
    FAIL() << "expected PatternError";
  } catch (const PatternError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Compile, BuiltinCapture) {
  auto p = compile(PatternLibrary(), "%{IP:client}");
  ASSERT_EQ(p.captures().size(), 1u);
  EXPECT_EQ(p.captures()[0], (Capture{"client", CaptureType::Ip}));
}

TEST(Compile, UntypedCaptureIsText) {
  auto p = compile(PatternLibrary(), "%{WORD:w}");
  EXPECT_EQ(p.captures()[0].type, CaptureType::Text);
}

TEST(Compile, SelfReferenceIsACycle) {
  auto lib = PatternLibrary::load("A %{A}x");
  EXPECT_EQ(error_code([&] { compile(lib, "%{A}"); }), PatternError::Code::CyclicReference);
}

TEST(Compile, IndirectCycle) {
  auto lib = PatternLibrary::load("A %{B}\nB %{C}\nC %{A}");
  EXPECT_EQ(error_code([&] { compile(lib, "x%{A}"); }), PatternError::Code::CyclicReference);
}

TEST(Compile, UnknownPattern) {
  EXPECT_EQ(error_code([] { compile(PatternLibrary(), "%{NOPE:x}"); }),
            PatternError::Code::UnknownPattern);
}

TEST(Compile, DuplicateCaptureField) {
  EXPECT_EQ(error_code([] { compile(PatternLibrary(), "%{INT:n} %{INT:n}"); }),
            PatternError::Code::DuplicateCapture);
  // Also when the duplicate hides inside a referenced body.
  auto lib = PatternLibrary::load("PAIR %{INT:n}-%{INT:m}");
  EXPECT_EQ(error_code([&] { compile(lib, "%{INT:n} %{PAIR}"); }),
            PatternError::Code::DuplicateCapture);
}

TEST(Compile, CapturesInLeftToRightOrder) {
  auto lib = PatternLibrary::load("INNER %{WORD:b}=%{INT:c:int}");
  auto p = compile(lib, "%{WORD:a} %{INNER} %{NUMBER:d:float}");
  std::vector<std::string> names;
  for (const auto& c : p.captures()) names.push_back(c.field);
  EXPECT_EQ(names, (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(Compile, PlainGroupsInBodiesDoNotCapture) {
  auto lib = PatternLibrary::load("PAIR (a|b)(c|d)");
  auto p = compile(lib, "%{PAIR:pair}");
  auto m = p.match("xbd");
  ASSERT_TRUE(m);
  ASSERT_EQ(m->fields.size(), 1u);
  EXPECT_EQ(std::get<std::string>(m->fields[0].second), "bd");
}

TEST(Compile, Deterministic) {
  auto lib = PatternLibrary::load("A %{WORD:w}-%{INT:i:int}\nB %{A}|%{IP}");
  auto p1 = compile(lib, "^%{B} %{LOGLEVEL:l:level}$");
  auto p2 = compile(lib, "^%{B} %{LOGLEVEL:l:level}$");
  EXPECT_EQ(p1.source(), p2.source());
  EXPECT_EQ(p1.captures(), p2.captures());
}

TEST(Compile, ThousandDeepChainTerminates) {
  std::string defs = "P0 z\n";
  for (int i = 1; i < 1000; ++i) {
    defs += "P" + std::to_string(i) + " %{P" + std::to_string(i - 1) + "}\n";
  }
  auto lib = PatternLibrary::load(defs);
  auto p = compile(lib, "%{P999:leaf}");
  auto m = p.match("..z..");
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<std::string>(*m->find("leaf")), "z");
  EXPECT_FALSE(p.match("nothing"));
}

TEST(Match, IntConversion) {
  auto m = match_line(compile(PatternLibrary(), "%{INT:ok:int}"), "10");
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<std::int64_t>(*m->find("ok")), 10);
}

TEST(Match, NonMatchIsAbsent) {
  EXPECT_FALSE(match_line(compile(PatternLibrary(), "%{IP:client}"), "not-an-ip"));
}

TEST(Match, IntOverflowFailsWholeMatch) {
  // 2^63 - 1 = 9223372036854775807 has 19 digits; this has 20.
  const std::string big = "99999999999999999999";
  ASSERT_GT(big.size(), std::to_string(std::numeric_limits<std::int64_t>::max()).size());
  EXPECT_FALSE(match_line(compile(PatternLibrary(), "%{INT:n:int}"), big));
  // One past the maximum also overflows; the maximum itself does not.
  EXPECT_FALSE(match_line(compile(PatternLibrary(), "%{INT:n:int}"), "9223372036854775808"));
  auto m = match_line(compile(PatternLibrary(), "%{INT:n:int}"), "9223372036854775807");
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<std::int64_t>(*m->find("n")), std::numeric_limits<std::int64_t>::max());
}

TEST(Match, ConversionFailureDropsOtherCaptures) {
  auto p = compile(PatternLibrary(), "^%{WORD:w} %{INT:n:int}$");
  EXPECT_TRUE(p.match("abc 12"));
  EXPECT_FALSE(p.match("abc 99999999999999999999"));
}

TEST(Match, TypedValues) {
  auto p = compile(PatternLibrary(),
                   "^%{ISO8601_TIMESTAMP:t:timestamp} %{LOGLEVEL:l:level} %{IP:ip:ip} "
                   "%{NUMBER:f:float}$");
  auto m = p.match("2019-06-26T10:00:00.250Z WARN 131.154.1.2 1.5");
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<Timestamp>(*m->find("t")).epoch_ms, 1561543200250);
  EXPECT_EQ(std::get<LogLevel>(*m->find("l")), LogLevel::Warn);
  EXPECT_EQ(std::get<IpAddress>(*m->find("ip")).v4(), (131u << 24) | (154u << 16) | (1u << 8) | 2u);
  EXPECT_DOUBLE_EQ(std::get<double>(*m->find("f")), 1.5);
}

TEST(Match, DurationType) {
  auto p = compile(PatternLibrary::load("DUR \\d+:\\d{2}\\.\\d{2}"), "%{DUR:d:duration}");
  auto m = p.match("lifetime=27:03.09");
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<std::int64_t>(*m->find("d")), 27 * 3600 + 3 * 60 + 9);
  EXPECT_FALSE(p.match("1:75.00"));
}

TEST(Match, AnchoringOnlyWhenRequested) {
  EXPECT_TRUE(compile(PatternLibrary(), "%{INT:n}").match("abc 12 def"));
  EXPECT_FALSE(compile(PatternLibrary(), "^%{INT:n}").match("abc 12"));
}

// Every result either carries all declared captures or is absent.
TEST(Match, AllOrNothingProperty) {
  auto lib = PatternLibrary::load("OPT (?:x%{INT:a:int})?y");
  auto p = compile(lib, "%{OPT}%{WORD:w}");
  std::mt19937_64 rng(5);
  const std::string alphabet = "xy0123 ab";
  for (int i = 0; i < 2000; ++i) {
    std::string line;
    for (int k = std::uniform_int_distribution<int>(0, 12)(rng); k > 0; --k) {
      line += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    }
    auto m = p.match(line);
    if (m) {
      ASSERT_EQ(m->fields.size(), p.captures().size()) << line;
      for (const auto& c : p.captures()) EXPECT_NE(m->find(c.field), nullptr);
    }
  }
}

// Compiled matching equals matching against a by-hand expansion run on an
// independent regex engine.
TEST(Compile, ExpansionOracleOverRandomCompositions) {
  const std::vector<std::string> atoms = {"[a-c]+", "\\d{1,3}", "x|y", "(?:ab)*", "q?",
                                          "[^ ]", "0|1|2"};
  const std::string alphabet = "abcxyq012 -";
  std::mt19937_64 rng(20190626);
  auto uni = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  for (int composition = 0; composition < 20; ++composition) {
    // Pattern k may reference any pattern j < k, so the graph is acyclic.
    std::vector<std::string> bodies;
    std::vector<std::string> expanded;  // oracle expansion without captures
    std::string defs;
    for (int k = 0; k < 6; ++k) {
      std::string body, hand;
      for (std::size_t parts = 1 + uni(3); parts > 0; --parts) {
        if (k > 0 && uni(2) == 0) {
          auto j = uni(static_cast<std::size_t>(k));
          body += "%{C" + std::to_string(j) + "}";
          hand += "(?:" + expanded[j] + ")";
        } else {
          const auto& a = atoms[uni(atoms.size())];
          body += "(?:" + a + ")";
          hand += "(?:" + a + ")";
        }
        if (uni(3) == 0) {
          body += "-";
          hand += "-";
        }
      }
      defs += "C" + std::to_string(k) + " " + body + "\n";
      bodies.push_back(body);
      expanded.push_back(hand);
    }
    auto lib = PatternLibrary::load(defs);

    // Expression: two or three captures of random library entries.
    std::string expr, hand;
    std::size_t ncap = 2 + uni(2);
    for (std::size_t c = 0; c < ncap; ++c) {
      auto j = uni(expanded.size());
      if (c > 0) {
        expr += " ";
        hand += " ";
      }
      expr += "%{C" + std::to_string(j) + ":f" + std::to_string(c) + "}";
      hand += "(" + expanded[j] + ")";
    }
    auto compiled = compile(lib, expr);
    std::regex oracle(hand, std::regex::ECMAScript);

    for (int trial = 0; trial < 300; ++trial) {
      std::string line;
      for (std::size_t n = uni(16); n > 0; --n) line += alphabet[uni(alphabet.size())];
      std::smatch om;
      bool want = std::regex_search(line, om, oracle);
      auto got = compiled.match(line);
      ASSERT_EQ(want, got.has_value()) << "expr " << expr << " line '" << line << "'";
      if (!want) continue;
      for (std::size_t c = 0; c < ncap; ++c) {
        EXPECT_EQ(std::get<std::string>(*got->find("f" + std::to_string(c))), om[c + 1].str())
            << "expr " << expr << " line '" << line << "'";
      }
    }
  }
}
