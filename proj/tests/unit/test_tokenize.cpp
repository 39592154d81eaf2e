#include <doctest.h>

#include "persona/tokenize.hpp"

using namespace persona;

TEST_CASE("alnum tokens lowercase maximal runs") {
  auto tokens = alnum_tokens("The THE the");
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[0] == "the");
  CHECK(tokens[2] == "the");

  tokens = alnum_tokens("It's 42 degrees-out!");
  REQUIRE(tokens.size() == 5);
  CHECK(tokens[0] == "it");
  CHECK(tokens[1] == "s");
  CHECK(tokens[2] == "42");
  CHECK(tokens[3] == "degrees");
  CHECK(tokens[4] == "out");

  CHECK(alnum_tokens("!!! ---").empty());
  CHECK(alnum_tokens("").empty());
}

TEST_CASE("whitespace token counting and heads") {
  CHECK(count_whitespace_tokens("a b c") == 3);
  CHECK(count_whitespace_tokens("  a   b  ") == 2);
  CHECK(count_whitespace_tokens("") == 0);
  CHECK(count_whitespace_tokens("   ") == 0);

  CHECK(head_tokens("a b c d", 2) == "a b");
  CHECK(head_tokens("a  b  c", 2) == "a  b");  // original spacing kept
  CHECK(head_tokens("a b", 5) == "a b");
  CHECK(head_tokens("a b", 0) == "");
}

TEST_CASE("whitespace counter truncates to budget") {
  const TokenCounter& counter = whitespace_counter();
  CHECK(counter.count("one two three") == 3);
  auto cut = counter.truncate("one two three", 2);
  CHECK(cut == "one two");
  CHECK(counter.count(cut) == 2);
}
