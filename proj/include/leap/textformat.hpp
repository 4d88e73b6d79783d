#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace leap {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Nested block format used by robot model files:
//
//   kind name {          # name optional
//     key v1 v2 ...
//     nested { ... }
//   }
//
// '#' starts a comment. Keys may repeat.
struct TextNode {
  std::string kind;
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::vector<TextNode> children;

  bool has(const std::string& key) const;
  // Single-valued accessors; throw ParseError with the node and key named.
  const std::vector<std::string>& values(const std::string& key) const;
  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  double num_or(const std::string& key, double fallback) const;
  std::vector<double> nums(const std::string& key, int expected_count) const;
};

std::vector<TextNode> parse_text_blocks(const std::string& content);

}  // namespace leap
