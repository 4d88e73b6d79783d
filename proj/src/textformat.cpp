#include "leap/textformat.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace leap {
namespace {

struct Token {
  std::string text;
  int line = 0;
  bool is_brace_open = false;
  bool is_brace_close = false;
  bool is_newline = false;
};

std::vector<Token> tokenize(const std::string& content) {
  std::vector<Token> tokens;
  int line = 1;
  size_t i = 0;
  while (i < content.size()) {
    char c = content[i];
    if (c == '#') {
      while (i < content.size() && content[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      tokens.push_back({"", line, false, false, true});
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '{' || c == '}') {
      tokens.push_back({std::string(1, c), line, c == '{', c == '}', false});
      ++i;
      continue;
    }
    size_t start = i;
    while (i < content.size()) {
      char d = content[i];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '{' || d == '}' || d == '#') break;
      ++i;
    }
    tokens.push_back({content.substr(start, i - start), line, false, false, false});
  }
  tokens.push_back({"", line, false, false, true});
  return tokens;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line << ": " << msg;
  throw ParseError(os.str());
}

// Parses the body of a block up to and including its closing brace.
void parse_body(const std::vector<Token>& tokens, size_t& pos, TextNode& node, bool top_level) {
  while (pos < tokens.size()) {
    // Gather one logical line of words.
    std::vector<Token> words;
    while (pos < tokens.size() && !tokens[pos].is_newline && !tokens[pos].is_brace_open &&
           !tokens[pos].is_brace_close) {
      words.push_back(tokens[pos]);
      ++pos;
    }
    if (pos < tokens.size() && tokens[pos].is_brace_open) {
      if (words.empty()) fail(tokens[pos].line, "unexpected '{' without a block kind");
      TextNode child;
      child.kind = words[0].text;
      child.line = words[0].line;
      if (words.size() >= 2) child.name = words[1].text;
      if (words.size() > 2) fail(words[0].line, "block header '" + child.kind + "' has too many words");
      ++pos;  // consume '{'
      parse_body(tokens, pos, child, false);
      node.children.push_back(std::move(child));
      continue;
    }
    if (!words.empty()) {
      std::vector<std::string> vals;
      for (size_t k = 1; k < words.size(); ++k) vals.push_back(words[k].text);
      node.entries.emplace_back(words[0].text, std::move(vals));
    }
    if (pos >= tokens.size()) {
      if (!top_level) fail(tokens.empty() ? 0 : tokens.back().line, "missing '}' for block '" + node.kind + "'");
      return;
    }
    if (tokens[pos].is_brace_close) {
      if (top_level) fail(tokens[pos].line, "unmatched '}'");
      ++pos;
      return;
    }
    ++pos;  // newline
  }
  if (!top_level) fail(tokens.empty() ? 0 : tokens.back().line, "missing '}' for block '" + node.kind + "'");
}

}  // namespace

bool TextNode::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

const std::vector<std::string>& TextNode::values(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw ParseError("block '" + kind + (name.empty() ? "" : " " + name) + "': missing key '" + key + "'");
}

std::string TextNode::str(const std::string& key) const {
  const auto& v = values(key);
  if (v.size() != 1)
    throw ParseError("block '" + kind + " " + name + "': key '" + key + "' expects a single value");
  return v[0];
}

double TextNode::num(const std::string& key) const {
  const std::string s = str(key);
  try {
    size_t used = 0;
    double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return out;
  } catch (const std::exception&) {
    throw ParseError("block '" + kind + " " + name + "': key '" + key + "': not a number: '" + s + "'");
  }
}

double TextNode::num_or(const std::string& key, double fallback) const {
  return has(key) ? num(key) : fallback;
}

std::vector<double> TextNode::nums(const std::string& key, int expected_count) const {
  const auto& v = values(key);
  if (static_cast<int>(v.size()) != expected_count) {
    throw ParseError("block '" + kind + " " + name + "': key '" + key + "' expects " +
                     std::to_string(expected_count) + " values, got " + std::to_string(v.size()));
  }
  std::vector<double> out;
  for (const auto& s : v) {
    try {
      size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ParseError("block '" + kind + " " + name + "': key '" + key + "': not a number: '" + s + "'");
    }
  }
  return out;
}

std::vector<TextNode> parse_text_blocks(const std::string& content) {
  auto tokens = tokenize(content);
  TextNode root;
  size_t pos = 0;
  parse_body(tokens, pos, root, true);
  if (!root.entries.empty()) {
    fail(root.line, "top-level key '" + root.entries.front().first + "' outside any block");
  }
  return root.children;
}

}  // namespace leap
