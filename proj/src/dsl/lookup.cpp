#include "corvid/common/text.hpp"
#include "corvid/dsl/parse.hpp"

namespace corvid::dsl {

namespace {

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

bool is_meta(char c) { return c == '(' || c == ')' || c == '|' || c == '[' || c == ']' || c == '\\'; }

struct LineParser {
  std::string_view line;
  const std::string& file;
  int line_no;

  [[noreturn]] void fail(std::size_t pos, const std::string& message, const std::string& kind) {
    throw ParseError(file, line_no, static_cast<int>(pos) + 1, message, kind);
  }

  // Unescapes `line[b, e)`, rejecting unescaped parentheses and bars.
  std::string plain(std::size_t b, std::size_t e) {
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
      char c = line[i];
      if (c == '\\') {
        if (i + 1 >= e || !is_meta(line[i + 1])) fail(i, "bad escape sequence", "bad-escape");
        out.push_back(line[++i]);
      } else if (c == '(' || c == ')') {
        fail(i, "unbalanced parentheses", "unbalanced-parentheses");
      } else if (c == '|') {
        fail(i, "'|' outside of a group", "unbalanced-parentheses");
      } else {
        out.push_back(c);
      }
    }
    return collapse_spaces(out);
  }

  std::size_t find_arrow() {
    std::size_t found = std::string_view::npos;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      if (line[i] == '\\') {
        ++i;
        continue;
      }
      if (line[i] == '-' && line[i + 1] == '>') {
        if (found != std::string_view::npos) fail(i, "more than one '->'", "malformed-mapping");
        found = i;
      }
    }
    return found;
  }

  LookupEntry parse() {
    LookupEntry entry;
    const auto arrow = find_arrow();
    std::size_t lhs_end = arrow == std::string_view::npos ? line.size() : arrow;

    std::size_t b = 0;
    while (b < lhs_end && (line[b] == ' ' || line[b] == '\t')) ++b;
    std::size_t e = lhs_end;
    while (e > b && (line[e - 1] == ' ' || line[e - 1] == '\t')) --e;
    if (b == e) fail(b, "empty variant before '->'", "empty-variant");

    if (line[b] == '(') {
      if (line[e - 1] != ')' || (e >= 2 && line[e - 2] == '\\' && e - 2 > b)) {
        fail(b, "unbalanced parentheses", "unbalanced-parentheses");
      }
      std::size_t start = b + 1;
      for (std::size_t i = b + 1; i < e; ++i) {
        if (line[i] == '\\') {
          ++i;
          continue;
        }
        if (line[i] == '|' || i == e - 1) {
          auto v = plain(start, i);
          if (v.empty()) fail(start, "empty variant in group", "empty-variant");
          entry.variants.push_back(std::move(v));
          start = i + 1;
        } else if (line[i] == '(' || line[i] == ')') {
          fail(i, "unbalanced parentheses", "unbalanced-parentheses");
        }
      }
    } else {
      entry.variants.push_back(plain(b, e));
    }

    if (arrow != std::string_view::npos) {
      entry.canonical = plain(arrow + 2, line.size());
      if (entry.canonical.empty()) fail(arrow, "dangling '->' without a canonical value", "dangling-arrow");
    } else {
      entry.canonical = entry.variants.front();
    }
    return entry;
  }
};

}  // namespace

std::optional<std::string> LookupTable::canonical_of(std::string_view variant) const {
  const auto needle = ascii_lower(collapse_spaces(variant));
  for (const auto& entry : entries) {
    for (const auto& v : entry.variants) {
      if (ascii_lower(v) == needle) return entry.canonical;
    }
  }
  return std::nullopt;
}

std::size_t LookupTable::variant_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.variants.size();
  return n;
}

LookupTable parse_lookup(const std::string& name, std::string_view source, const std::string& file) {
  LookupTable table{name, {}};
  std::vector<Diagnostic> errors;
  int line_no = 0;
  for (auto raw : split(source, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty()) continue;
    try {
      table.entries.push_back(LineParser{raw, file, line_no}.parse());
    } catch (const ParseError& e) {
      errors.insert(errors.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
  }
  if (!errors.empty()) throw ParseError(std::move(errors));
  return table;
}

std::string lookup_stem(std::string_view file) {
  auto slash = file.find_last_of('/');
  if (slash != std::string_view::npos) file.remove_prefix(slash + 1);
  auto dot = file.rfind('.');
  if (dot != std::string_view::npos && dot > 0) file = file.substr(0, dot);
  return std::string(file);
}

}  // namespace corvid::dsl
