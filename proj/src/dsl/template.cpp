#include "corvid/common/text.hpp"
#include "corvid/dsl/parse.hpp"
#include "template_internal.hpp"

namespace corvid::dsl {

namespace {

constexpr int kMaxGroupDepth = 2;

bool is_meta(char c) { return c == '(' || c == ')' || c == '|' || c == '[' || c == ']' || c == '\\'; }

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      space = true;
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  if (space) out.push_back(' ');
  return out;
}

// Merges adjacent literals, collapses whitespace and drops empty literals.
void normalize(Sequence& seq) {
  Sequence out;
  for (auto& node : seq) {
    if (auto* lit = std::get_if<Literal>(&node.value)) {
      if (!out.empty()) {
        if (auto* prev = std::get_if<Literal>(&out.back().value)) {
          prev->text += lit->text;
          continue;
        }
      }
    }
    out.push_back(std::move(node));
  }
  seq.clear();
  for (auto& node : out) {
    if (auto* lit = std::get_if<Literal>(&node.value)) {
      lit->text = collapse_spaces(lit->text);
      if (lit->text.empty()) continue;
    }
    seq.push_back(std::move(node));
  }
}

void trim_edges(Sequence& seq) {
  if (seq.empty()) return;
  if (auto* lit = std::get_if<Literal>(&seq.front().value)) {
    while (!lit->text.empty() && lit->text.front() == ' ') lit->text.erase(0, 1);
  }
  if (auto* lit = std::get_if<Literal>(&seq.back().value)) {
    while (!lit->text.empty() && lit->text.back() == ' ') lit->text.pop_back();
  }
  normalize(seq);
}

class SentenceParser {
 public:
  SentenceParser(std::string_view text, const std::vector<SourcePos>& positions,
                 const std::string& file)
      : text_(text), pos_map_(positions), file_(file) {}

  Sequence parse() {
    auto seq = parse_sequence(0);
    if (at_end()) {
      trim_edges(seq);
      return seq;
    }
    if (peek() == '|') fail(i_, "'|' outside of a group", "unbalanced-parentheses");
    if (peek() == ')') fail(i_, "unmatched ')'", "unbalanced-parentheses");
    fail(i_, "unmatched ']'", "unbalanced-brackets");
  }

 private:
  bool at_end() const { return i_ >= text_.size(); }
  char peek() const { return text_[i_]; }

  [[noreturn]] void fail(std::size_t at, const std::string& message, const std::string& kind) const {
    SourcePos p = at < pos_map_.size() ? pos_map_[at]
                                       : (pos_map_.empty() ? SourcePos{1, 1}
                                                           : SourcePos{pos_map_.back().line,
                                                                       pos_map_.back().column + 1});
    throw ParseError(file_, p.line, p.column, message, kind);
  }

  // Parses until an unescaped ')', '|', ']' or end of input.
  Sequence parse_sequence(int depth) {
    Sequence seq;
    std::string literal;
    auto flush = [&] {
      if (!literal.empty()) seq.push_back(TemplateNode{Literal{std::exchange(literal, {})}});
    };
    while (!at_end()) {
      const char c = peek();
      if (c == '\\') {
        if (i_ + 1 >= text_.size() || !is_meta(text_[i_ + 1])) fail(i_, "bad escape sequence", "bad-escape");
        literal.push_back(text_[i_ + 1]);
        i_ += 2;
      } else if (c == '(') {
        flush();
        parse_group(depth + 1, seq);
      } else if (c == '[') {
        flush();
        seq.push_back(TemplateNode{parse_slot()});
      } else if (c == ')' || c == '|' || c == ']') {
        break;
      } else {
        literal.push_back(c);
        ++i_;
      }
    }
    flush();
    normalize(seq);
    return seq;
  }

  void parse_group(int depth, Sequence& into) {
    const auto open = i_;
    if (depth > kMaxGroupDepth) fail(open, "alternations nest at most two levels deep", "nesting-too-deep");
    ++i_;  // '('
    std::vector<Sequence> branches;
    while (true) {
      branches.push_back(parse_sequence(depth));
      if (at_end()) fail(open, "unclosed '('", "unbalanced-parentheses");
      const char c = peek();
      ++i_;
      if (c == ')') break;
      if (c == ']') fail(i_ - 1, "unexpected ']' inside a group", "unbalanced-brackets");
      // c == '|': next branch
    }
    if (branches.size() == 1) {
      // A one-branch group is just its content.
      for (auto& n : branches.front()) into.push_back(std::move(n));
      return;
    }
    into.push_back(TemplateNode{Alternation{std::move(branches)}});
  }

  SlotRef parse_slot() {
    const auto open = i_;
    ++i_;  // '['
    std::string display;
    while (true) {
      if (at_end()) fail(open, "unclosed '['", "unbalanced-brackets");
      const char c = peek();
      if (c == '\\') {
        if (i_ + 1 >= text_.size() || !is_meta(text_[i_ + 1])) fail(i_, "bad escape sequence", "bad-escape");
        display.push_back(text_[i_ + 1]);
        i_ += 2;
        continue;
      }
      if (c == ']') break;
      if (c == '[' || c == '(' || c == ')' || c == '|') {
        fail(i_, std::string("unexpected '") + c + "' in slot text", "malformed-slot");
      }
      display.push_back(c);
      ++i_;
    }
    ++i_;  // ']'
    display = std::string(trim(collapse_spaces(display)));
    if (display.empty()) fail(open, "slot has no display value", "malformed-slot");
    if (at_end() || peek() != '(') fail(i_, "slot must be followed by (lookup) link", "malformed-slot");
    const auto link_open = i_++;
    std::string link;
    while (true) {
      if (at_end()) fail(link_open, "unclosed slot link", "unbalanced-parentheses");
      const char c = peek();
      if (c == ')') break;
      if (c == '(' || c == '[' || c == ']' || c == '|' || c == '\\') {
        fail(i_, std::string("unexpected '") + c + "' in slot link", "malformed-slot");
      }
      link.push_back(c);
      ++i_;
    }
    ++i_;  // ')'
    const auto parts = split(link, '?');
    if (parts.size() > 2) fail(link_open, "slot link has more than one role separator '?'", "malformed-slot");
    const auto file = trim(parts[0]);
    if (file.empty() || file.find_first_of(" \t") != std::string_view::npos) {
      fail(link_open, "slot link needs a lookup file name", "malformed-slot");
    }
    SlotRef ref{display, lookup_stem(file), std::nullopt};
    if (ref.lookup.empty()) fail(link_open, "slot link needs a lookup file name", "malformed-slot");
    if (parts.size() == 2) {
      const auto role = parts[1];
      if (role.empty() || role.find_first_of(" \t") != std::string_view::npos) {
        fail(link_open, "slot role must be non-empty without whitespace", "malformed-slot");
      }
      ref.role = std::string(role);
    }
    return ref;
  }

  std::string_view text_;
  const std::vector<SourcePos>& pos_map_;
  const std::string& file_;
  std::size_t i_ = 0;
};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (is_meta(c)) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

void render_into(const Sequence& seq, std::string& out, bool source) {
  for (const auto& node : seq) {
    if (const auto* lit = std::get_if<Literal>(&node.value)) {
      out += source ? escape(lit->text) : lit->text;
    } else if (const auto* alt = std::get_if<Alternation>(&node.value)) {
      out.push_back('(');
      for (std::size_t i = 0; i < alt->branches.size(); ++i) {
        if (i) out.push_back('|');
        render_into(alt->branches[i], out, source);
      }
      out.push_back(')');
    } else {
      const auto& slot = std::get<SlotRef>(node.value);
      if (!source) {
        out += slot.display_value;
        continue;
      }
      out += "[" + escape(slot.display_value) + "](" + slot.lookup + ".txt";
      if (slot.role) out += "?" + *slot.role;
      out.push_back(')');
    }
  }
}

}  // namespace

Sequence parse_sentence_at(std::string_view text, const std::vector<SourcePos>& positions,
                           const std::string& file) {
  return SentenceParser(text, positions, file).parse();
}

Sequence parse_sentence(std::string_view text, const std::string& file, int line,
                        int column_offset) {
  std::vector<SourcePos> positions(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    positions[i] = SourcePos{line, column_offset + static_cast<int>(i) + 1};
  }
  return parse_sentence_at(text, positions, file);
}

std::string render_template(const Sequence& sentence) {
  std::string out;
  render_into(sentence, out, false);
  return out;
}

std::string to_source(const Sequence& sentence) {
  std::string out;
  render_into(sentence, out, true);
  return out;
}

}  // namespace corvid::dsl
