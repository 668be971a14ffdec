#include <set>

#include "corvid/common/text.hpp"
#include "corvid/dsl/parse.hpp"
#include "template_internal.hpp"

namespace corvid::dsl {

namespace {

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == ':' || c == '/') return false;
  }
  return true;
}

std::size_t trailing_backslashes(std::string_view s) {
  std::size_t n = 0;
  while (n < s.size() && s[s.size() - 1 - n] == '\\') ++n;
  return n;
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

NluDocument parse_nlu_md(const std::string& skill_name, std::string_view source,
                         const std::string& file) {
  std::vector<std::string_view> lines = split(source, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }

  NluDocument doc;
  std::vector<Diagnostic> errors;
  auto error = [&](int line, int col, std::string msg, std::string kind) {
    errors.push_back(Diagnostic{file, line, col, std::move(msg), std::move(kind)});
  };

  enum class Section { none, intent, lookup };
  Section section = Section::none;
  IntentTemplate* current = nullptr;
  int current_line = 0;
  std::string current_lookup;
  std::set<std::string> seen_intents;
  std::vector<int> intent_lines;

  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const int line_no = static_cast<int>(idx) + 1;
    const auto raw = lines[idx];
    const auto text = trim(raw);
    if (text.empty()) continue;

    if (text.front() == '#') {
      current = nullptr;
      section = Section::none;
      if (text.substr(0, 3) != "## " && text != "##") {
        error(line_no, 1, "unknown header; expected '## intent:<name>' or '## lookup:<name>'",
              "unknown-section");
        continue;
      }
      const auto header = trim(text.substr(2));
      const auto colon = header.find(':');
      const auto kind = colon == std::string_view::npos ? header : trim(header.substr(0, colon));
      const auto name = colon == std::string_view::npos ? std::string_view{} : trim(header.substr(colon + 1));
      if (kind != "intent" && kind != "lookup") {
        error(line_no, 1, "unknown section '" + std::string(header) + "'", "unknown-section");
        continue;
      }
      if (!valid_name(name)) {
        error(line_no, 1, "section needs a name without whitespace", "bad-section-name");
        continue;
      }
      if (kind == "intent") {
        if (!seen_intents.insert(std::string(name)).second) {
          error(line_no, 1, "duplicate intent '" + std::string(name) + "'", "duplicate-intent");
          continue;
        }
        doc.intents.push_back(IntentTemplate{std::string(name), skill_name, {}});
        intent_lines.push_back(line_no);
        current = &doc.intents.back();
        current_line = line_no;
        section = Section::intent;
      } else {
        current_lookup = std::string(name);
        section = Section::lookup;
      }
      continue;
    }

    if (section == Section::none) {
      error(line_no, 1, "text outside of a section", "outside-section");
      continue;
    }

    if (section == Section::lookup) {
      auto entry = text;
      if (entry.substr(0, 2) == "- ") entry = trim(entry.substr(2));
      doc.lookups.push_back(LookupFileRef{current_lookup, std::string(entry), line_no});
      continue;
    }

    // Intent section: "- <sentence>", optionally continued with a trailing backslash.
    if (text.substr(0, 2) != "- " && text != "-") {
      error(line_no, 1, "expected a sentence starting with '- '", "expected-sentence");
      continue;
    }
    const auto dash = raw.find('-');
    std::string joined;
    std::vector<SourcePos> positions;
    std::size_t start = dash + 1;
    std::size_t li = idx;
    while (true) {
      auto seg = rtrim(lines[li].substr(start));
      const bool continued = trailing_backslashes(seg) % 2 == 1 && li + 1 < lines.size();
      if (continued) seg = rtrim(seg.substr(0, seg.size() - 1));
      for (std::size_t k = 0; k < seg.size(); ++k) {
        joined.push_back(seg[k]);
        positions.push_back(SourcePos{static_cast<int>(li) + 1, static_cast<int>(start + k) + 1});
      }
      if (!continued) break;
      joined.push_back(' ');
      positions.push_back(SourcePos{static_cast<int>(li) + 1, static_cast<int>(start + seg.size()) + 1});
      ++li;
      start = 0;
      while (start < lines[li].size() && (lines[li][start] == ' ' || lines[li][start] == '\t')) ++start;
      if (!lines[li].empty() && lines[li].back() == '\r') lines[li].remove_suffix(1);
    }
    idx = li;
    try {
      auto seq = parse_sentence_at(joined, positions, file);
      if (seq.empty()) {
        error(line_no, static_cast<int>(dash) + 1, "empty sentence", "empty-sentence");
      } else {
        current->sentences.push_back(std::move(seq));
      }
    } catch (const ParseError& e) {
      errors.insert(errors.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
    (void)current_line;
  }

  if (!errors.empty()) throw ParseError(std::move(errors));

  for (std::size_t i = 0; i < doc.intents.size(); ++i) {
    if (doc.intents[i].sentences.empty()) {
      doc.warnings.push_back(Diagnostic{file, intent_lines[i], 1,
                                        "intent '" + doc.intents[i].intent_name + "' has no sentences",
                                        "empty-intent"});
    }
  }
  return doc;
}

}  // namespace corvid::dsl
