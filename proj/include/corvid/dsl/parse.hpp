#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "corvid/dsl/ast.hpp"

namespace corvid::dsl {

// All parsers throw ParseError with positioned diagnostics; none of them
// crash on arbitrary input.

// Lookup file: one entry per non-blank line. "Augsburg", "A->B",
// "(X|Y)->Z". Without "->" the first variant is the canonical value.
LookupTable parse_lookup(const std::string& name, std::string_view source,
                         const std::string& file = {});

// One sentence template, e.g. "Book (me|us) a flight from [Augsburg](city.txt?start)".
// `line`/`column_offset` position diagnostics inside an enclosing file.
Sequence parse_sentence(std::string_view text, const std::string& file = {}, int line = 1,
                        int column_offset = 0);

struct LookupFileRef {
  std::string lookup;  // section name, e.g. "city"
  std::string file;    // e.g. "city.txt"
  int line = 0;
};

struct NluDocument {
  std::vector<IntentTemplate> intents;
  std::vector<LookupFileRef> lookups;
  std::vector<Diagnostic> warnings;
};

NluDocument parse_nlu_md(const std::string& skill_name, std::string_view source,
                         const std::string& file = {});

SkillManifest parse_manifest(std::string_view source, const std::string& file = {});

ActionDescriptor parse_action(std::string_view source, const std::string& file = {});

// Display form: alternations as "(a|b)", slots as their display value.
std::string render_template(const Sequence& sentence);

// DSL source form (slots keep their links, metacharacters escaped);
// parse_sentence(to_source(s)) == s.
std::string to_source(const Sequence& sentence);

// Lookup name for a link target: "city.txt" -> "city".
std::string lookup_stem(std::string_view file);

}  // namespace corvid::dsl
