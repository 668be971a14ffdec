#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "corvid/dsl/ast.hpp"

namespace corvid::dsl {

struct SourcePos {
  int line = 1;
  int column = 1;
};

// Like parse_sentence, but with an explicit source position per character,
// for sentences joined from continuation lines.
Sequence parse_sentence_at(std::string_view text, const std::vector<SourcePos>& positions,
                           const std::string& file);

}  // namespace corvid::dsl
