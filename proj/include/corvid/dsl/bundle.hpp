#pragma once

#include <string>

#include "corvid/dsl/ast.hpp"

namespace corvid::dsl {

// Loads <root>/config.yaml, <root>/dialog/nlu.md with its lookup files and,
// when present, <root>/action/action.yaml. Throws ParseError with file
// context; unresolved lookups use Errc::unresolved_reference, missing files
// Errc::not_found.
SkillBundle load_bundle(const std::string& root, const std::string& source = {});

// Problems that do not prevent loading (empty intents, slot display values
// absent from their lookup).
std::vector<Diagnostic> lint_bundle(const SkillBundle& bundle);

}  // namespace corvid::dsl
