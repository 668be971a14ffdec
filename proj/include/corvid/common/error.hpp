#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace corvid {

enum class Errc {
  invalid_argument,
  permission_denied,
  auth_failure,
  key_id_mismatch,
  nonce_reuse,
  payload_too_large,
  address_in_use,
  malformed_config,
  duplicate_client,
  not_found,
  parse_error,
  io_error,
  precondition,
  conflict,
  unreachable,
  unresolved_reference,
};

std::string_view to_string(Errc code);

// Base error for the whole framework. Every failure carries a machine-checkable
// kind so callers (and tests) never have to match on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// A diagnostic anchored to a source position. Lines and columns are 1-based;
// column 0 means "whole line".
struct Diagnostic {
  std::string file;
  int line = 0;
  int column = 0;
  std::string message;
  // Short machine-checkable category, e.g. "missing-field", "malformed-slot".
  std::string kind;

  std::string format() const;
  bool operator==(const Diagnostic&) const = default;
};

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<Diagnostic> diagnostics, Errc code = Errc::parse_error);
  ParseError(std::string file, int line, int column, std::string message, std::string kind = {},
             Errc code = Errc::parse_error);

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

  // Returns a copy with `file` set on every diagnostic that has none.
  ParseError with_file(const std::string& file) const;

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace corvid
