#include "corvid/common/error.hpp"

#include <fmt/format.h>

namespace corvid {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::permission_denied: return "permission-denied";
    case Errc::auth_failure: return "auth-failure";
    case Errc::key_id_mismatch: return "key-id-mismatch";
    case Errc::nonce_reuse: return "nonce-reuse";
    case Errc::payload_too_large: return "payload-too-large";
    case Errc::address_in_use: return "address-in-use";
    case Errc::malformed_config: return "malformed-config";
    case Errc::duplicate_client: return "duplicate-client";
    case Errc::not_found: return "not-found";
    case Errc::parse_error: return "parse-error";
    case Errc::io_error: return "io-error";
    case Errc::precondition: return "precondition";
    case Errc::conflict: return "conflict";
    case Errc::unreachable: return "unreachable";
    case Errc::unresolved_reference: return "unresolved-reference";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

std::string Diagnostic::format() const {
  std::string where = file.empty() ? std::string("<input>") : file;
  if (line > 0) {
    where += fmt::format(":{}", line);
    if (column > 0) where += fmt::format(":{}", column);
  }
  return fmt::format("{}: {}", where, message);
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += '\n';
    out += d.format();
  }
  return out;
}

}  // namespace

ParseError::ParseError(std::vector<Diagnostic> diagnostics, Errc code)
    : Error(code, join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

ParseError::ParseError(std::string file, int line, int column, std::string message,
                       std::string kind, Errc code)
    : ParseError(std::vector<Diagnostic>{Diagnostic{std::move(file), line, column,
                                                    std::move(message), std::move(kind)}},
                 code) {}

ParseError ParseError::with_file(const std::string& file) const {
  auto copy = diagnostics_;
  for (auto& d : copy) {
    if (d.file.empty()) d.file = file;
  }
  return ParseError(std::move(copy), code());
}

}  // namespace corvid
