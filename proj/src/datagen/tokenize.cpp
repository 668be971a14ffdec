#include "corvid/datagen/tokenize.hpp"

namespace corvid::datagen {

std::vector<Token> tokenize_spans(std::string_view text) {
  std::vector<Token> out;
  Token cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    const bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (word) {
      if (cur.text.empty()) cur.begin = i;
      cur.text.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : text[i]);
      cur.end = i + 1;
    } else if (!cur.text.empty()) {
      out.push_back(std::move(cur));
      cur = Token{};
    }
  }
  if (!cur.text.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_spans(text)) out.push_back(std::move(t.text));
  return out;
}

}  // namespace corvid::datagen
