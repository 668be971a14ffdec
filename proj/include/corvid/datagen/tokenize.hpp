#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace corvid::datagen {

// Lowercases ASCII and splits on ASCII whitespace and punctuation, which is
// dropped. Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Token {
  std::string text;
  std::size_t begin = 0;  // byte offsets into the input
  std::size_t end = 0;
};

std::vector<Token> tokenize_spans(std::string_view text);

}  // namespace corvid::datagen
