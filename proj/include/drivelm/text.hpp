#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drivelm {

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool starts_with_icase(std::string_view text, std::string_view prefix);

/// Rules deciding when two closed-form answers count as the same.
struct AnswerNormalization {
  bool casefold = true;
  bool strip_trailing_period = true;
  // "A. Turn left." and "A" both reduce to "a".
  bool option_letter = true;
};

/// Option letter of an answer written as "A", "A.", "A)" or "A. <text>".
std::optional<char> extract_option_letter(std::string_view answer);

std::string normalize_answer(std::string_view answer,
                             const AnswerNormalization& rules = {});

/// Lowercases, splits punctuation into separate tokens and splits on
/// whitespace. Decimal points inside numbers stay attached.
std::vector<std::string> tokenize(std::string_view text);

/// 64-bit FNV-1a, used for stable digests in mock responses.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace drivelm
