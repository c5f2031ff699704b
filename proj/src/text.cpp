#include "drivelm/text.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>

namespace drivelm {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool starts_with_icase(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::optional<char> extract_option_letter(std::string_view answer) {
  const std::string text = trim(answer);
  if (text.empty()) return std::nullopt;
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  if (letter < 'A' || letter > 'Z') return std::nullopt;
  if (text.size() == 1) return letter;
  const char marker = text[1];
  if (marker != '.' && marker != ')') return std::nullopt;
  if (text.size() == 2 || is_space(text[2])) return letter;
  return std::nullopt;
}

std::string normalize_answer(std::string_view answer, const AnswerNormalization& rules) {
  if (rules.option_letter) {
    // Only a capital letter counts as an option marker; "a." stays text.
    const std::string trimmed = trim(answer);
    if (!trimmed.empty() && std::isupper(static_cast<unsigned char>(trimmed[0]))) {
      if (auto letter = extract_option_letter(trimmed)) {
        char c = *letter;
        if (rules.casefold) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return std::string(1, c);
      }
    }
  }
  std::string out = trim(answer);
  if (rules.casefold) out = to_lower(out);
  if (rules.strip_trailing_period) {
    while (!out.empty() && out.back() == '.') out.pop_back();
    out = trim(out);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_space(c)) {
      flush();
    } else if (is_alnum(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (c == '.' && !current.empty() && is_digit(current.back()) &&
               i + 1 < text.size() && is_digit(text[i + 1])) {
      current.push_back(c);
    } else {
      flush();
      tokens.emplace_back(1, c);
    }
  }
  flush();
  return tokens;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

}  // namespace drivelm
