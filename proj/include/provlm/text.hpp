#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace provlm {

// Lowercases, splits on whitespace, and breaks punctuation into standalone
// tokens. Angle-bracketed special literals are left to the tokenizer layer;
// this is the plain-word path.
std::vector<std::string> split_words(std::string_view text);

// Whitespace-delimited fields (no punctuation splitting, no lowercasing).
std::vector<std::string> split_fields(std::string_view text);

// Lowercase + collapse runs of whitespace + trim. Used for exact-match
// scoring and refusal detection.
std::string normalize_text(std::string_view text);

std::string to_lower(std::string_view text);

uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ULL);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace provlm
