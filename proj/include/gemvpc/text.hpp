#pragma once

#include <string>
#include <vector>

namespace gemvpc {

// Lowercases and splits on whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

std::string to_lower(std::string s);

// Joins tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& toks);

std::size_t levenshtein(const std::string& a, const std::string& b);

// 1 - distance / max(len_a, len_b); 1.0 for two empty strings.
double levenshtein_ratio(const std::string& a, const std::string& b);

// Rule-based suffix stripper, enough for METEOR-lite stem matching.
std::string stem(const std::string& word);

// True for noun/verb/adverb tags, accepting both plain names
// ("noun", "verb", "adv"/"adverb") and Penn-style prefixes (NN*, VB*, RB*).
bool is_content_tag(const std::string& tag);

}  // namespace gemvpc
