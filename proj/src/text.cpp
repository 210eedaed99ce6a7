#include "gemvpc/text.hpp"

#include <algorithm>
#include <cctype>

namespace gemvpc {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double levenshtein_ratio(const std::string& a, const std::string& b) {
  std::size_t mx = std::max(a.size(), b.size());
  if (mx == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(mx);
}

std::string stem(const std::string& word) {
  static const char* suffixes[] = {"ingly", "edly", "ing", "ies", "ied",
                                   "est",  "ed",   "ly", "es",  "s"};
  for (const char* suf : suffixes) {
    std::size_t sl = std::char_traits<char>::length(suf);
    if (word.size() > sl + 2 && word.compare(word.size() - sl, sl, suf) == 0)
      return word.substr(0, word.size() - sl);
  }
  return word;
}

bool is_content_tag(const std::string& tag) {
  std::string t = to_lower(tag);
  if (t == "noun" || t == "verb" || t == "adv" || t == "adverb") return true;
  if (t.rfind("nn", 0) == 0 || t.rfind("vb", 0) == 0 || t.rfind("rb", 0) == 0) return true;
  return false;
}

}  // namespace gemvpc
