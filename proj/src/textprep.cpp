#include "churn/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>

namespace churn {

namespace {

constexpr std::array<std::string_view, 18> kEmoticons = {
    ":-)", ":-(", ":-d", ":-p", ":-/", ";-)", ":'(", ":)", ":(", ":d",
    ":p",  ":/",  ";)",  ":o",  ":|",  "<3",  "^^",  ":*"};

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool is_connector(char c) { return c == '-' || c == '&' || c == '\'' || c == '.' || c == '_'; }

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

/// Length of an emoticon starting at s[i], or 0. The emoticon must end the
/// chunk or be followed by a non-word byte.
std::size_t emoticon_at(std::string_view s, std::size_t i) {
  for (auto e : kEmoticons) {
    if (s.substr(i, e.size()) != e) continue;
    std::size_t end = i + e.size();
    if (end == s.size() || !is_word_byte(static_cast<unsigned char>(s[end]))) return e.size();
  }
  return 0;
}

/// General Punctuation block (U+2000..U+206F) is encoded as E2 80 xx / E2 81 xx.
std::size_t unicode_punct_at(std::string_view s, std::size_t i) {
  if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
      (static_cast<unsigned char>(s[i + 1]) == 0x80 || static_cast<unsigned char>(s[i + 1]) == 0x81))
    return 3;
  return 0;
}

void tokenize_chunk(std::string_view s, std::vector<std::string>& out) {
  if (starts_with(s, "http://") || starts_with(s, "https://") || starts_with(s, "www.")) {
    out.emplace_back("url");
    return;
  }
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    const bool next_is_word = i + 1 < s.size() && is_word_byte(static_cast<unsigned char>(s[i + 1]));
    if (std::size_t n = emoticon_at(s, i); n > 0 && !is_word_byte(c)) {
      flush();
      out.emplace_back(s.substr(i, n));
      i += n;
    } else if (std::size_t n = unicode_punct_at(s, i); n > 0) {
      flush();
      out.emplace_back(s.substr(i, n));
      i += n;
    } else if (is_word_byte(c)) {
      word += static_cast<char>(c);
      ++i;
    } else if ((c == '@' || c == '#') && word.empty() && next_is_word) {
      word += static_cast<char>(c);
      ++i;
    } else if (is_connector(static_cast<char>(c)) && next_is_word && !word.empty() &&
               word != "@" && word != "#") {
      word += static_cast<char>(c);
      ++i;
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  flush();
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (c >= 'A' && c <= 'Z') {
      out += static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < text.size()) {
      auto d = static_cast<unsigned char>(text[i + 1]);
      // U+00C0..U+00DE uppercase Latin-1, excluding U+00D7 (multiplication sign)
      if (d >= 0x80 && d <= 0x9E && d != 0x97) d = static_cast<unsigned char>(d + 0x20);
      out += static_cast<char>(c);
      out += static_cast<char>(d);
      ++i;
    } else if (c == 0xE1 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0xBA &&
               static_cast<unsigned char>(text[i + 2]) == 0x9E) {
      out += "\xC3\x9F";  // capital sharp s -> ß
      i += 2;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  const std::string lower = to_lower(text);
  std::string_view s = lower;
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) tokenize_chunk(s.substr(i, j - i), out);
    i = j;
  }
  return out;
}

std::vector<std::string> normalize_social(std::vector<std::string> tokens,
                                          const SocialOptions& options) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (auto& t : tokens) {
    if (t.empty()) continue;
    if (t[0] == '#' || t[0] == '@') {
      const bool keep = t[0] == '#' ? options.keep_hashtag_words : options.keep_mention_handles;
      std::size_t b = t.find_first_not_of("#@");
      if (!keep || b == std::string::npos) continue;
      t.erase(0, b);
    }
    out.push_back(std::move(t));
  }
  std::size_t lead = 0;
  while (lead < out.size() && out[lead] == "rt") ++lead;
  out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lead));
  return out;
}

void BrandLexicon::add(std::string_view surface, std::string_view brand_id,
                       std::string_view language) {
  std::string key = to_lower(surface);
  if (auto it = surfaces_.find(key); it != surfaces_.end()) {
    if (it->second != brand_id)
      throw Error("surface form '" + key + "' maps to both '" + it->second + "' and '" +
                  std::string(brand_id) + "'");
    return;
  }
  surfaces_.emplace(key, std::string(brand_id));
  auto& list = brands_by_language_[std::string(language)];
  if (std::find(list.begin(), list.end(), brand_id) == list.end()) list.emplace_back(brand_id);
}

std::optional<std::string> BrandLexicon::resolve(std::string_view token) const {
  auto it = surfaces_.find(to_lower(token));
  if (it == surfaces_.end()) return std::nullopt;
  return it->second;
}

bool BrandLexicon::knows_brand(std::string_view brand_id) const {
  for (const auto& [k, v] : surfaces_)
    if (v == brand_id) return true;
  return false;
}

std::vector<std::string> BrandLexicon::brands(std::string_view language) const {
  std::vector<std::string> out;
  for (const auto& [lang, list] : brands_by_language_) {
    if (!language.empty() && lang != language) continue;
    for (const auto& b : list)
      if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
  }
  return out;
}

void load_lexicon_into(BrandLexicon& lexicon, const std::filesystem::path& path,
                       std::string_view language) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open brand lexicon " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected \"<surface_form>\\t<canonical_id>\"");
    lexicon.add(trim(line.substr(0, tab)), trim(line.substr(tab + 1)), language);
  }
}

BrandLexicon load_lexicon(const std::filesystem::path& path, std::string_view language) {
  BrandLexicon lex;
  load_lexicon_into(lex, path, language);
  return lex;
}

Utterance mask_brands(Utterance u, const BrandLexicon& lexicon) {
  if (u.source_brand && u.medium == Medium::Twitter && !lexicon.knows_brand(*u.source_brand))
    throw Error("unknown source brand '" + *u.source_brand + "'");
  for (auto& t : u.tokens) {
    auto brand = lexicon.resolve(t);
    if (!brand) continue;
    t = (u.source_brand && *brand == *u.source_brand) ? kTargetToken : kCompetitorToken;
    if (std::find(u.mentioned_brands.begin(), u.mentioned_brands.end(), *brand) ==
        u.mentioned_brands.end())
      u.mentioned_brands.push_back(*brand);
  }
  return u;
}

Utterance strip_source_brand(Utterance u) {
  std::erase(u.tokens, std::string(kTargetToken));
  u.empty_after_strip = u.tokens.empty();
  return u;
}

Utterance prepare(const LabeledExample& example, const BrandLexicon& lexicon, bool strip_target) {
  Utterance u;
  u.raw_text = example.raw_text;
  u.tokens = normalize_social(tokenize(example.raw_text));
  u.source_brand = example.source_brand;
  u.language = example.language;
  u.medium = example.medium;
  u = mask_brands(std::move(u), lexicon);
  if (strip_target || example.medium == Medium::Chatbot) u = strip_source_brand(std::move(u));
  return u;
}

std::vector<LabeledExample> augment(const LabeledExample& example, const BrandLexicon& lexicon) {
  std::vector<LabeledExample> out{example};
  if (example.medium != Medium::Twitter || !example.source_brand) return out;
  Utterance u = prepare(example, lexicon);
  for (const auto& brand : u.mentioned_brands) {
    if (brand == *example.source_brand) continue;
    LabeledExample copy = example;
    copy.id = example.id + "~aug:" + brand;
    copy.source_brand = brand;
    copy.label = Label::NonChurn;
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace churn
