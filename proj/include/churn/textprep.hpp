#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "churn/common.hpp"

namespace churn {

inline constexpr std::string_view kTargetToken = "target";
inline constexpr std::string_view kCompetitorToken = "competitor";

/// Case-insensitive surface form -> canonical brand id.
class BrandLexicon {
 public:
  BrandLexicon() = default;

  /// Throws if `surface` is already bound to a different brand.
  void add(std::string_view surface, std::string_view brand_id, std::string_view language = {});

  std::optional<std::string> resolve(std::string_view token) const;
  bool knows_brand(std::string_view brand_id) const;
  std::vector<std::string> brands(std::string_view language = {}) const;
  bool empty() const { return surfaces_.empty(); }

 private:
  std::map<std::string, std::string, std::less<>> surfaces_;
  std::map<std::string, std::vector<std::string>, std::less<>> brands_by_language_;
};

/// Reads "<surface_form>\t<canonical_id>" lines.
BrandLexicon load_lexicon(const std::filesystem::path& path, std::string_view language = {});
void load_lexicon_into(BrandLexicon& lexicon, const std::filesystem::path& path,
                       std::string_view language = {});

struct Utterance {
  std::string raw_text;
  std::vector<std::string> tokens;
  std::optional<std::string> source_brand;
  std::vector<std::string> mentioned_brands;
  std::string language = "en";
  Medium medium = Medium::Twitter;
  /// Set by strip_source_brand when nothing is left.
  bool empty_after_strip = false;
};

/// Lowercases (ASCII and German letters), splits on whitespace and
/// punctuation, keeps emoticons whole and collapses URLs to "url". A leading
/// '@' or '#' stays attached to its word for normalize_social.
std::vector<std::string> tokenize(std::string_view text);

/// UTF-8 aware lowercase for ASCII, Latin-1 letters (Ä Ö Ü ...) and ẞ.
std::string to_lower(std::string_view text);

struct SocialOptions {
  bool keep_hashtag_words = true;
  bool keep_mention_handles = true;
};

/// Drops a leading "rt" and strips '#'/'@' markers.
std::vector<std::string> normalize_social(std::vector<std::string> tokens,
                                          const SocialOptions& options = {});

/// Source brand -> "target", every other lexicon brand -> "competitor".
/// Without a source brand, all brands become "competitor".
Utterance mask_brands(Utterance u, const BrandLexicon& lexicon);

/// Removes "target" tokens.
Utterance strip_source_brand(Utterance u);

/// Builds the masked utterance for an example: tokenize, normalize, mask,
/// and strip the target mention when `strip_target` is set. Chatbot input
/// always has its source brand stripped rather than masked.
Utterance prepare(const LabeledExample& example, const BrandLexicon& lexicon,
                  bool strip_target = false);

/// Original example plus one non-churn copy per competitor brand mentioned,
/// with that competitor as the new source brand.
std::vector<LabeledExample> augment(const LabeledExample& example, const BrandLexicon& lexicon);

}  // namespace churn
