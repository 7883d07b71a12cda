#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "churn/common.hpp"

namespace churn {

class Classifier;

struct LanguageGuess {
  std::string language = "en";
  double score = 0.5;
  bool low_confidence = true;
};

/// Stopword overlap against built-in EN/DE lists. Ties, including texts
/// with no stopwords at all, go to "en" with score 0.5 and the low-confidence
/// flag. Throws on empty text.
LanguageGuess detect_language(std::string_view text);

enum class UserVerdict { Approve, Disapprove };
enum class ReviewStatus { Pending, Confirmed, Rejected };

std::string_view to_string(UserVerdict v);
std::string_view to_string(ReviewStatus s);
std::optional<UserVerdict> parse_verdict(std::string_view s);
std::optional<ReviewStatus> parse_review_status(std::string_view s);

/// Predicted label if approved, flipped if disapproved.
Label derive_label(Label predicted, UserVerdict verdict);

struct FeedbackRecord {
  std::string id;
  std::string text;
  Label predicted_label = Label::NonChurn;
  double predicted_confidence = 0.0;
  UserVerdict user_verdict = UserVerdict::Approve;
  Label derived_label = Label::NonChurn;
  std::string language = "en";
  std::string timestamp;
  ReviewStatus review_status = ReviewStatus::Pending;
};

void to_json(nlohmann::json& j, const FeedbackRecord& r);
void from_json(const nlohmann::json& j, FeedbackRecord& r);

/// Confirmed record as a chatbot dataset row.
LabeledExample to_example(const FeedbackRecord& r);

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

struct LabelCounts {
  std::size_t churn = 0;
  std::size_t non_churn = 0;
};

/// Append-only feedback store: one JSONL file per language
/// (feedback_<lang>.jsonl) under a directory. A review appends the updated
/// record; on load the last line for an id wins. All writes are serialized.
class FeedbackStore {
 public:
  using Clock = std::function<std::string()>;

  explicit FeedbackStore(std::filesystem::path directory, Clock clock = {});

  /// Assigns id, timestamp and pending status, persists, returns the record.
  FeedbackRecord append(FeedbackRecord record);

  /// Throws NotFoundError for an unknown id, ConflictError if the record
  /// was already reviewed.
  FeedbackRecord review(const std::string& id, Label reviewer_label);

  std::optional<FeedbackRecord> find(const std::string& id) const;
  std::vector<FeedbackRecord> records(std::optional<ReviewStatus> status = std::nullopt) const;
  std::vector<LabeledExample> confirmed_examples() const;

  /// Confirmed counts per language.
  std::map<std::string, LabelCounts> confirmed_counts() const;
  std::size_t size() const;

  std::filesystem::path file_for(const std::string& language) const;
  const std::filesystem::path& directory() const { return directory_; }

 private:
  void load();
  void persist(const FeedbackRecord& r);

  std::filesystem::path directory_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::vector<std::string> order_;
  std::map<std::string, FeedbackRecord> by_id_;
  std::size_t next_id_ = 1;
};

/// Writes the confirmed records of a store in the dataset CSV schema.
std::size_t export_confirmed(const FeedbackStore& store, const std::filesystem::path& csv_path);

struct Response {
  int status = 200;
  nlohmann::json body;
};

class AnnotationService {
 public:
  /// `model` may be null; prediction then answers 503.
  AnnotationService(std::shared_ptr<const Classifier> model, FeedbackStore& store);

  Response handle_predict(const nlohmann::json& request) const;
  Response handle_feedback(const nlohmann::json& request);
  Response handle_review(const nlohmann::json& request);
  Response handle_stats() const;
  Response handle_health() const;
  Response handle_records(std::optional<std::string_view> status) const;

 private:
  std::shared_ptr<const Classifier> model_;
  FeedbackStore& store_;
};

/// HTTP front end:
///   POST /predict, POST /feedback, POST /review, GET /stats, GET /health,
///   GET /records[?status=pending|confirmed|rejected].
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the port (0 picks a free one); throws if it cannot.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace churn
