#include "churn/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <httplib.h>

#include "churn/datasets.hpp"
#include "churn/model.hpp"
#include "churn/textprep.hpp"

namespace churn {

namespace {

// Words shared by both languages ("in", "was", "will", "so", ...) are left out.
const std::set<std::string, std::less<>> kEnglishStopwords = {
    "i",     "me",    "my",    "we",    "our",   "you",   "your",  "he",     "she",   "it",
    "its",   "they",  "them",  "their", "what",  "which", "who",   "this",   "that",  "these",
    "those", "am",    "is",    "are",   "were",  "be",    "been",  "being",  "have",  "has",
    "had",   "do",    "does",  "did",   "a",     "an",    "the",   "and",    "but",   "if",
    "or",    "because", "as",  "of",    "at",    "by",    "for",   "with",   "about", "to",
    "from",  "up",    "on",    "off",   "over",  "again", "then",  "once",   "here",  "there",
    "when",  "where", "why",   "how",   "all",   "any",   "both",  "each",   "more",  "most",
    "other", "some",  "no",    "not",   "only",  "own",   "same",  "than",   "too",   "very",
    "can",   "just",  "should", "now",  "want",  "would", "could", "my",     "im",    "i'm",
    "don't", "dont",  "can't", "cant",  "going", "get",   "got",   "please", "thanks", "with"};

const std::set<std::string, std::less<>> kGermanStopwords = {
    "ich",    "mich",   "mir",    "mein",   "meine",  "meinen", "meinem", "meiner", "du",
    "dich",   "dir",    "dein",   "deine",  "er",     "sie",    "es",     "wir",    "uns",
    "unser",  "ihr",    "euch",   "ihnen",  "der",    "die",    "das",    "dem",    "den",
    "des",    "ein",    "eine",   "einen",  "einem",  "einer",  "und",    "oder",   "aber",
    "nicht",  "kein",   "keine",  "keinen", "ist",    "sind",   "bin",    "bist",   "war",
    "waren",  "habe",   "hast",   "hat",    "haben",  "wird",   "werde",  "werden", "mit",
    "von",    "zu",     "zum",    "zur",    "auf",    "für",    "bei",    "nach",   "aus",
    "auch",   "noch",   "schon",  "nur",    "sehr",   "jetzt",  "wenn",   "weil",   "dass",
    "wie",    "warum",  "wo",     "hier",   "dort",   "mehr",   "immer",  "wieder", "kann",
    "möchte", "will",   "mal",    "doch",   "endlich", "euer",  "eure",   "diese",  "dieser"};

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::optional<Label> label_from_json(const nlohmann::json& v) {
  if (v.is_string()) return parse_label(v.get<std::string>());
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return label_from_index(static_cast<int>(i));
  }
  return std::nullopt;
}

Response error(int status, std::string message) {
  return {status, {{"error", std::move(message)}}};
}

std::optional<std::string> text_field(const nlohmann::json& request) {
  if (!request.is_object() || !request.contains("text") || !request["text"].is_string())
    return std::nullopt;
  auto text = request["text"].get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
  return text;
}

}  // namespace

LanguageGuess detect_language(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw Error("detect_language: empty text");
  std::size_t en = 0, de = 0;
  for (const auto& tok : tokenize(text)) {
    en += kEnglishStopwords.count(tok);
    de += kGermanStopwords.count(tok);
  }
  LanguageGuess g;
  if (en == de) return g;
  g.language = de > en ? "de" : "en";
  g.score = static_cast<double>(std::max(en, de)) / static_cast<double>(en + de);
  g.low_confidence = false;
  return g;
}

std::string_view to_string(UserVerdict v) {
  return v == UserVerdict::Approve ? "approve" : "disapprove";
}

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Pending: return "pending";
    case ReviewStatus::Confirmed: return "confirmed";
    case ReviewStatus::Rejected: return "rejected";
  }
  return "pending";
}

std::optional<UserVerdict> parse_verdict(std::string_view s) {
  if (s == "approve") return UserVerdict::Approve;
  if (s == "disapprove") return UserVerdict::Disapprove;
  return std::nullopt;
}

std::optional<ReviewStatus> parse_review_status(std::string_view s) {
  if (s == "pending") return ReviewStatus::Pending;
  if (s == "confirmed") return ReviewStatus::Confirmed;
  if (s == "rejected") return ReviewStatus::Rejected;
  return std::nullopt;
}

Label derive_label(Label predicted, UserVerdict verdict) {
  return verdict == UserVerdict::Approve ? predicted : flip(predicted);
}

void to_json(nlohmann::json& j, const FeedbackRecord& r) {
  j = {{"id", r.id},
       {"text", r.text},
       {"predicted_label", to_string(r.predicted_label)},
       {"predicted_confidence", r.predicted_confidence},
       {"user_verdict", to_string(r.user_verdict)},
       {"derived_label", to_string(r.derived_label)},
       {"language", r.language},
       {"timestamp", r.timestamp},
       {"review_status", to_string(r.review_status)}};
}

void from_json(const nlohmann::json& j, FeedbackRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  auto predicted = label_from_json(j.at("predicted_label"));
  auto derived = label_from_json(j.at("derived_label"));
  auto verdict = parse_verdict(j.at("user_verdict").get<std::string>());
  auto status = parse_review_status(j.at("review_status").get<std::string>());
  if (!predicted || !derived || !verdict || !status)
    throw ParseError("feedback record '" + r.id + "' has an invalid enum field");
  r.predicted_label = *predicted;
  r.derived_label = *derived;
  r.user_verdict = *verdict;
  r.review_status = *status;
  r.predicted_confidence = j.at("predicted_confidence").get<double>();
  r.language = j.at("language").get<std::string>();
  r.timestamp = j.value("timestamp", "");
}

LabeledExample to_example(const FeedbackRecord& r) {
  LabeledExample e;
  e.id = r.id;
  e.raw_text = r.text;
  e.label = r.derived_label;
  e.confidence = 1.0;
  e.language = r.language;
  e.medium = Medium::Chatbot;
  return e;
}

// ---------------------------------------------------------------------------

FeedbackStore::FeedbackStore(std::filesystem::path directory, Clock clock)
    : directory_(std::move(directory)), clock_(clock ? std::move(clock) : Clock(now_utc)) {
  std::filesystem::create_directories(directory_);
  load();
}

std::filesystem::path FeedbackStore::file_for(const std::string& language) const {
  return directory_ / ("feedback_" + language + ".jsonl");
}

void FeedbackStore::load() {
  for (const char* lang : {"en", "de"}) {
    const auto path = file_for(lang);
    std::ifstream in(path);
    if (!in) continue;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      FeedbackRecord r;
      try {
        r = nlohmann::json::parse(line).get<FeedbackRecord>();
      } catch (const std::exception& e) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!by_id_.count(r.id)) order_.push_back(r.id);
      if (r.id.size() > 3 && r.id.rfind("fb-", 0) == 0) {
        try {
          next_id_ = std::max<std::size_t>(next_id_, std::stoull(r.id.substr(3)) + 1);
        } catch (const std::exception&) {
        }
      }
      by_id_[r.id] = std::move(r);
    }
  }
}

void FeedbackStore::persist(const FeedbackRecord& r) {
  const auto path = file_for(r.language);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open feedback store " + path.string());
  out << nlohmann::json(r).dump() << '\n';
  out.flush();
  if (!out) throw Error("write failed on feedback store " + path.string());
}

FeedbackRecord FeedbackStore::append(FeedbackRecord record) {
  if (record.language != "en" && record.language != "de")
    throw Error("unsupported language '" + record.language + "'");
  std::lock_guard lock(mutex_);
  std::ostringstream id;
  id << "fb-" << std::setw(6) << std::setfill('0') << next_id_;
  record.id = id.str();
  record.timestamp = clock_();
  record.review_status = ReviewStatus::Pending;
  record.derived_label = derive_label(record.predicted_label, record.user_verdict);
  persist(record);
  ++next_id_;
  order_.push_back(record.id);
  by_id_[record.id] = record;
  return record;
}

FeedbackRecord FeedbackStore::review(const std::string& id, Label reviewer_label) {
  std::lock_guard lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw NotFoundError("no feedback record '" + id + "'");
  if (it->second.review_status != ReviewStatus::Pending)
    throw ConflictError("record '" + id + "' is already " +
                        std::string(to_string(it->second.review_status)));
  FeedbackRecord updated = it->second;
  updated.review_status =
      reviewer_label == updated.derived_label ? ReviewStatus::Confirmed : ReviewStatus::Rejected;
  persist(updated);
  it->second = updated;
  return updated;
}

std::optional<FeedbackRecord> FeedbackStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<FeedbackRecord> FeedbackStore::records(std::optional<ReviewStatus> status) const {
  std::lock_guard lock(mutex_);
  std::vector<FeedbackRecord> out;
  for (const auto& id : order_) {
    const auto& r = by_id_.at(id);
    if (!status || r.review_status == *status) out.push_back(r);
  }
  return out;
}

std::vector<LabeledExample> FeedbackStore::confirmed_examples() const {
  std::vector<LabeledExample> out;
  for (const auto& r : records(ReviewStatus::Confirmed)) out.push_back(to_example(r));
  return out;
}

std::map<std::string, LabelCounts> FeedbackStore::confirmed_counts() const {
  std::map<std::string, LabelCounts> out{{"en", {}}, {"de", {}}};
  for (const auto& r : records(ReviewStatus::Confirmed)) {
    auto& c = out[r.language];
    (r.derived_label == Label::Churn ? c.churn : c.non_churn) += 1;
  }
  return out;
}

std::size_t FeedbackStore::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

std::size_t export_confirmed(const FeedbackStore& store, const std::filesystem::path& csv_path) {
  auto examples = store.confirmed_examples();
  save_dataset(examples, csv_path);
  return examples.size();
}

// ---------------------------------------------------------------------------

AnnotationService::AnnotationService(std::shared_ptr<const Classifier> model, FeedbackStore& store)
    : model_(std::move(model)), store_(store) {}

Response AnnotationService::handle_predict(const nlohmann::json& request) const {
  auto text = text_field(request);
  if (!text) return error(400, "text must be a nonempty string");
  if (!model_) return error(503, "no model loaded");
  LanguageGuess guess = detect_language(*text);
  if (request.contains("language")) {
    const auto& l = request["language"];
    if (!l.is_string() || (l != "en" && l != "de"))
      return error(400, "language must be \"en\" or \"de\"");
    guess = {l.get<std::string>(), 1.0, false};
  }
  Prediction p;
  try {
    model_->table_for(guess.language);
  } catch (const Error& e) {
    return error(503, e.what());
  }
  try {
    p = model_->predict(*text, guess.language, Medium::Chatbot);
  } catch (const Error& e) {
    return error(400, e.what());
  }
  return {200,
          {{"label", to_string(p.label)},
           {"confidence", p.confidence},
           {"churn_probability", p.churn_probability},
           {"language", guess.language},
           {"language_score", guess.score},
           {"language_low_confidence", guess.low_confidence}}};
}

Response AnnotationService::handle_feedback(const nlohmann::json& request) {
  auto text = text_field(request);
  if (!text) return error(400, "text must be a nonempty string");
  if (!request.contains("verdict") || !request["verdict"].is_string())
    return error(400, "verdict must be \"approve\" or \"disapprove\"");
  auto verdict = parse_verdict(request["verdict"].get<std::string>());
  if (!verdict) return error(400, "unknown verdict '" + request["verdict"].get<std::string>() + "'");
  if (!request.contains("predicted_label")) return error(400, "predicted_label is required");
  auto predicted = label_from_json(request["predicted_label"]);
  if (!predicted) return error(400, "predicted_label must be \"churn\" or \"non_churn\"");

  FeedbackRecord r;
  r.text = *text;
  r.predicted_label = *predicted;
  r.user_verdict = *verdict;
  if (request.contains("predicted_confidence")) {
    const auto& c = request["predicted_confidence"];
    if (!c.is_number() || c.get<double>() < 0 || c.get<double>() > 1)
      return error(400, "predicted_confidence must be a number in [0, 1]");
    r.predicted_confidence = c.get<double>();
  }
  if (request.contains("language")) {
    const auto& l = request["language"];
    if (!l.is_string() || (l != "en" && l != "de"))
      return error(400, "language must be \"en\" or \"de\"");
    r.language = l.get<std::string>();
  } else {
    r.language = detect_language(*text).language;
  }
  try {
    return {201, store_.append(std::move(r))};
  } catch (const Error& e) {
    return error(500, e.what());
  }
}

Response AnnotationService::handle_review(const nlohmann::json& request) {
  if (!request.is_object() || !request.contains("id") || !request["id"].is_string())
    return error(400, "id must be a string");
  if (!request.contains("reviewer_label")) return error(400, "reviewer_label is required");
  auto label = label_from_json(request["reviewer_label"]);
  if (!label) return error(400, "reviewer_label must be \"churn\" or \"non_churn\"");
  try {
    return {200, store_.review(request["id"].get<std::string>(), *label)};
  } catch (const NotFoundError& e) {
    return error(404, e.what());
  } catch (const ConflictError& e) {
    return error(409, e.what());
  } catch (const Error& e) {
    return error(500, e.what());
  }
}

Response AnnotationService::handle_stats() const {
  nlohmann::json body = nlohmann::json::object();
  std::size_t churn = 0, total = 0;
  for (const auto& [lang, c] : store_.confirmed_counts()) {
    body[lang] = {{"churn", c.churn}, {"non_churn", c.non_churn}};
    churn += c.churn;
    total += c.churn + c.non_churn;
  }
  std::size_t pending = 0, rejected = 0;
  for (const auto& r : store_.records()) {
    pending += r.review_status == ReviewStatus::Pending;
    rejected += r.review_status == ReviewStatus::Rejected;
  }
  body["total_confirmed"] = total;
  body["churn_ratio"] = total == 0 ? 0.0 : static_cast<double>(churn) / static_cast<double>(total);
  body["pending"] = pending;
  body["rejected"] = rejected;
  return {200, body};
}

Response AnnotationService::handle_health() const {
  return {200, {{"status", "ok"}, {"model_loaded", model_ != nullptr}, {"records", store_.size()}}};
}

Response AnnotationService::handle_records(std::optional<std::string_view> status) const {
  std::optional<ReviewStatus> filter;
  if (status) {
    filter = parse_review_status(*status);
    if (!filter) return error(400, "unknown status '" + std::string(*status) + "'");
  }
  return {200, store_.records(filter)};
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  AnnotationService& service;
  httplib::Server server;
  explicit Impl(AnnotationService& s) : service(s) {}
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

template <typename Handler>
httplib::Server::Handler json_post(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      reply(res, error(400, "request body is not valid JSON"));
      return;
    }
    reply(res, handler(body));
  };
}

}  // namespace

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& s = impl_->server;
  auto& svc = impl_->service;
  s.Post("/predict", json_post([&svc](const nlohmann::json& b) { return svc.handle_predict(b); }));
  s.Post("/feedback", json_post([&svc](const nlohmann::json& b) { return svc.handle_feedback(b); }));
  s.Post("/review", json_post([&svc](const nlohmann::json& b) { return svc.handle_review(b); }));
  s.Get("/stats", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.handle_stats());
  });
  s.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.handle_health());
  });
  s.Get("/records", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> status;
    if (req.has_param("status")) status = req.get_param_value("status");
    reply(res, svc.handle_records(status ? std::optional<std::string_view>(*status) : std::nullopt));
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error(500, what));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace churn
