#include <doctest.h>

#include <set>
#include <thread>

#include "churn/datasets.hpp"
#include "churn/model.hpp"
#include "churn/service.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace churn;
using churn::testing::TempDir;
using json = nlohmann::json;

namespace {

std::shared_ptr<const Classifier> toy_classifier() {
  static std::shared_ptr<const Classifier> clf = [] {
    auto toy = churn::testing::make_toy_corpus(16, 32, 11);
    EmbeddingSpace space;
    space.add(toy.embeddings);
    ModelConfig c;
    c.embed_dim = 16;
    c.filters = 16;
    c.gru_units = 8;
    c.max_epochs = 100;
    c.patience = 100;
    c.batch_size = 8;
    c.learning_rate = 0.01;
    c.seed = 4;
    TrainOptions o;
    o.on_epoch = [](const EpochRecord& e) { return e.scores.front().f1 < 1.0; };
    auto r = train(toy.examples, std::vector<EvalSet>{{"train", toy.examples}}, space, BrandLexicon{}, c, o);
    return std::make_shared<const Classifier>(r.best, space, BrandLexicon{});
  }();
  return clf;
}

FeedbackStore::Clock fixed_clock() {
  return [] { return std::string("2024-01-01T00:00:00Z"); };
}

json feedback(std::string text, std::string predicted, std::string verdict, std::string lang = "en") {
  return {{"text", text}, {"predicted_label", predicted}, {"verdict", verdict}, {"language", lang}};
}

}  // namespace

TEST_CASE("detect_language") {
  auto de = detect_language("ich will meinen vertrag kündigen");
  CHECK(de.language == "de");
  CHECK(de.score >= 0.5);
  CHECK_FALSE(de.low_confidence);
  auto en = detect_language("i want to cancel my contract");
  CHECK(en.language == "en");
  CHECK(en.score >= 0.5);
  auto ok = detect_language("ok");
  CHECK(ok.language == "en");
  CHECK(ok.score == 0.5);
  CHECK(ok.low_confidence);
  CHECK_THROWS(detect_language(""));
  CHECK_THROWS(detect_language("  "));
}

TEST_CASE("label derivation covers all four cases") {
  CHECK(derive_label(Label::Churn, UserVerdict::Approve) == Label::Churn);
  CHECK(derive_label(Label::Churn, UserVerdict::Disapprove) == Label::NonChurn);
  CHECK(derive_label(Label::NonChurn, UserVerdict::Approve) == Label::NonChurn);
  CHECK(derive_label(Label::NonChurn, UserVerdict::Disapprove) == Label::Churn);
  CHECK(parse_verdict("approve") == UserVerdict::Approve);
  CHECK_FALSE(parse_verdict("maybe"));
}

TEST_CASE("feedback and review handlers") {
  TempDir dir;
  FeedbackStore store(dir.path(), fixed_clock());
  AnnotationService svc(nullptr, store);

  auto r = svc.handle_feedback(feedback("i am leaving you", "churn", "approve"));
  CHECK(r.status == 201);
  CHECK(r.body["id"] == "fb-000001");
  CHECK(r.body["derived_label"] == "churn");
  CHECK(r.body["review_status"] == "pending");
  CHECK(r.body["timestamp"] == "2024-01-01T00:00:00Z");

  r = svc.handle_feedback(feedback("ich bleibe bei euch", "churn", "disapprove", "de"));
  CHECK(r.status == 201);
  CHECK(r.body["derived_label"] == "non_churn");
  CHECK(r.body["language"] == "de");

  json detected = {{"text", "ich will nicht mehr"}, {"predicted_label", "churn"}, {"verdict", "approve"}};
  CHECK(svc.handle_feedback(detected).body["language"] == "de");

  CHECK(svc.handle_feedback(feedback("x", "churn", "meh")).status == 400);
  CHECK(svc.handle_feedback(feedback("", "churn", "approve")).status == 400);
  CHECK(svc.handle_feedback(feedback("x", "perhaps", "approve")).status == 400);
  CHECK(svc.handle_feedback(feedback("x", "churn", "approve", "fr")).status == 400);
  CHECK(store.size() == 3);

  CHECK(svc.handle_review({{"id", "fb-000001"}, {"reviewer_label", "churn"}}).body["review_status"] == "confirmed");
  CHECK(svc.handle_review({{"id", "fb-000001"}, {"reviewer_label", "churn"}}).status == 409);
  CHECK(svc.handle_review({{"id", "fb-000002"}, {"reviewer_label", "churn"}}).body["review_status"] == "rejected");
  CHECK(svc.handle_review({{"id", "fb-999999"}, {"reviewer_label", "churn"}}).status == 404);
  CHECK(svc.handle_review({{"id", "fb-000003"}, {"reviewer_label", "?"}}).status == 400);

  auto stats = svc.handle_stats().body;
  CHECK(stats["en"]["churn"] == 1);
  CHECK(stats["de"]["churn"] == 0);
  CHECK(stats["total_confirmed"] == 1);
  CHECK(stats["pending"] == 1);
  CHECK(stats["rejected"] == 1);

  CHECK(svc.handle_records("pending").body.size() == 1);
  CHECK(svc.handle_records(std::nullopt).body.size() == 3);
  CHECK(svc.handle_records("bogus").status == 400);
  CHECK(svc.handle_health().body["model_loaded"] == false);
  CHECK(svc.handle_predict({{"text", "hello"}}).status == 503);
}

TEST_CASE("store is append-only and reloads with last line winning") {
  TempDir dir;
  {
    FeedbackStore store(dir.path(), fixed_clock());
    FeedbackRecord r;
    r.text = "tschüss";
    r.language = "de";
    r.predicted_label = Label::Churn;
    auto saved = store.append(r);
    store.review(saved.id, Label::Churn);
  }
  auto lines = churn::testing::read_file(dir / "feedback_de.jsonl");
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
  FeedbackStore reopened(dir.path(), fixed_clock());
  CHECK(reopened.size() == 1);
  CHECK(reopened.find("fb-000001")->review_status == ReviewStatus::Confirmed);
  CHECK(reopened.find("fb-000001")->text == "tschüss");
  FeedbackRecord next;
  next.text = "weiter";
  next.language = "de";
  CHECK(reopened.append(next).id == "fb-000002");

  churn::testing::write_file(dir / "feedback_en.jsonl", "{broken\n");
  CHECK_THROWS_AS(FeedbackStore(dir.path()), ParseError);
}

TEST_CASE("export keeps only confirmed records and matches stats") {
  TempDir dir;
  FeedbackStore store(dir / "store", fixed_clock());
  AnnotationService svc(nullptr, store);
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) {
    const bool de = i % 3 == 0;
    auto r = svc.handle_feedback(feedback("text, \"quoted\" " + std::to_string(i), i % 2 ? "churn" : "non_churn",
                                          i % 4 ? "approve" : "disapprove", de ? "de" : "en"));
    ids.push_back(r.body["id"]);
  }
  for (int i = 0; i < 5; ++i) {
    auto rec = *store.find(ids[i]);
    svc.handle_review({{"id", ids[i]}, {"reviewer_label", std::string(to_string(rec.derived_label))}});
  }
  for (int i = 5; i < 7; ++i) {
    auto rec = *store.find(ids[i]);
    svc.handle_review({{"id", ids[i]}, {"reviewer_label", std::string(to_string(flip(rec.derived_label)))}});
  }
  CHECK(export_confirmed(store, dir / "out.csv") == 5);
  auto rows = load_dataset(dir / "out.csv");
  REQUIRE(rows.size() == 5);
  for (const auto& row : rows) {
    auto rec = *store.find(row.id);
    CHECK(row.raw_text == rec.text);
    CHECK(row.label == rec.derived_label);
    CHECK(row.language == rec.language);
    CHECK(row.medium == Medium::Chatbot);
  }
  auto from_csv = stats(rows, StatsGrouping::Language);
  auto body = svc.handle_stats().body;
  for (const char* lang : {"en", "de"}) {
    const auto* g = from_csv.find(lang);
    CHECK(body[lang]["churn"] == (g ? g->churn : 0));
    CHECK(body[lang]["non_churn"] == (g ? g->non_churn : 0));
  }
}

TEST_CASE("predict handler") {
  TempDir dir;
  FeedbackStore store(dir.path());
  AnnotationService svc(toy_classifier(), store);
  auto r = svc.handle_predict({{"text", "cancel my plan today"}, {"language", "en"}});
  CHECK(r.status == 200);
  CHECK(r.body["label"] == "churn");
  CHECK(r.body["confidence"].get<double>() >= 0.5);
  CHECK(r.body["language"] == "en");
  CHECK(svc.handle_predict({{"text", "cancel my plan today"}, {"language", "en"}}).body == r.body);

  auto calm = svc.handle_predict({{"text", "love great service"}});
  CHECK(calm.body["label"] == "non_churn");
  CHECK(calm.body["language_low_confidence"] == true);

  CHECK(svc.handle_predict({{"text", "ich will weg"}, {"language", "en"}}).body["language"] == "en");
  CHECK(svc.handle_predict({{"text", "ich will weg"}}).body["language"] == "de");
  CHECK(svc.handle_predict({{"text", ""}}).status == 400);
  CHECK(svc.handle_predict({{"nope", 1}}).status == 400);
  CHECK(svc.handle_predict({{"text", "x"}, {"language", "fr"}}).status == 400);
  CHECK(store.size() == 0);
}

TEST_CASE("http endpoints and concurrent feedback") {
  TempDir dir;
  FeedbackStore store(dir.path());
  AnnotationService svc(toy_classifier(), store);
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client probe("127.0.0.1", port);
  for (int i = 0; i < 100 && !probe.Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto health = probe.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["model_loaded"] == true);

  auto pred = probe.Post("/predict", R"({"text": "cancel my plan"})", "application/json");
  REQUIRE(pred);
  CHECK(pred->status == 200);
  CHECK(json::parse(pred->body).contains("label"));
  CHECK(probe.Post("/predict", "not json", "application/json")->status == 400);

  constexpr int kPosts = 100;
  std::vector<std::thread> clients;
  std::atomic<int> created{0};
  for (int t = 0; t < 10; ++t)
    clients.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < kPosts / 10; ++i) {
        auto body = feedback("message " + std::to_string(t) + "-" + std::to_string(i), "churn",
                             i % 2 ? "approve" : "disapprove", t % 2 ? "de" : "en");
        auto res = c.Post("/feedback", body.dump(), "application/json");
        if (res && res->status == 201) ++created;
      }
    });
  for (auto& c : clients) c.join();
  CHECK(created == kPosts);
  CHECK(store.size() == kPosts);

  FeedbackStore reread(dir.path());
  auto all = reread.records();
  CHECK(all.size() == kPosts);
  std::set<std::string> ids, texts;
  for (const auto& r : all) {
    ids.insert(r.id);
    texts.insert(r.text);
  }
  CHECK(ids.size() == kPosts);
  CHECK(texts.size() == kPosts);

  auto review = probe.Post("/review", json{{"id", all[0].id}, {"reviewer_label", "churn"}}.dump(), "application/json");
  REQUIRE(review);
  CHECK(review->status == 200);
  auto stats = probe.Get("/stats");
  REQUIRE(stats);
  CHECK(json::parse(stats->body)["pending"] == kPosts - 1);
  auto pending = probe.Get("/records?status=pending");
  REQUIRE(pending);
  CHECK(json::parse(pending->body).size() == kPosts - 1);

  server.stop();
  loop.join();
  CHECK_FALSE(server.running());
}
