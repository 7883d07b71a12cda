#include <doctest.h>

#include <cstring>

#include "churn/checkpoint.hpp"
#include "churn/model.hpp"
#include "support.hpp"

using namespace churn;
using churn::testing::TempDir;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.embed_dim = 6;
  c.filters = 4;
  c.gru_units = 3;
  c.max_len = 5;
  return c;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("container round trip keeps every byte") {
  Container c;
  c.kind = "test";
  c.meta = {{"k", 3}};
  c.add("v", {4}, {1.f, -2.f, 3.5f, 1e-30f});
  RowMatrix<float> m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  c.add_matrix("m", m);
  auto bytes = encode_container(c);
  CHECK(bytes.substr(0, 5) == "CHKV1");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 5, 8);
  CHECK(nlohmann::json::parse(bytes.substr(13, len))["kind"] == "test");

  auto d = decode_container(bytes);
  CHECK(d.kind == "test");
  CHECK(d.meta["k"] == 3);
  CHECK(d.array("v").data == c.array("v").data);
  CHECK(d.matrix("m") == m);
  CHECK(d.matrix("v").rows() == 4);
  CHECK(encode_container(d) == bytes);
  CHECK_THROWS(d.array("nope"));
  CHECK_THROWS_AS(c.add("bad", {2, 2}, {1.f}), DimensionError);
}

TEST_CASE("corrupt containers are rejected with a clear error") {
  Container c;
  c.kind = "test";
  c.add("v", {3}, {1.f, 2.f, 3.f});
  const auto bytes = encode_container(c);

  CHECK(message_of([&] { decode_container("JUNKJUNKJUNK", "f"); }).find("magic") != std::string::npos);
  std::string v2 = bytes;
  v2[4] = '2';
  CHECK(message_of([&] { decode_container(v2, "f"); }).find("version") != std::string::npos);
  CHECK_THROWS_AS(decode_container(bytes.substr(0, 9)), ParseError);
  CHECK_THROWS_AS(decode_container(bytes.substr(0, 20)), ParseError);
  CHECK(message_of([&] { decode_container(bytes.substr(0, bytes.size() - 1), "f"); }).find("truncated") !=
        std::string::npos);
}

TEST_CASE("checkpoint round trip is bit identical") {
  TempDir dir;
  std::mt19937_64 rng(7);
  auto params = init_params<float>(tiny(), rng);
  params.best_epoch = 12;
  save_checkpoint(params, dir / "m.chk");
  auto loaded = load_checkpoint(dir / "m.chk");
  CHECK(loaded.best_epoch == 12);
  CHECK(nlohmann::json(loaded.config) == nlohmann::json(params.config));
  nn::visit([](std::string_view name, const Matrix<float>& a, const Matrix<float>& b) {
    INFO(name);
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0);
  }, params.layers, loaded.layers);

  for (int i = 0; i < 100; ++i) {
    Matrix<float> x = churn::testing::gaussian(5, 6, rng).cast<float>();
    auto a = forward(x, params), b = forward(x, loaded);
    CHECK(std::memcmp(a.probs.data(), b.probs.data(), sizeof(a.probs)) == 0);
  }
}

TEST_CASE("checkpoint shape and dimension errors") {
  TempDir dir;
  std::mt19937_64 rng(7);
  auto params = init_params<float>(tiny(), rng);

  Container c;
  c.kind = "model";
  ModelConfig other = tiny();
  other.filters = 5;
  c.meta = {{"config", other}, {"best_epoch", 1}};
  nn::visit([&c](std::string_view name, const Matrix<float>& m) { c.add_matrix(std::string(name), m); },
            params.layers);
  write_container(c, dir / "bad.chk");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.chk"), DimensionError);

  c.kind = "alignment";
  c.meta = {{"config", tiny()}};
  write_container(c, dir / "kind.chk");
  CHECK_THROWS_AS(load_checkpoint(dir / "kind.chk"), ParseError);
  CHECK_THROWS(load_checkpoint(dir / "missing.chk"));

  EmbeddingSpace space;
  space.add(WordEmbeddings("en", {"a"}, RowMatrix<float>::Ones(1, 4)));
  auto msg = message_of([&] { Classifier(params, space, BrandLexicon{}); });
  CHECK(msg.find("6") != std::string::npos);
  CHECK(msg.find("4") != std::string::npos);
  CHECK_THROWS_AS(Classifier(params, space, BrandLexicon{}), DimensionError);
}
