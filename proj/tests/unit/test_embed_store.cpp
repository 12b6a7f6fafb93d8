#include <fstream>
#include <random>

#include <doctest.h>

#include "cmsent/embed_store.hpp"
#include "cmsent/error.hpp"
#include "cmsent/log.hpp"
#include "tempdir.hpp"

using namespace cmsent;
using cmsent::testing::TempDir;

namespace {

std::filesystem::path write_file(const TempDir& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

EmbeddingSpace two_token_space() {
  RowMatrix m(2, 2);
  m << 1, 0, 0, 1;
  return EmbeddingSpace(Vocabulary({"a", "b"}), m, "ab");
}

}  // namespace

TEST_CASE("vocabulary is a bijection without duplicates") {
  Vocabulary v({"x", "y", "z"});
  CHECK(v.size() == 3);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(*v.find(v.token(i)) == i);
  CHECK_FALSE(v.add("y"));
  CHECK(v.add("w"));
  CHECK(*v.find("w") == 3);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), FormatError);
}

TEST_CASE("space rejects inconsistent rows and non-finite values") {
  RowMatrix m(1, 2);
  m << 1, 2;
  CHECK_THROWS_AS(EmbeddingSpace(Vocabulary({"a", "b"}), m), DimensionError);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EmbeddingSpace(Vocabulary({"a"}), m), DimensionError);
}

TEST_CASE("load the two-token file") {
  TempDir dir;
  const auto p = write_file(dir, "e.vec", "2 2\na 1 0\nb 0 1\n");
  const auto s = load_embeddings(p);
  CHECK(s.size() == 2);
  CHECK(s.dim() == 2);
  CHECK(*lookup(s, "a") == Vector::Unit(2, 0));
  CHECK(*lookup(s, "b") == Vector::Unit(2, 1));

  const auto first = load_embeddings(p, 1);
  CHECK(first.size() == 1);
  CHECK(first.vocab().contains("a"));
  CHECK_FALSE(first.vocab().contains("b"));
}

TEST_CASE("load errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_embeddings(write_file(dir, "arity.vec", "1 2\na 1 0 3\n")), FormatError);
  CHECK_THROWS_AS(load_embeddings(write_file(dir, "header.vec", "two 2\na 1 0\n")), FormatError);
  CHECK_THROWS_AS(load_embeddings(write_file(dir, "nan.vec", "1 2\na 1 nan\n")), FormatError);
  CHECK_THROWS_AS(load_embeddings(write_file(dir, "empty.vec", "0 2\n")), FormatError);
  CHECK_THROWS_AS(load_embeddings(dir / "missing.vec"), IoError);
}

TEST_CASE("duplicate tokens keep the first row and are counted") {
  TempDir dir;
  std::vector<std::string> warnings;
  set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  LoadReport report;
  const auto s = load_embeddings(write_file(dir, "dup.vec", "3 1\na 1\na 2\nb 3\n"), std::nullopt, &report);
  set_warning_sink(nullptr);
  CHECK(s.size() == 2);
  CHECK((*lookup(s, "a"))(0) == 1.0);
  CHECK(report.duplicates == 1);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("save and load round trip") {
  TempDir dir;
  const auto s = two_token_space();
  save_embeddings(s, dir / "s.vec");
  const auto t = load_embeddings(dir / "s.vec");
  CHECK(t.vocab().tokens() == s.vocab().tokens());
  CHECK(t.matrix() == s.matrix());

  RowMatrix m(1, 1);
  m << 0.1234567891;
  save_embeddings(EmbeddingSpace(Vocabulary({"v"}), m), dir / "v.vec");
  const double back = load_embeddings(dir / "v.vec").matrix()(0, 0);
  CHECK(std::abs(back - 0.1234567891) / 0.1234567891 <= 1e-6);

  CHECK_THROWS_AS(save_embeddings(EmbeddingSpace(), dir / "empty.vec"), Error);
}

TEST_CASE("round trip holds for random spaces") {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial, d = 1 + trial % 7;
    RowMatrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    std::vector<std::string> tokens;
    for (Eigen::Index i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(i) + (i % 2 ? "é" : ":)"));
    const EmbeddingSpace s(Vocabulary(tokens), m);
    save_embeddings(s, dir / "r.vec");
    const auto t = load_embeddings(dir / "r.vec");
    REQUIRE(t.vocab().tokens() == s.vocab().tokens());
    REQUIRE(((t.matrix() - s.matrix()).array().abs() <= 1e-6 * s.matrix().array().abs()).all());
  }
}

TEST_CASE("lookup is exact and case-sensitive") {
  RowMatrix m(1, 2);
  m << 1, 0;
  const EmbeddingSpace s(Vocabulary({"a"}), m);
  CHECK(lookup(s, "a").has_value());
  CHECK_FALSE(lookup(s, "z").has_value());
  CHECK_FALSE(lookup(s, "A").has_value());
  for (const auto& t : {"a", "b", "A", ""}) CHECK(lookup(s, t).has_value() == s.vocab().contains(t));
}

TEST_CASE("l2_normalize") {
  RowMatrix m(3, 2);
  m << 3, 4, 0, 0, 1, 0;
  const auto n = l2_normalize(EmbeddingSpace(Vocabulary({"a", "b", "c"}), m));
  CHECK(n.matrix()(0, 0) == doctest::Approx(0.6));
  CHECK(n.matrix()(0, 1) == doctest::Approx(0.8));
  CHECK(n.matrix().row(1).isZero(0.0));
  CHECK(n.matrix()(2, 0) == 1.0);
  CHECK(n.matrix()(2, 1) == 0.0);
}

TEST_CASE("l2_normalize is idempotent and yields unit rows") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 3.0);
  RowMatrix m(200, 17);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  std::vector<std::string> tokens;
  for (int i = 0; i < 200; ++i) tokens.push_back("w" + std::to_string(i));
  const auto once = l2_normalize(EmbeddingSpace(Vocabulary(tokens), m));
  const auto twice = l2_normalize(once);
  CHECK(once.matrix() == twice.matrix());
  CHECK(max_norm_deviation(once) <= 1e-12);
}
