#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "protocolnet/corpus.hpp"
#include "protocolnet/error.hpp"

using namespace protocolnet;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

std::vector<Order> make_orders(const std::map<std::string, int>& counts) {
  std::vector<Order> orders;
  int id = 0;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) orders.push_back({"o" + std::to_string(id++), "text", "", label});
  }
  return orders;
}

}  // namespace

TEST_CASE("build_vocabulary") {
  SUBCASE("single order") {
    const auto vocab = build_vocabulary({{"1", "knee pain", "tear", "p"}});
    CHECK(vocab.indication_tokens == std::vector<std::string>{"knee", "pain"});
    CHECK(vocab.diagnosis_tokens == std::vector<std::string>{"tear"});
  }
  SUBCASE("duplicates collapse") {
    const Order o{"1", "Pain in knee", "tear", "p"};
    CHECK(build_vocabulary({o, o, o}) == build_vocabulary({o}));
  }
  SUBCASE("empty diagnosis") { CHECK(build_vocabulary({{"1", "knee", "", "p"}}).diagnosis_tokens.empty()); }
  SUBCASE("sorted regardless of input order") {
    const std::vector<Order> a = {{"1", "zeta alpha", "", "p"}, {"2", "mid", "", "p"}};
    const std::vector<Order> b = {a[1], a[0]};
    CHECK(build_vocabulary(a) == build_vocabulary(b));
    CHECK(build_vocabulary(a).indication_tokens == std::vector<std::string>{"alpha", "mid", "zeta"});
  }
  SUBCASE("empty training set") {
    CHECK_THROWS_AS(build_vocabulary({}), Error);
    try {
      build_vocabulary({});
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyTrainingSet);
    }
  }
}

TEST_CASE("encode_order") {
  const auto vocab = build_vocabulary({{"1", "knee pain", "tear", "p"}});
  SUBCASE("OOV only") {
    const auto fv = encode_order({"2", "brain", "headache", "p"}, vocab);
    CHECK(fv.dimension == 3);
    CHECK(fv.active.empty());
  }
  SUBCASE("presence ignores repetition") {
    const auto fv = encode_order({"2", "knee knee pain", "", "p"}, vocab);
    CHECK(fv.active == std::vector<std::uint32_t>{0, 1});
    CHECK(fv.dense<float>() == Eigen::RowVector3f(1, 1, 0));
  }
  SUBCASE("fields are independent channels") {
    const auto fv = encode_order({"2", "", "knee", "p"}, vocab);
    CHECK(fv.active.empty());
  }
  SUBCASE("echo lists dropped tokens") {
    EncodingEcho echo;
    encode_order({"2", "knee zzz", "tear qqq tear", "p"}, vocab, StopwordList::english(), &echo);
    CHECK(echo.indication_dropped == std::vector<std::string>{"zzz"});
    CHECK(echo.diagnosis_dropped == std::vector<std::string>{"qqq"});
  }
}

TEST_CASE("training set encodes with zero OOV and fixed length") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"knee", "pain", "mri", "brain", "tumor", "l4", "rule", "out", "the"};
  std::vector<Order> orders;
  for (int i = 0; i < 200; ++i) {
    std::string ind, dia;
    for (int w = 0; w < 5; ++w) ind += words[rng() % words.size()] + " ";
    for (int w = 0; w < 2; ++w) dia += words[rng() % words.size()] + ",";
    orders.push_back({std::to_string(i), ind, dia, "p"});
  }
  const auto vocab = build_vocabulary(orders);
  for (const auto& o : orders) {
    EncodingEcho echo;
    const auto fv = encode_order(o, vocab, StopwordList::english(), &echo);
    CHECK(fv.dimension == vocab.dimension());
    CHECK(echo.indication_dropped.empty());
    CHECK(echo.diagnosis_dropped.empty());
    CHECK(std::is_sorted(fv.active.begin(), fv.active.end()));
  }
}

TEST_CASE("stratified_split") {
  SUBCASE("exact divisibility") {
    const auto split = stratified_split(make_orders({{"a", 10}, {"b", 10}}), 0.7, 1);
    std::map<std::string, int> train, test;
    for (const auto& o : split.train) train[o.protocol]++;
    for (const auto& o : split.test) test[o.protocol]++;
    CHECK(train["a"] == 7);
    CHECK(train["b"] == 7);
    CHECK(test["a"] == 3);
    CHECK(test["b"] == 3);
  }
  SUBCASE("singleton always lands in train") {
    const auto orders = make_orders({{"a", 5}, {"single", 1}});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto split = stratified_split(orders, 0.7, seed);
      const bool in_train = std::any_of(split.train.begin(), split.train.end(),
                                        [](const Order& o) { return o.protocol == "single"; });
      REQUIRE(in_train);
    }
  }
  SUBCASE("deterministic in seed") {
    const auto orders = make_orders({{"a", 13}, {"b", 7}, {"c", 2}});
    const auto s1 = stratified_split(orders, 0.7, 42);
    const auto s2 = stratified_split(orders, 0.7, 42);
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);
    CHECK(stratified_split(orders, 0.7, 43).train != s1.train);
  }
  SUBCASE("empty dataset") { CHECK_THROWS_AS(stratified_split({}, 0.7, 0), Error); }
}

TEST_CASE("stratified_split properties over random class sizes") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, int> counts;
    const int n_classes = 1 + static_cast<int>(rng() % 8);
    for (int c = 0; c < n_classes; ++c) counts["c" + std::to_string(c)] = 1 + static_cast<int>(rng() % 40);
    const auto orders = make_orders(counts);
    const auto split = stratified_split(orders, 0.7, rng());

    std::map<std::string, int> train;
    std::set<std::string> ids;
    for (const auto& o : split.train) {
      train[o.protocol]++;
      ids.insert(o.id);
    }
    for (const auto& o : split.test) CHECK(ids.insert(o.id).second);  // disjoint
    CHECK(ids.size() == orders.size());                                // union is everything
    for (const auto& [label, n] : counts) {
      if (n == 1) {
        CHECK(train[label] == 1);
      } else {
        CHECK(std::abs(static_cast<double>(train[label]) / n - 0.7) <= 1.0 / n);
      }
    }
  }
}

TEST_CASE("load_orders") {
  SUBCASE("well-formed") {
    const auto path = write_temp("orders_ok.csv",
                                 "id,indication,diagnosis,protocol\n"
                                 "1,knee pain,tear,MRI knee\n"
                                 "2,\"headache, chronic\",,MRI brain\r\n"
                                 "3,\"multi\nline \"\"quoted\"\"\",x,MRI brain\n");
    const auto orders = load_orders(path);
    REQUIRE(orders.size() == 3);
    CHECK(orders[1].indication == "headache, chronic");
    CHECK(orders[1].diagnosis.empty());
    CHECK(orders[2].indication == "multi\nline \"quoted\"");
    CHECK(orders[2].protocol == "MRI brain");
  }
  SUBCASE("missing protocol column value") {
    const auto path = write_temp("orders_short.csv", "id,indication,diagnosis,protocol\n1,knee,tear\n");
    try {
      load_orders(path);
      FAIL("expected MalformedRow");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MalformedRow);
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("missing column in header") {
    const auto path = write_temp("orders_header.csv", "id,indication,protocol\n1,knee,p\n");
    try {
      load_orders(path);
      FAIL("expected MissingColumn");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingColumn);
    }
  }
}

TEST_CASE("orders round-trip through CSV") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab ,\"\n\r;-x";
  std::vector<Order> orders;
  for (int i = 0; i < 100; ++i) {
    auto text = [&] {
      std::string s;
      for (int j = 0, n = static_cast<int>(rng() % 20); j < n; ++j) s.push_back(alphabet[rng() % alphabet.size()]);
      return s;
    };
    orders.push_back({"id" + std::to_string(i), text(), text(), "proto " + std::to_string(rng() % 4)});
  }
  const auto path = std::filesystem::temp_directory_path() / "orders_roundtrip.csv";
  write_orders(path, orders);
  CHECK(load_orders(path) == orders);
}
