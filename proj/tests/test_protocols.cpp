#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "protocolnet/error.hpp"
#include "protocolnet/protocols.hpp"

using namespace protocolnet;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

Errc load_error(const std::string& text) {
  try {
    load_hierarchy(write_temp("hierarchy_err.csv", text));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::IoFailure;
}

ProtocolHierarchy spine() {
  return ProtocolHierarchy::from_rows({
      {"lumbar spine without contrast", "MRI lumbar spine", "MRI spine"},
      {"lumbar spine post-op", "MRI lumbar spine", "MRI spine"},
      {"cervical spine", "MRI cervical spine", "MRI spine"},
      {"knee left", "MRI knee", "MRI extremity"},
  });
}

}  // namespace

TEST_CASE("load_hierarchy") {
  SUBCASE("chain") {
    const auto h = load_hierarchy(write_temp("hierarchy_ok.csv", "local,acr,general\na,A,G\nb,B,H\nc,B,H\n"));
    CHECK(h.labels(Level::Local) == std::vector<std::string>{"a", "b", "c"});
    CHECK(h.labels(Level::Acr) == std::vector<std::string>{"A", "B"});
    CHECK(h.labels(Level::General) == std::vector<std::string>{"G", "H"});
  }
  SUBCASE("errors") {
    CHECK(load_error("local,acr,general\na,,G\n") == Errc::DanglingMapping);
    CHECK(load_error("local,acr,general\na,A,G\na,B,G\n") == Errc::DuplicateLabel);
    CHECK(load_error("local,acr,general\na,A,G\nb,A,H\n") == Errc::NonTotalMapping);
    CHECK(load_error("local,general\na,G\n") == Errc::MissingColumn);
  }
}

TEST_CASE("coarsen") {
  const auto h = spine();
  CHECK(coarsen(h, "knee left", Level::Local, Level::Local) == "knee left");
  // Two-step lookup done by hand.
  CHECK(coarsen(h, "lumbar spine without contrast", Level::Local, Level::Acr) == "MRI lumbar spine");
  CHECK(coarsen(h, "MRI lumbar spine", Level::Acr, Level::General) == "MRI spine");
  CHECK(coarsen(h, "lumbar spine without contrast", Level::Local, Level::General) == "MRI spine");

  try {
    coarsen(h, "MRI spine", Level::General, Level::Local);
    FAIL("expected LevelOrderViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LevelOrderViolation);
  }
  try {
    coarsen(h, "nope", Level::Local, Level::Acr);
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownLabel);
  }
}

TEST_CASE("relabel_dataset") {
  const auto h = spine();
  const std::vector<Order> orders = {{"1", "a", "b", "lumbar spine without contrast"},
                                     {"2", "c", "d", "lumbar spine post-op"},
                                     {"3", "e", "", "knee left"}};
  CHECK(relabel_dataset(orders, h, Level::Local) == orders);
  const auto acr = relabel_dataset(orders, h, Level::Acr);
  REQUIRE(acr.size() == orders.size());
  CHECK(acr[0].id == "1");
  CHECK(acr[0].indication == "a");
  CHECK(acr[0].protocol == "MRI lumbar spine");
  CHECK(distinct_protocols(acr).size() == 2);
  CHECK(distinct_protocols(orders).size() == 3);

  try {
    relabel_dataset({{"4", "", "", "unknown"}}, h, Level::Acr);
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownLabel);
  }
}

TEST_CASE("random hierarchies are total, surjective and composition-consistent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = random_hierarchy(200, 93, 48, seed);
    CHECK(h.labels(Level::Local).size() == 200);
    CHECK(h.labels(Level::Acr).size() == 93);
    CHECK(h.labels(Level::General).size() == 48);
    std::set<std::string> acr_images, general_images;
    for (const auto& local : h.labels(Level::Local)) {
      const auto acr = coarsen(h, local, Level::Local, Level::Acr);
      acr_images.insert(acr);
      general_images.insert(coarsen(h, acr, Level::Acr, Level::General));
      CHECK(coarsen(h, local, Level::Local, Level::General) == coarsen(h, acr, Level::Acr, Level::General));
    }
    CHECK(acr_images.size() == 93);
    CHECK(general_images.size() == 48);
  }
}

TEST_CASE("hierarchy CSV round-trip") {
  const auto h = random_hierarchy(30, 10, 4, 7);
  const auto path = std::filesystem::temp_directory_path() / "hierarchy_roundtrip.csv";
  write_hierarchy(path, h);
  CHECK(load_hierarchy(path).rows() == h.rows());
}

TEST_CASE("level names") {
  CHECK(parse_level("ACR") == Level::Acr);
  CHECK(level_name(Level::General) == "general");
  CHECK_THROWS_AS(parse_level("bogus"), Error);
}
