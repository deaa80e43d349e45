#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "keytap/errors.hpp"
#include "keytap/manifest.hpp"

using namespace keytap;

namespace {

std::vector<ManifestRecord> rows(std::size_t per_label) {
  std::vector<ManifestRecord> out;
  for (char k : std::string("abcd")) {
    for (std::size_t i = 0; i < per_label; ++i) {
      ManifestRecord r;
      r.key_label = std::string(1, k);
      r.path = "clips/" + r.key_label + "_" + std::to_string(i) + ".wav";
      r.meta.user = i % 2 ? "u1" : "u0";
      r.meta.device_model = "m0";
      r.meta.device_unit = "m0-u0";
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("manifest round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "keytap_test_manifest";
  std::filesystem::create_directories(dir);
  auto rs = rows(3);
  rs[0].onsets_s = {0.1, 0.6};
  rs[1].meta.typing_style = TypingStyle::kHuntAndPeck;
  rs[2].meta.channel = "voip-20";
  write_manifest(dir / "m.jsonl", rs);
  const auto back = read_manifest(dir / "m.jsonl");
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].path == rs[i].path);
    CHECK(back[i].key_label == rs[i].key_label);
    CHECK(back[i].meta.user == rs[i].meta.user);
    CHECK(back[i].meta.typing_style == rs[i].meta.typing_style);
    CHECK(back[i].meta.channel == rs[i].meta.channel);
    CHECK(back[i].onsets_s == rs[i].onsets_s);
  }

  SUBCASE("parse error reports the byte offset of the bad line") {
    std::ofstream(dir / "bad.jsonl") << to_json(rs[0]).dump() << "\n{not json\n";
    const auto good_len = to_json(rs[0]).dump().size() + 1;
    try {
      read_manifest(dir / "bad.jsonl");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset() >= good_len);
      CHECK(e.byte_offset() < good_len + 10);
    }
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(read_manifest(dir / "none.jsonl"), IoError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("selector") {
  SUBCASE("json round trip and unknown keys") {
    Selector s;
    s.user = "u1";
    s.split = Selector::PathSplit{4, 1, false};
    const auto back = selector_from_json(to_json(s));
    CHECK(back.user == s.user);
    REQUIRE(back.split);
    CHECK(back.split->k == 4);
    CHECK(back.split->index == 1);
    CHECK_FALSE(back.split->take_test);
    CHECK_THROWS_AS(selector_from_json({{"usr", "u1"}}), ContractError);
    CHECK_THROWS_AS(selector_from_json({{"split", {{"k", 1}}}}), ContractError);
    CHECK_THROWS_AS(selector_from_json({{"split", {{"k", 3}, {"index", 3}}}}), ContractError);
  }
  SUBCASE("field filter") {
    Selector s;
    s.user = "u1";
    for (const auto& r : select_records(rows(4), s)) CHECK(r.meta.user == "u1");
    CHECK(select_records(rows(4), s).size() == 8);
  }
  SUBCASE("stratified split: folds partition the rows and every label is held out") {
    const auto all = rows(10);
    std::multiset<std::string> seen;
    for (std::uint64_t i = 0; i < 5; ++i) {
      Selector test, train;
      test.split = Selector::PathSplit{5, i, true};
      train.split = Selector::PathSplit{5, i, false};
      const auto te = select_records(all, test), tr = select_records(all, train);
      CHECK(te.size() + tr.size() == all.size());
      std::map<std::string, int> per_label;
      for (const auto& r : te) per_label[r.key_label]++, seen.insert(r.path);
      CHECK(per_label.size() == 4);
      for (const auto& [label, n] : per_label) CHECK(n == 2);
      std::set<std::string> te_paths;
      for (const auto& r : te) te_paths.insert(r.path);
      for (const auto& r : tr) CHECK(te_paths.count(r.path) == 0);
    }
    CHECK(seen.size() == all.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == all.size());
  }
}
