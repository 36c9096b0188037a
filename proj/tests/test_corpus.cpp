#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "factcheck/corpus.hpp"

using namespace factcheck;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / ("factcheck_corpus_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("taxonomies have the fixed label sets") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  REQUIRE(rawfc.size() == 3);
  CHECK(rawfc.labels()[0].canonical_name == "true");
  CHECK(rawfc.labels()[1].canonical_name == "half-true");
  CHECK(rawfc.labels()[2].canonical_name == "false");

  const VeracityTaxonomy& liar = taxonomy_of("liar");
  REQUIRE(liar.size() == 6);
  CHECK(liar.labels()[5].canonical_name == "pants-fire");
  for (std::size_t i = 0; i < liar.size(); ++i) CHECK(liar.labels()[i].ordinal == (int)i);

  CHECK_THROWS(taxonomy_of("snopes"));
  // Repeated calls return equal values.
  CHECK(&taxonomy_of("liar") == &taxonomy_of("liar"));
}

TEST_CASE("verbalization lists are nonempty and pairwise disjoint") {
  for (const char* name : {"rawfc", "liar"}) {
    const VeracityTaxonomy& t = taxonomy_of(name);
    std::set<std::string> seen;
    for (const VeracityLabel& l : t.labels()) {
      const auto& verbs = t.verbalizations(l);
      REQUIRE(!verbs.empty());
      for (const std::string& v : verbs) {
        CHECK(seen.insert(v).second);  // disjoint across labels
      }
    }
  }
}

TEST_CASE("label aliases normalize to canonical names") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  CHECK(liar.normalize("pants-on-fire")->canonical_name == "pants-fire");
  CHECK(liar.normalize("pants on fire")->canonical_name == "pants-fire");
  CHECK(liar.normalize("Pants-Fire")->canonical_name == "pants-fire");
  CHECK(liar.normalize("half true")->canonical_name == "half-true");
  CHECK(!liar.normalize("mostly-false").has_value());

  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  CHECK(rawfc.normalize("half")->canonical_name == "half-true");
}

TEST_CASE("load_liar parses a 3-row file with default column map") {
  fs::path dir = temp_dir();
  fs::path file = dir / "mini.tsv";
  write(file,
        "id1\ttrue\tThe sky is blue.\tcat\tAlice\n"
        "id2\tfalse\tThe moon is cheese.\tcat\tBob\n"
        "id3\tpants-fire\tDragons run the senate.\tcat\tCarol\n");
  DatasetSplit split = load_liar(file.string());
  REQUIRE(split.train.size() == 3);
  CHECK(split.validation.empty());
  CHECK(split.test.empty());
  CHECK(split.train[0].label.ordinal == 0);
  CHECK(split.train[1].label.ordinal == 4);
  CHECK(split.train[2].label.ordinal == 5);
  CHECK(split.train[0].speaker == "Alice");
  CHECK(split.train[2].label.canonical_name == "pants-fire");
  fs::remove_all(dir);
}

TEST_CASE("load_liar edge cases") {
  fs::path dir = temp_dir();

  SUBCASE("empty file gives three empty partitions") {
    write(dir / "empty.tsv", "");
    DatasetSplit split = load_liar((dir / "empty.tsv").string());
    CHECK(split.total() == 0);
  }
  SUBCASE("missing file") { CHECK_THROWS(load_liar((dir / "nope.tsv").string())); }
  SUBCASE("unknown label reports value and line number") {
    write(dir / "bad.tsv", "id1\ttrue\tok\n" "id2\tbogus\talso ok\n");
    try {
      load_liar((dir / "bad.tsv").string());
      FAIL("expected throw");
    } catch (const std::exception& e) {
      std::string msg = e.what();
      CHECK(msg.find("bogus") != std::string::npos);
      CHECK(msg.find(":2") != std::string::npos);
    }
  }
  SUBCASE("wrong column count reports line number") {
    write(dir / "short.tsv", "id1-only-one-column\n");
    try {
      load_liar((dir / "short.tsv").string());
      FAIL("expected throw");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
  }
  SUBCASE("directory layout with official partition names") {
    fs::create_directories(dir / "liar");
    write(dir / "liar" / "train.tsv", "t1\ttrue\ta claim\n");
    write(dir / "liar" / "valid.tsv", "v1\tfalse\tanother claim\n");
    write(dir / "liar" / "test.tsv", "s1\thalf-true\tthird claim\n");
    DatasetSplit split = load_liar((dir / "liar").string());
    CHECK(split.train.size() == 1);
    CHECK(split.validation.size() == 1);
    CHECK(split.test.size() == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("load_rawfc") {
  fs::path dir = temp_dir();

  SUBCASE("alias label \"half\" becomes half-true") {
    write(dir / "claims.jsonl",
          R"({"id":"r1","text":"Something happened.","label":"half","date":"2020-05-01"})" "\n");
    DatasetSplit split = load_rawfc((dir / "claims.jsonl").string());
    REQUIRE(split.train.size() == 1);
    CHECK(split.train[0].label.canonical_name == "half-true");
    CHECK(split.train[0].claim_date == "2020-05-01");
  }
  SUBCASE("record missing text names the field") {
    write(dir / "claims.jsonl", R"({"id":"r1","label":"true"})" "\n");
    try {
      load_rawfc((dir / "claims.jsonl").string());
      FAIL("expected throw");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("text") != std::string::npos);
    }
  }
  SUBCASE("directory of per-claim records with partitions") {
    fs::create_directories(dir / "corpus" / "train");
    fs::create_directories(dir / "corpus" / "test");
    write(dir / "corpus" / "train" / "a.json", R"({"id":"a","text":"claim a","label":"true"})");
    write(dir / "corpus" / "test" / "b.json", R"({"id":"b","text":"claim b","label":"false"})");
    DatasetSplit split = load_rawfc((dir / "corpus").string());
    CHECK(split.train.size() == 1);
    CHECK(split.test.size() == 1);
  }
  SUBCASE("duplicate ids across partitions rejected") {
    fs::create_directories(dir / "dup");
    write(dir / "dup" / "train.jsonl", R"({"id":"x","text":"claim","label":"true"})" "\n");
    write(dir / "dup" / "test.jsonl", R"({"id":"x","text":"claim","label":"false"})" "\n");
    CHECK_THROWS(load_rawfc((dir / "dup").string()));
  }
  fs::remove_all(dir);
}

TEST_CASE("normalized round trip is a fixed point") {
  fs::path dir = temp_dir();
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  DatasetSplit split;
  Claim a{"c1", "First claim text", liar.require("true"), "2019-01-02", "Alice", "liar",
          {{"party", "none"}}};
  Claim b{"c2", "Second claim text", liar.require("pants-fire"), std::nullopt, std::nullopt,
          "liar", {}};
  split.train = {a};
  split.test = {b};

  fs::path f1 = dir / "norm1.jsonl", f2 = dir / "norm2.jsonl";
  save_normalized(split, "liar", f1.string());
  DatasetSplit loaded = load_normalized(f1.string(), "liar");
  CHECK(loaded == split);
  save_normalized(loaded, "liar", f2.string());
  CHECK(read_file(f1.string()) == read_file(f2.string()));
  fs::remove_all(dir);
}

TEST_CASE("split_stats") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  SUBCASE("empty split gives zero counts") {
    auto stats = split_stats(DatasetSplit{});
    for (const auto& [part, labels] : stats) CHECK(labels.empty());
  }
  SUBCASE("counts match a hand tally and sum to partition sizes") {
    DatasetSplit split;
    split.train = {{"1", "t", rawfc.require("true"), {}, {}, "rawfc", {}},
                   {"2", "t", rawfc.require("true"), {}, {}, "rawfc", {}},
                   {"3", "t", rawfc.require("false"), {}, {}, "rawfc", {}}};
    auto stats = split_stats(split);
    CHECK(stats["train"]["true"] == 2);
    CHECK(stats["train"]["false"] == 1);
    std::size_t total = 0;
    for (const auto& [label, n] : stats["train"]) total += n;
    CHECK(total == split.train.size());
  }
}
