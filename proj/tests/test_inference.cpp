#include <doctest.h>
#include <unistd.h>

#include <filesystem>

#include "factcheck/inference.hpp"

using namespace factcheck;
namespace fs = std::filesystem;

namespace {

Claim make_claim(std::string id, std::string text, const char* dataset = "rawfc") {
  Claim c;
  c.id = std::move(id);
  c.text = std::move(text);
  c.label = taxonomy_of(dataset).require("true");
  c.dataset = dataset;
  return c;
}

EvidenceBundle empty_bundle(const std::string& claim_id) {
  EvidenceBundle b;
  b.claim_id = claim_id;
  return b;
}

}  // namespace

TEST_CASE("normalize_for_parse") {
  CHECK(normalize_for_parse("  Half-True!  ") == "half true");
  CHECK(normalize_for_parse("TRUE.") == "true");
  CHECK(normalize_for_parse("Pants, on; FIRE?!") == "pants on fire");
  CHECK(normalize_for_parse("") == "");
  CHECK(normalize_for_parse("...") == "");
}

TEST_CASE("parse_verdict exact matches") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  for (const VeracityLabel& label : liar.labels()) {
    for (const std::string& verb : liar.verbalizations(label)) {
      Verdict v = parse_verdict(verb, liar);
      CHECK(v.status == ParseStatus::Exact);
      REQUIRE(v.label.has_value());
      CHECK(v.label->canonical_name == label.canonical_name);
      // Case and punctuation noise still parse exactly.
      Verdict noisy = parse_verdict("  " + to_lower(verb) + ". ", liar);
      CHECK(noisy.status == ParseStatus::Exact);
      CHECK(noisy.label->canonical_name == label.canonical_name);
    }
  }
}

TEST_CASE("parse_verdict fuzzy longest word-bounded match") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");

  SUBCASE("longer verbalization beats its substring") {
    Verdict v = parse_verdict("I think the claim is mostly true overall.", liar);
    CHECK(v.status == ParseStatus::Fuzzy);
    CHECK(v.label->canonical_name == "mostly-true");
  }
  SUBCASE("longer match wins regardless of position") {
    // "false" (5 chars) appears after "true" (4) but wins on length.
    Verdict v = parse_verdict("Not true, in fact false.", liar);
    CHECK(v.label->canonical_name == "false");
  }
  SUBCASE("equal lengths tie to the earliest position") {
    // "barely true" and "mostly true" normalize to the same length; the
    // earlier occurrence wins.
    Verdict v = parse_verdict("somewhere between barely true and mostly true", liar);
    CHECK(v.label->canonical_name == "barely-true");
    Verdict v2 = parse_verdict("somewhere between mostly true and barely true", liar);
    CHECK(v2.label->canonical_name == "mostly-true");
  }
  SUBCASE("word boundaries are required") {
    Verdict v = parse_verdict("construed statement", liar);  // "true" inside "construed"
    CHECK(v.status == ParseStatus::Unparsed);
    CHECK(!v.label.has_value());
  }
  SUBCASE("untrue maps to false") {
    Verdict v = parse_verdict("That is untrue.", liar);
    CHECK(v.label->canonical_name == "false");
  }
  SUBCASE("pants on fire spelled out") {
    Verdict v = parse_verdict("Rating: pants on fire, obviously", liar);
    CHECK(v.label->canonical_name == "pants-fire");
  }
  SUBCASE("gibberish is unparsed, never throws") {
    for (const char* s : {"", "???", "the evidence is inconclusive", "claim claim claim"}) {
      Verdict v = parse_verdict(s, liar);
      CHECK(v.status == ParseStatus::Unparsed);
      CHECK(!v.label.has_value());
      CHECK(v.raw_text == s);
    }
  }
}

TEST_CASE("parse_verdict untrue outranks true by length") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  // "untrue" (6 chars) appears after "true" (4) but wins on length.
  Verdict v = parse_verdict("true but really untrue", liar);
  CHECK(v.label->canonical_name == "false");
}

TEST_CASE("rule mock backend answers by claim id") {
  RuleMockBackend backend(std::map<std::string, std::string>{{"c1", "true"}, {"c2", "half-true"}});
  CHECK(backend.generate({"prompt", "c1"}, {}) == "true");
  CHECK(backend.generate({"prompt", "c2"}, {}) == "half-true");
  CHECK_THROWS(backend.generate({"prompt", "c3"}, {}));

  fs::path dir = fs::temp_directory_path() / ("factcheck_inf_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_file((dir / "answers.json").string(), R"({"x": "false"})");
  RuleMockBackend loaded = RuleMockBackend::from_file((dir / "answers.json").string());
  CHECK(loaded.generate({"p", "x"}, {}) == "false");
  fs::remove_all(dir);
}

TEST_CASE("prompt hash mock backend is deterministic in the prompt") {
  PromptHashMockBackend backend({}, {"true", "half-true", "false"});
  std::string a = backend.generate({"prompt A", "c1"}, {});
  CHECK(backend.generate({"prompt A", "c9"}, {}) == a);  // claim id irrelevant
  // Explicit lookup overrides the pool.
  PromptHashMockBackend pinned({{sha256_hex("prompt A"), "pants-fire"}}, {"true"});
  CHECK(pinned.generate({"prompt A", "c1"}, {}) == "pants-fire");
}

TEST_CASE("predict applies stop sequences for parsing but keeps raw text verbatim") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  PromptTemplate tmpl = PromptTemplate::defaults_for(rawfc);
  Claim claim = make_claim("c1", "A claim.");
  RuleMockBackend backend(
      std::map<std::string, std::string>{{"c1", "false\nActually let me reconsider: true"}});
  Verdict v = predict(claim, empty_bundle("c1"), tmpl, backend, DecodeParams{}, rawfc);
  CHECK(v.claim_id == "c1");
  CHECK(v.label->canonical_name == "false");  // text after "\n" ignored
  CHECK(v.raw_text == "false\nActually let me reconsider: true");
}

TEST_CASE("predict_batch") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  PromptTemplate tmpl = PromptTemplate::defaults_for(rawfc);
  std::vector<Claim> claims;
  std::map<std::string, EvidenceBundle> bundles;
  std::map<std::string, std::string> answers;
  for (int i = 0; i < 12; ++i) {
    std::string id = "c" + std::to_string(i);
    claims.push_back(make_claim(id, "Claim " + std::to_string(i)));
    bundles[id] = empty_bundle(id);
    answers[id] = i % 2 ? "true" : "false";
  }

  SUBCASE("order matches input under concurrency") {
    RuleMockBackend backend(answers);
    auto verdicts = predict_batch(claims, bundles, tmpl, backend, {}, rawfc, {false, 8});
    REQUIRE(verdicts.size() == claims.size());
    for (std::size_t i = 0; i < claims.size(); ++i) {
      CHECK(verdicts[i].claim_id == claims[i].id);
      CHECK(verdicts[i].label->canonical_name == (i % 2 ? "true" : "false"));
    }
  }
  SUBCASE("failures become unparsed verdicts with a note") {
    answers.erase("c5");
    RuleMockBackend backend(answers);
    auto verdicts = predict_batch(claims, bundles, tmpl, backend, {}, rawfc);
    CHECK(verdicts[5].status == ParseStatus::Unparsed);
    CHECK(verdicts[5].claim_id == "c5");
    CHECK(verdicts[5].note.find("c5") != std::string::npos);
    CHECK(verdicts[4].status != ParseStatus::Unparsed);
  }
  SUBCASE("fail_fast rethrows") {
    answers.erase("c5");
    RuleMockBackend backend(answers);
    CHECK_THROWS(predict_batch(claims, bundles, tmpl, backend, {}, rawfc, {true, 2}));
  }
  SUBCASE("missing bundle is a per-claim failure") {
    bundles.erase("c3");
    RuleMockBackend backend(answers);
    auto verdicts = predict_batch(claims, bundles, tmpl, backend, {}, rawfc);
    CHECK(verdicts[3].status == ParseStatus::Unparsed);
    CHECK(verdicts[3].note.find("bundle") != std::string::npos);
  }
}

TEST_CASE("verdict json round trip and consistency check") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  fs::path dir = fs::temp_directory_path() / ("factcheck_vjson_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  std::vector<Verdict> verdicts;
  Verdict parsed;
  parsed.claim_id = "c1";
  parsed.raw_text = "mostly true";
  parsed.label = liar.require("mostly-true");
  parsed.status = ParseStatus::Exact;
  Verdict unparsed;
  unparsed.claim_id = "c2";
  unparsed.raw_text = "no idea";
  unparsed.status = ParseStatus::Unparsed;
  unparsed.note = "backend timeout";
  verdicts = {parsed, unparsed};

  fs::path path = dir / "verdicts.jsonl";
  save_verdicts(verdicts, path.string());
  auto loaded = load_verdicts(path.string(), liar);
  CHECK(loaded == verdicts);

  // A record claiming a parsed status without a label is rejected.
  json bad = {{"claim_id", "c3"}, {"raw_text", "x"}, {"parse_status", "exact"}};
  CHECK_THROWS(verdict_from_json(bad, liar));
  json bad2 = {{"claim_id", "c4"}, {"raw_text", "x"}, {"parse_status", "unparsed"}, {"label", "true"}};
  CHECK_THROWS(verdict_from_json(bad2, liar));
  fs::remove_all(dir);
}
