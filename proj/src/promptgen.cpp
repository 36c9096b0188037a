#include "factcheck/promptgen.hpp"

#include <sstream>
#include <stdexcept>

namespace factcheck {

PromptTemplate PromptTemplate::defaults_for(const VeracityTaxonomy& taxonomy) {
  PromptTemplate t;
  std::string label_list;
  for (std::size_t i = 0; i < taxonomy.labels().size(); ++i) {
    if (i > 0) label_list += i + 1 == taxonomy.labels().size() ? ", or " : ", ";
    label_list += taxonomy.labels()[i].canonical_name;
  }
  t.instruction_text =
      "Determine whether the claim is true based on the evidence provided. "
      "Answer with exactly one of: " + label_list + ".";
  return t;
}

std::string sanitize_against_markers(std::string text, const PromptTemplate& tmpl) {
  auto defanged = [](const std::string& marker) {
    std::string out;
    for (char c : marker)
      if (c != '#') out.push_back(c);
    return out;
  };
  for (const std::string& m : tmpl.section_markers) text = replace_all(std::move(text), m, defanged(m));
  text = replace_all(std::move(text), tmpl.response_marker, defanged(tmpl.response_marker));
  return text;
}

namespace {

struct PromptParts {
  std::string evidence_section;  // snippet lines only, no marker
  int evidence_count_used = 0;
};

std::string render(const PromptTemplate& t, const std::string& instruction,
                   const std::string& evidence, const std::string& claim_text) {
  return t.section_markers[0] + "\n" + instruction + "\n\n" + t.section_markers[1] + "\n" +
         evidence + "\n\n" + t.section_markers[2] + "\n" + claim_text + "\n\n" +
         t.response_marker + "\n";
}

PromptParts select_evidence(const Claim& claim, const EvidenceBundle& bundle,
                            const PromptTemplate& tmpl) {
  std::string instruction = sanitize_against_markers(tmpl.instruction_text, tmpl);
  std::string claim_text = sanitize_against_markers(claim.text, tmpl);

  std::size_t base_len = render(tmpl, instruction, "", claim_text).size();
  if (base_len > tmpl.char_budget)
    throw std::runtime_error("claim " + claim.id + ": prompt exceeds char budget (" +
                             std::to_string(base_len) + " > " + std::to_string(tmpl.char_budget) +
                             ") with no evidence");

  PromptParts parts;
  std::size_t len = base_len;
  int limit = std::min<int>(tmpl.top_k_evidence, static_cast<int>(bundle.snippets.size()));
  for (int k = 0; k < limit; ++k) {
    const RawSearchResult& r = bundle.snippets[k];
    std::string entry = sanitize_against_markers(r.title + ": " + r.snippet, tmpl);
    std::size_t added = entry.size() + (k > 0 ? tmpl.evidence_separator.size() : 0);
    if (len + added > tmpl.char_budget) break;
    if (k > 0) parts.evidence_section += tmpl.evidence_separator;
    parts.evidence_section += entry;
    len += added;
    ++parts.evidence_count_used;
  }
  return parts;
}

}  // namespace

AssembledPrompt assemble_prompt(const Claim& claim, const EvidenceBundle& bundle,
                                const PromptTemplate& tmpl) {
  if (bundle.claim_id != claim.id)
    throw std::runtime_error("bundle claim_id " + bundle.claim_id + " does not match claim " +
                             claim.id);
  PromptParts parts = select_evidence(claim, bundle, tmpl);
  AssembledPrompt out;
  out.text = render(tmpl, sanitize_against_markers(tmpl.instruction_text, tmpl),
                    parts.evidence_section, sanitize_against_markers(claim.text, tmpl));
  out.evidence_count_used = parts.evidence_count_used;
  return out;
}

std::string evidence_input_sections(const Claim& claim, const EvidenceBundle& bundle,
                                    const PromptTemplate& tmpl) {
  PromptParts parts = select_evidence(claim, bundle, tmpl);
  return tmpl.section_markers[1] + "\n" + parts.evidence_section + "\n\n" +
         tmpl.section_markers[2] + "\n" + sanitize_against_markers(claim.text, tmpl);
}

std::string verbalize_label(const VeracityLabel& label, const VeracityTaxonomy& taxonomy) {
  return taxonomy.verbalizations(label).front();
}

std::vector<TuningExample> build_training_set(const std::vector<Claim>& claims,
                                              const std::map<std::string, EvidenceBundle>& bundles,
                                              const PromptTemplate& tmpl) {
  std::vector<TuningExample> out;
  out.reserve(claims.size());
  for (const Claim& claim : claims) {
    auto it = bundles.find(claim.id);
    if (it == bundles.end())
      throw std::runtime_error("no evidence bundle for claim " + claim.id);
    AssembledPrompt p = assemble_prompt(claim, it->second, tmpl);
    const VeracityTaxonomy& taxonomy = taxonomy_of(claim.dataset);
    out.push_back({claim.id, p.text, verbalize_label(claim.label, taxonomy), claim.label,
                   p.evidence_count_used});
  }
  return out;
}

void export_training_set(const std::vector<TuningExample>& examples,
                         const std::vector<Claim>& claims,
                         const std::map<std::string, EvidenceBundle>& bundles,
                         const PromptTemplate& tmpl, const std::string& path,
                         const ExportMeta& meta) {
  std::map<std::string, const Claim*> by_id;
  for (const Claim& c : claims) by_id[c.id] = &c;

  std::vector<json> records;
  records.reserve(examples.size());
  for (const TuningExample& e : examples) {
    auto cit = by_id.find(e.claim_id);
    if (cit == by_id.end()) throw std::runtime_error("no claim for example " + e.claim_id);
    auto bit = bundles.find(e.claim_id);
    if (bit == bundles.end()) throw std::runtime_error("no bundle for example " + e.claim_id);
    json r;
    r["instruction"] = tmpl.instruction_text;
    r["input"] = evidence_input_sections(*cit->second, bit->second, tmpl);
    r["output"] = e.target;
    records.push_back(std::move(r));
  }
  write_jsonl(path, records);

  json sidecar;
  sidecar["template"] = template_to_json(tmpl);
  sidecar["hyperparameters"] = {{"epochs", meta.epochs},
                                {"batch_size", meta.batch_size},
                                {"learning_rate", meta.learning_rate},
                                {"lr_schedule", meta.lr_schedule},
                                {"dropout", meta.dropout}};
  sidecar["base_model"] = meta.base_model;
  sidecar["example_count"] = examples.size();
  write_file(path + ".meta.json", sidecar.dump(2) + "\n");
}

json template_to_json(const PromptTemplate& t) {
  json j;
  j["instruction"] = t.instruction_text;
  j["section_markers"] = {t.section_markers[0], t.section_markers[1], t.section_markers[2]};
  j["response_marker"] = t.response_marker;
  j["top_k_evidence"] = t.top_k_evidence;
  j["evidence_separator"] = t.evidence_separator;
  j["char_budget"] = t.char_budget;
  return j;
}

PromptTemplate template_from_json(const json& j) {
  PromptTemplate t;
  t.instruction_text = j.at("instruction").get<std::string>();
  if (j.contains("section_markers")) {
    const json& m = j.at("section_markers");
    if (m.size() != 3) throw std::runtime_error("template: section_markers must have 3 entries");
    for (int i = 0; i < 3; ++i) t.section_markers[i] = m[i].get<std::string>();
  }
  t.response_marker = j.value("response_marker", t.response_marker);
  t.top_k_evidence = j.value("top_k_evidence", t.top_k_evidence);
  t.evidence_separator = j.value("evidence_separator", t.evidence_separator);
  t.char_budget = j.value("char_budget", t.char_budget);
  return t;
}

json tuning_example_to_json(const TuningExample& e) {
  json j;
  j["claim_id"] = e.claim_id;
  j["prompt"] = e.prompt;
  j["target"] = e.target;
  j["label"] = e.label.canonical_name;
  j["evidence_count_used"] = e.evidence_count_used;
  return j;
}

TuningExample tuning_example_from_json(const json& j, const VeracityTaxonomy& taxonomy) {
  TuningExample e;
  e.claim_id = j.at("claim_id").get<std::string>();
  e.prompt = j.at("prompt").get<std::string>();
  e.target = j.at("target").get<std::string>();
  e.label = taxonomy.require(j.at("label").get<std::string>());
  e.evidence_count_used = j.at("evidence_count_used").get<int>();
  return e;
}

}  // namespace factcheck
