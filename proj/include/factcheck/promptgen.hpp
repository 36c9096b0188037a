#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/evidence.hpp"

namespace factcheck {

struct PromptTemplate {
  std::string instruction_text;
  /// Delimiters for the instruction, evidence, and input sections, in order.
  std::array<std::string, 3> section_markers = {"### Instruction:", "### Evidence:", "### Input:"};
  std::string response_marker = "### Response:";
  int top_k_evidence = 5;
  std::string evidence_separator = "\n";
  std::size_t char_budget = 8000;

  /// Alpaca-style default whose instruction enumerates the taxonomy labels,
  /// which keeps verdict parsing well-posed.
  static PromptTemplate defaults_for(const VeracityTaxonomy& taxonomy);

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct AssembledPrompt {
  std::string text;
  int evidence_count_used = 0;
};

struct TuningExample {
  std::string claim_id;
  std::string prompt;
  std::string target;
  VeracityLabel label;
  int evidence_count_used = 0;

  friend bool operator==(const TuningExample&, const TuningExample&) = default;
};

/// Recommended fine-tuning hyperparameters written to the export sidecar.
struct ExportMeta {
  int epochs = 3;
  int batch_size = 32;
  double learning_rate = 1e-4;
  std::string lr_schedule = "linear-to-zero";
  double dropout = 0.05;
  std::string base_model = "llama-7b";
};

/// Strip marker strings that appear inside free text so each marker occurs
/// exactly once per prompt. A marker occurrence loses its '#' characters.
std::string sanitize_against_markers(std::string text, const PromptTemplate& tmpl);

/// Sections in order instruction -> evidence -> input -> response marker.
/// The evidence section holds the first k surviving snippets ("title: snippet"
/// joined by the separator) where k <= top_k_evidence is the largest count
/// that fits char_budget. Instruction and claim never truncate; throws when
/// the claim alone does not fit.
AssembledPrompt assemble_prompt(const Claim& claim, const EvidenceBundle& bundle,
                                const PromptTemplate& tmpl);

/// Evidence + input sections only (the non-instruction prompt body), as
/// exported in the training record's "input" field.
std::string evidence_input_sections(const Claim& claim, const EvidenceBundle& bundle,
                                    const PromptTemplate& tmpl);

std::string verbalize_label(const VeracityLabel& label, const VeracityTaxonomy& taxonomy);

std::vector<TuningExample> build_training_set(const std::vector<Claim>& claims,
                                              const std::map<std::string, EvidenceBundle>& bundles,
                                              const PromptTemplate& tmpl);

/// Record-per-line {instruction, input, output} plus a sidecar metadata file
/// at `path` + ".meta.json".
void export_training_set(const std::vector<TuningExample>& examples,
                         const std::vector<Claim>& claims,
                         const std::map<std::string, EvidenceBundle>& bundles,
                         const PromptTemplate& tmpl, const std::string& path,
                         const ExportMeta& meta = {});

json template_to_json(const PromptTemplate& tmpl);
PromptTemplate template_from_json(const json& j);

json tuning_example_to_json(const TuningExample& e);
TuningExample tuning_example_from_json(const json& j, const VeracityTaxonomy& taxonomy);

}  // namespace factcheck
