#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/corpus.hpp"
#include "repsharp/generated_query.hpp"
#include "repsharp/lm.hpp"
#include "repsharp/refsel.hpp"

namespace repsharp {

/// Style exemplars shared by every prompt of a dataset.
struct PromptBundle {
  std::vector<std::string> exemplar_queries;  // exactly 5
  /// What the LM is asked to write; "counter-argument passage" for
  /// argument-retrieval corpora.
  std::string artifact_noun = "query";

  void validate() const;
  std::string artifact_noun_plural() const;
};

/// Prompt asking for queries relevant to `doc` but not to `reference`.
std::string build_contrastive_prompt(const Document& doc, const Document& reference, const PromptBundle& bundle);

/// The contrastive prompt with the second document and the contrast
/// instruction removed.
std::string build_simple_prompt(const Document& doc, const PromptBundle& bundle);

struct PlannedQuery {
  std::string plan;
  std::string query;

  bool operator==(const PlannedQuery&) const = default;
};

struct ParsedGeneration {
  std::vector<PlannedQuery> items;
  /// Set when the output contained no usable <QUERY> span.
  bool no_queries = false;
};

/// Extracts <QUERY>...</QUERY> spans, each paired with the nearest preceding
/// <PLAN>...</PLAN>. Whitespace-normalizes, drops empties, keeps the first of
/// exact duplicates. Never throws on malformed output.
ParsedGeneration parse_generation(std::string_view raw);

struct GenerationOptions {
  /// Optional cap on queries kept per LM call.
  std::optional<std::size_t> per_call_cap;
};

struct GenerationResult {
  std::vector<GeneratedQuery> queries;
  std::vector<Warning> warnings;
};

/// One LM call per reference; queries are concatenated in reference order,
/// cross-reference duplicates dropped, ordinals assigned from 0. LM failures
/// become warnings. Throws UnknownDocument for unresolvable references.
GenerationResult generate_contrastive(const Document& doc, const ReferenceSet& refs, const Corpus& corpus,
                                      const LanguageModel& lm, const PromptBundle& bundle,
                                      std::size_t parallelism = 4, const GenerationOptions& opts = {});

/// One LM call on the single-document prompt. Throws EmptyText, LMUnavailable.
GenerationResult generate_simple(const Document& doc, const LanguageModel& lm, const PromptBundle& bundle,
                                 const GenerationOptions& opts = {});

}  // namespace repsharp
