#include "repsharp/querygen.hpp"

#include <unordered_set>

#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

void PromptBundle::validate() const {
  if (exemplar_queries.size() != 5) {
    throw Error(Errc::InvalidConfig,
                "prompt bundle needs exactly 5 exemplar queries, got " + std::to_string(exemplar_queries.size()));
  }
  if (trim(artifact_noun).empty()) throw Error(Errc::InvalidConfig, "artifact_noun is empty");
}

std::string PromptBundle::artifact_noun_plural() const {
  const std::string& n = artifact_noun;
  if (n.size() >= 2 && n.back() == 'y' && std::string_view("aeiou").find(n[n.size() - 2]) == std::string_view::npos) {
    return n.substr(0, n.size() - 1) + "ies";
  }
  return n + "s";
}

namespace {

std::string exemplar_block(const PromptBundle& bundle) {
  std::string out = "Here are some examples of " + bundle.artifact_noun_plural() + " to understand the style:\n";
  for (const auto& e : bundle.exemplar_queries) out += normalize_whitespace(e) + "\n";
  return out;
}

std::string answer_instructions(const PromptBundle& bundle, std::string_view relevance_clause) {
  const std::string& noun = bundle.artifact_noun;
  return "Return as many answers as you can, but make sure that each answer is unique and distinct. "
         "Do not repeat yourself across answers, and focus on quality over quantity.\n"
         "Format your answer in the following output structure:\n\n"
         "<PLAN>Explanation on how you will design the " + noun + " and " + std::string(relevance_clause) +
         ". Also explain how you will ensure the style is similar to the style of the " +
         bundle.artifact_noun_plural() + " provided above (name the language you will use)</PLAN>\n\n"
         "<QUERY>text of the " + noun + " in the same language as the examples and document above</QUERY>\n";
}

}  // namespace

std::string build_contrastive_prompt(const Document& doc, const Document& reference, const PromptBundle& bundle) {
  bundle.validate();
  if (doc.id == reference.id) {
    throw Error(Errc::InvalidInput, "document '" + doc.id + "' cannot be its own contrastive reference");
  }
  const std::string& noun = bundle.artifact_noun;
  return exemplar_block(bundle) + "\n" +
         "Given the following two documents, create a " + noun +
         " that is weakly related to both documents such that document 1 is directly relevant to the " + noun +
         ", but document 2 is not. Your plan should highlight the key difference between the documents that "
         "you will use.\n\n"
         "Document 1: " + doc.content() + "\n" +
         "Document 2: " + reference.content() + "\n" +
         answer_instructions(bundle, "why the first document is relevant to it but the second is not");
}

std::string build_simple_prompt(const Document& doc, const PromptBundle& bundle) {
  bundle.validate();
  const std::string& noun = bundle.artifact_noun;
  return exemplar_block(bundle) + "\n" +
         "Given the following document, create a " + noun + " such that the document is directly relevant to the " +
         noun + ".\n\n" +
         "Document: " + doc.content() + "\n" +
         answer_instructions(bundle, "why the document is relevant to it");
}

ParsedGeneration parse_generation(std::string_view raw) {
  static constexpr std::string_view kPlanOpen = "<PLAN>";
  static constexpr std::string_view kPlanClose = "</PLAN>";
  static constexpr std::string_view kQueryOpen = "<QUERY>";
  static constexpr std::string_view kQueryClose = "</QUERY>";

  ParsedGeneration out;
  std::unordered_set<std::string> seen;
  std::string plan;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const std::size_t plan_at = raw.find(kPlanOpen, pos);
    const std::size_t query_at = raw.find(kQueryOpen, pos);
    if (plan_at == std::string_view::npos && query_at == std::string_view::npos) break;

    if (plan_at < query_at) {
      const std::size_t body = plan_at + kPlanOpen.size();
      const std::size_t end = raw.find(kPlanClose, body);
      if (end == std::string_view::npos) {
        pos = body;
        continue;
      }
      plan = normalize_whitespace(raw.substr(body, end - body));
      pos = end + kPlanClose.size();
      continue;
    }

    const std::size_t body = query_at + kQueryOpen.size();
    const std::size_t end = raw.find(kQueryClose, body);
    if (end == std::string_view::npos) break;
    std::string query = normalize_whitespace(raw.substr(body, end - body));
    pos = end + kQueryClose.size();
    if (query.empty() || !seen.insert(query).second) continue;
    out.items.push_back({plan, std::move(query)});
  }
  out.no_queries = out.items.empty();
  return out;
}

namespace {

std::vector<PlannedQuery> capped(ParsedGeneration parsed, const GenerationOptions& opts) {
  if (opts.per_call_cap && parsed.items.size() > *opts.per_call_cap) parsed.items.resize(*opts.per_call_cap);
  return std::move(parsed.items);
}

}  // namespace

GenerationResult generate_contrastive(const Document& doc, const ReferenceSet& refs, const Corpus& corpus,
                                      const LanguageModel& lm, const PromptBundle& bundle, std::size_t parallelism,
                                      const GenerationOptions& opts) {
  bundle.validate();
  if (refs.doc_id != doc.id) {
    throw Error(Errc::InvalidInput, "reference set of '" + refs.doc_id + "' used for '" + doc.id + "'");
  }
  std::vector<const Document*> references;
  for (const auto& id : refs.reference_ids) references.push_back(&corpus.at(id));

  struct Slot {
    std::vector<PlannedQuery> items;
    std::optional<Warning> warning;
  };
  std::vector<Slot> slots(references.size());
  parallel_for(references.size(), parallelism, [&](std::size_t i) {
    const Document& ref = *references[i];
    const std::string subject = doc.id + " vs " + ref.id;
    try {
      ParsedGeneration parsed = parse_generation(lm.complete(build_contrastive_prompt(doc, ref, bundle)));
      if (parsed.no_queries) {
        slots[i].warning = Warning{"gen-queries", "no_query_tags", subject, "LM output contained no <QUERY> spans"};
      }
      slots[i].items = capped(std::move(parsed), opts);
    } catch (const Error& e) {
      if (e.code() != Errc::LMUnavailable) throw;
      slots[i].warning = Warning{"gen-queries", "lm_unavailable", subject, e.what()};
    }
  });

  GenerationResult result;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].warning) result.warnings.push_back(*slots[i].warning);
    for (auto& item : slots[i].items) {
      if (!seen.insert(item.query).second) continue;
      result.queries.push_back(
          {std::move(item.query), doc.id, references[i]->id, QueryKind::Contrastive, result.queries.size()});
    }
  }
  if (result.queries.empty()) {
    result.warnings.push_back({"gen-queries", "no_queries", doc.id, "no contrastive queries survived for document"});
  }
  return result;
}

GenerationResult generate_simple(const Document& doc, const LanguageModel& lm, const PromptBundle& bundle,
                                 const GenerationOptions& opts) {
  if (trim(doc.text).empty()) throw Error(Errc::EmptyText, "document '" + doc.id + "' has empty text");
  ParsedGeneration parsed = parse_generation(lm.complete(build_simple_prompt(doc, bundle)));
  GenerationResult result;
  if (parsed.no_queries) {
    result.warnings.push_back({"gen-queries", "no_query_tags", doc.id, "LM output contained no <QUERY> spans"});
  }
  for (auto& item : capped(std::move(parsed), opts)) {
    result.queries.push_back({std::move(item.query), doc.id, std::nullopt, QueryKind::Simple, result.queries.size()});
  }
  if (result.queries.empty()) {
    result.warnings.push_back({"gen-queries", "no_queries", doc.id, "no simple queries survived for document"});
  }
  return result;
}

}  // namespace repsharp
