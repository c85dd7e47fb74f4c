#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genq/annotation.hpp"
#include "genq/templates.hpp"

namespace genq {

/// One slot's resolved token: where it came from and the surface form used
/// (contractions already expanded).
struct BoundSlot {
  int token_index = -1;  ///< 0-based position within the source sentence

  std::string surface;
  bool operator==(const BoundSlot&) const = default;
};

/// Element position -> bound token, for one template against one sentence.
struct SlotBinding {
  std::string sentence_id;
  std::map<std::size_t, BoundSlot> slots;
  bool operator==(const SlotBinding&) const = default;
};

struct GeneratedQuestion {
  enum class Stage { raw, rule_fixed, paraphrased };

  std::string text;
  std::string template_id;
  std::string sentence_id;
  SlotBinding binding;
  CarCode car_code = CarCode::C;
  OpenCode open_code = OpenCode::closed;
  Stage stage = Stage::raw;
  bool operator==(const GeneratedQuestion&) const = default;
};

const char* to_string(GeneratedQuestion::Stage stage);

struct UnboundSlot : Error {
  explicit UnboundSlot(std::size_t position)
      : Error("no binding for slot at element position " + std::to_string(position)) {}
};

struct EmptyTemplatePool : Error {
  EmptyTemplatePool() : Error("no templates survive the generation filters") {}
};

/// Fixed compatibility table: dependency slots accept a matching deprel or a
/// nominal/verbal POS fallback; POS slots accept exactly their tag. PUNCT
/// tokens never bind.
bool slot_accepts(SlotLabel label, const Token& token);

/// Greedy leftmost order-preserving injective matching. Literals need no
/// sentence support. Returns nullopt when no valid assignment exists; the
/// binding returned is the lexicographically smallest index vector, which is
/// the unique greedy one.
std::optional<SlotBinding> match_template(const Template& tmpl,
                                          const AnnotatedSentence& sentence);

/// Substitutes bound surfaces into the template and detokenizes; appends `?`
/// when absent. Stage = raw.
GeneratedQuestion fill_template(const Template& tmpl, const SlotBinding& binding);

/// Deterministic repairs, in order: determiner reattachment from the source
/// sentence, first-word capitalization, adjacent-duplicate collapse, single
/// trailing `?`. Idempotent. Stage = rule_fixed.
GeneratedQuestion rule_fix(const GeneratedQuestion& question, const AnnotatedSentence& source);

struct ParaphraseConfig {
  std::string url;          ///< e.g. "http://localhost:8088/paraphrase"
  int timeout_ms = 2000;
  int retries = 1;          ///< additional attempts after the first
  int max_in_flight = 4;    ///< concurrent request cap for batch generation
};

struct GenerationReport {
  int sentences_seen = 0;
  int candidates_accepted = 0;
  int duplicates_dropped = 0;
  int paraphrase_attempts = 0;
  int paraphrase_failures = 0;
};

/// POSTs {"text": ...} and takes the first non-empty candidate, with `?`
/// appended when missing (stage = paraphrased). Fail-open: transport errors,
/// timeouts, bad payloads, and empty candidate lists return the input
/// unchanged at stage rule_fixed and bump the failure count. An absent config
/// is the same identity without touching the counters (nothing was requested).
GeneratedQuestion paraphrase_remote(const GeneratedQuestion& question,
                                    const std::optional<ParaphraseConfig>& config,
                                    GenerationReport* report = nullptr);

struct GenerationFilters {
  std::optional<CarCode> car_code;
  std::optional<OpenCode> open_code;
  std::optional<Demographic> demographic;
  int top_k = 50;
  int max_per_sentence = 3;
  /// C/A/R shares; when set, candidates round-robin across car pools.
  std::optional<std::array<double, 3>> quota;
  std::optional<ParaphraseConfig> paraphrase;
};

/// Generates questions for every sentence of a page: templates are tried in
/// rank order (restricted by the filters, truncated to top_k), up to
/// max_per_sentence acceptances per sentence, then fill -> rule_fix ->
/// paraphrase; exact-duplicate output texts are dropped. Output order is
/// (sentence index, template rank). Deterministic for fixed inputs.
std::vector<GeneratedQuestion> generate_for_page(const std::vector<AnnotatedSentence>& page,
                                                 const RankedTemplates& ranked,
                                                 const GenerationFilters& filters,
                                                 GenerationReport* report = nullptr);

/// JSONL persistence for generated questions.
void persist_questions(const std::vector<GeneratedQuestion>& questions,
                       const std::string& path);
std::vector<GeneratedQuestion> load_questions(const std::string& path);

}  // namespace genq
