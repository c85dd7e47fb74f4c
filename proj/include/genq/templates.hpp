#pragma once

#include <map>
#include <string>
#include <vector>

#include "genq/annotation.hpp"
#include "genq/corpus.hpp"
#include "genq/error.hpp"

namespace genq {

/// One position of a template: a literal word or an abstracted slot.
struct Element {
  enum class Kind { literal, slot };
  Kind kind = Kind::literal;
  std::string word;                    ///< set when kind == literal
  SlotLabel slot = SlotLabel::NSUBJ;   ///< set when kind == slot

  static Element lit(std::string w) { return {Kind::literal, std::move(w), SlotLabel::NSUBJ}; }
  static Element of(SlotLabel label) { return {Kind::slot, {}, label}; }
  bool is_slot() const { return kind == Kind::slot; }
  std::string display() const { return is_slot() ? to_string(slot) : word; }

  bool operator==(const Element&) const = default;
};

/// Latinx x caregiver cell a template's source question came from.
struct Demographic {
  bool is_latinx = false;
  bool is_caregiver = false;

  std::string key() const;                     ///< e.g. "latinx_caregiver"
  static Demographic parse(const std::string& key);
  bool operator==(const Demographic&) const = default;
  bool operator<(const Demographic& other) const {
    return std::pair(is_latinx, is_caregiver) < std::pair(other.is_latinx, other.is_caregiver);
  }
};

struct Template {
  std::string template_id;
  std::vector<Element> elements;
  CarCode car_code = CarCode::C;
  OpenCode open_code = OpenCode::closed;
  Demographic demographic;
  std::string source_question_id;
  int duplicate_count = 1;

  int slot_count() const;
  /// Space-joined display form, e.g. "What AUX DET NSUBJ".
  std::string pattern() const;
  bool operator==(const Template&) const = default;
};

/// Active slot labels plus the interrogative whitelist used by extraction.
struct SlotConfig {
  std::vector<SlotLabel> slots;
  std::vector<std::string> interrogative_whitelist;  ///< lowercase words

  static SlotConfig defaults();
  bool slot_enabled(SlotLabel label) const;
  bool whitelisted(const std::string& lowercased_word) const;
};

struct TemplateCorpus {
  std::vector<Template> templates;
  SlotConfig slot_config;
  std::string provenance;        ///< free-text source identifiers
  int non_generative_count = 0;  ///< questions dropped for having zero slots
};

struct NonGenerative : Error {
  NonGenerative() : Error("question yields a template with zero slots") {}
};

struct EmptyQuestion : Error {
  EmptyQuestion() : Error("question has no tokens") {}
};

struct MissingAnnotation : Error {
  std::string question_id;
  explicit MissingAnnotation(const std::string& id)
      : Error("no annotation found for question " + id), question_id(id) {}
};

struct BadRecord : Error {
  int line;
  BadRecord(int line_number, const std::string& detail)
      : Error("bad template record at line " + std::to_string(line_number) + ": " + detail),
        line(line_number) {}
};

struct DuplicateTemplateId : Error {
  explicit DuplicateTemplateId(const std::string& id)
      : Error("duplicate template_id: " + id) {}
};

struct EmptyCorpus : Error {
  EmptyCorpus() : Error("template corpus is empty") {}
};

struct KTooLarge : Error {
  KTooLarge(int k, std::size_t size)
      : Error("rank depth " + std::to_string(k) + " out of range for corpus size " +
              std::to_string(size)) {}
};

/// Turns an annotated question into a template: the interrogative head stays
/// literal (stored capitalized), dependency slots take precedence over POS
/// slots, everything else stays literal; trailing `?` tokens are dropped.
Template extract_template(const AnnotatedSentence& question, CarCode car_code,
                          OpenCode open_code, Demographic demographic,
                          const SlotConfig& config = SlotConfig::defaults());

/// Extracts templates for every coded question, joining annotations by
/// sentence_id == question_id. Zero-slot questions are counted and skipped;
/// exact-duplicate element sequences with identical codes merge into one
/// template with duplicate_count incremented.
TemplateCorpus build_corpus(const SurveyCorpus& survey,
                            const std::vector<AnnotatedSentence>& annotations,
                            const SlotConfig& config = SlotConfig::defaults());

/// JSON Lines persistence; load(persist(x)) preserves the template list
/// field-for-field.
void persist_store(const TemplateCorpus& corpus, const std::string& path);
TemplateCorpus load_store(const std::string& path);

/// TF-IDF score per template: documents are templates; terms are lowercased
/// literals plus slot label names; score(d) sums the column 2-norms of d's
/// distinct terms. Accumulation order is canonical (template_id-sorted), so
/// scores are bit-identical under corpus permutation.
std::map<std::string, double> tfidf_scores(const TemplateCorpus& corpus);

struct DemographicShare {
  std::string group;     ///< Demographic::key()
  int count = 0;
  double percent = 0.0;  ///< share of the top-k, 0..100
};

struct RankedTemplates {
  int k = 0;                                         ///< requested rank depth
  std::vector<std::pair<Template, double>> entries;  ///< all templates, score-descending
  std::vector<DemographicShare> proportions;         ///< over the top-k entries
};

/// Descending score order with template_id tie-break; proportions report each
/// demographic cell's share of the top-k as a percentage.
RankedTemplates rank_and_proportions(const TemplateCorpus& corpus, int k);

}  // namespace genq
