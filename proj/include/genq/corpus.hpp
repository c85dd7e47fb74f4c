#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genq/error.hpp"

namespace genq {

enum class Platform { mturk, prolific, other };
enum class Phase { during_page, after_page };
enum class CarCode { C, A, R };
enum class OpenCode { open, closed };

const char* to_string(Platform p);
const char* to_string(Phase p);
const char* to_string(CarCode c);
const char* to_string(OpenCode o);

struct Story {
  enum class Kind { best_farm, celebrations, other };
  Kind kind = Kind::other;
  std::string name;  ///< set for Kind::other

  static Story parse(const std::string& cell);
  std::string key() const;
  bool operator==(const Story&) const = default;
};

struct DemographicProfile {
  bool is_caregiver = false;
  bool is_latinx = false;
  Platform platform = Platform::other;
  int read_frequency = 0;  ///< ordinal 0..3
  bool experience_related = false;

  bool operator==(const DemographicProfile&) const = default;
};

struct CodedQuestion {
  std::string question_id;
  std::string participant_id;
  Story story;
  int page = 1;
  Phase phase = Phase::during_page;
  std::string text;
  CarCode car_code = CarCode::C;
  OpenCode open_code = OpenCode::closed;
  std::string trigger_sentence;  ///< optional
};

struct SurveyCorpus {
  std::map<std::string, DemographicProfile> participants;
  std::vector<CodedQuestion> questions;

  std::vector<const CodedQuestion*> questions_of(const std::string& participant_id) const;
};

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& column)
      : Error("survey CSV is missing required column: " + column) {}
};

struct BadEnumValue : Error {
  int row;
  std::string column;
  BadEnumValue(int row_number, const std::string& column_name, const std::string& value)
      : Error("bad value '" + value + "' in column " + column_name + " at data row " +
              std::to_string(row_number)),
        row(row_number),
        column(column_name) {}
};

struct LengthMismatch : Error {
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("label sequences differ in length: " + std::to_string(a) + " vs " +
              std::to_string(b)) {}
};

struct DegenerateMarginals : Error {
  DegenerateMarginals()
      : Error("kappa undefined: both coders constant and identical (p_e = 1)") {}
};

struct UnknownFactor : Error {
  explicit UnknownFactor(const std::string& factor)
      : Error("unknown grouping factor: " + factor) {}
};

/// Column-name overrides for the survey CSV; defaults match the documented
/// schema.
struct SurveySchema {
  std::string participant_id = "participant_id";
  std::string platform = "platform";
  std::string story = "story";
  std::string is_caregiver = "is_caregiver";
  std::string is_latinx = "is_latinx";
  std::string read_frequency = "read_frequency";
  std::string experience_related = "experience_related";
  std::string page = "page";
  std::string phase = "phase";
  std::string question_text = "question_text";
  std::string car_code = "car_code";
  std::string open_code = "open_code";
  std::string trigger_sentence = "trigger_sentence";  ///< optional column
};

struct LoadReport {
  int rows_read = 0;
  int questions_loaded = 0;
  std::vector<std::string> rejected_rows;  ///< one human-readable line per reject
  bool empty_file = false;
};

/// Loads the survey CSV, splitting multi-question cells on `?` boundaries so
/// each CodedQuestion holds exactly one question. Rows with missing mandatory
/// codes are rejected into the report; invalid enum values raise BadEnumValue.
SurveyCorpus load_survey_csv(const std::string& path, const SurveySchema& schema = {},
                             LoadReport* report = nullptr);

/// Cohen's kappa over two equal-length label sequences.
double cohen_kappa(const std::vector<std::string>& labels_a,
                   const std::vector<std::string>& labels_b);

/// Reads a single-column label CSV (optional "label" header skipped).
std::vector<std::string> load_label_column(const std::string& path);

enum class Outcome { relational, abstract_q, open_ended };
enum class PhaseFilter { both, during_only, after_only };

const char* to_string(Outcome o);

struct GroupKey {
  std::vector<std::pair<std::string, std::string>> factors;  ///< (factor, value), in grouping order
  std::string label() const;
  bool operator<(const GroupKey& other) const { return factors < other.factors; }
  bool operator==(const GroupKey&) const = default;
};

struct GroupStats {
  GroupKey group;
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;       ///< sample standard deviation (n-1); 0 when n < 2
  bool n_lt_2 = false;
};

/// Per-participant outcome counts aggregated by the grouping factors.
/// Factors: is_caregiver, is_latinx, platform, read_frequency,
/// experience_related, story. Grouping by story switches the unit of
/// aggregation to (participant, story).
std::vector<GroupStats> descriptive_counts(const SurveyCorpus& corpus,
                                           const std::vector<std::string>& grouping,
                                           Outcome outcome,
                                           PhaseFilter phases = PhaseFilter::both);

/// Mean reading-frequency ordinal per group; same grouping rules.
std::vector<GroupStats> read_frequency_stats(const SurveyCorpus& corpus,
                                             const std::vector<std::string>& grouping);

struct LengthStats {
  GroupKey group;
  int n_questions = 0;
  std::optional<double> mean_length;  ///< empty when the group has no Relational questions
};

/// Mean whitespace-token length of Relational questions per group.
std::vector<LengthStats> mean_question_length(const SurveyCorpus& corpus,
                                              const std::vector<std::string>& grouping,
                                              PhaseFilter phases = PhaseFilter::both);

/// Participants with questions under both best_farm and celebrations.
std::vector<std::string> repeated_participants(const SurveyCorpus& corpus);

/// Number of questions matching the outcome for one participant, optionally
/// restricted to a story.
int count_outcome(const SurveyCorpus& corpus, const std::string& participant_id,
                  Outcome outcome, const std::optional<Story::Kind>& story,
                  PhaseFilter phases = PhaseFilter::both);

}  // namespace genq
