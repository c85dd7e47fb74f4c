#include "genq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace genq {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

// RFC-4180 style CSV: quoted fields may contain commas, newlines and
// doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
          row_started = false;
        }
        break;
      default:
        field += c;
        row_started = true;
        break;
    }
  }
  if (row_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool parse_bool(const std::string& cell, bool& out) {
  std::string v = lower(trim(cell));
  if (v == "yes" || v == "true" || v == "1" || v == "y") { out = true; return true; }
  if (v == "no" || v == "false" || v == "0" || v == "n") { out = false; return true; }
  return false;
}

bool parse_frequency(const std::string& cell, int& out) {
  std::string v = lower(trim(cell));
  if (v == "0" || v == "rarely") { out = 0; return true; }
  if (v == "1" || v == "sometimes") { out = 1; return true; }
  if (v == "2" || v == "frequently") { out = 2; return true; }
  if (v == "3" || v == "very frequently" || v == "very_frequently") { out = 3; return true; }
  return false;
}

int whitespace_token_count(const std::string& text) {
  std::istringstream stream(text);
  std::string tok;
  int n = 0;
  while (stream >> tok) ++n;
  return n;
}

}  // namespace

const char* to_string(Platform p) {
  switch (p) {
    case Platform::mturk: return "mturk";
    case Platform::prolific: return "prolific";
    default: return "other";
  }
}

const char* to_string(Phase p) { return p == Phase::during_page ? "during" : "after"; }

const char* to_string(CarCode c) {
  switch (c) {
    case CarCode::C: return "C";
    case CarCode::A: return "A";
    default: return "R";
  }
}

const char* to_string(OpenCode o) { return o == OpenCode::open ? "open" : "closed"; }

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::relational: return "relational";
    case Outcome::abstract_q: return "abstract";
    default: return "open_ended";
  }
}

Story Story::parse(const std::string& cell) {
  std::string v = lower(trim(cell));
  if (v == "best_farm" || v == "best farm") return {Kind::best_farm, {}};
  if (v == "celebrations") return {Kind::celebrations, {}};
  return {Kind::other, trim(cell)};
}

std::string Story::key() const {
  switch (kind) {
    case Kind::best_farm: return "best_farm";
    case Kind::celebrations: return "celebrations";
    default: return name;
  }
}

std::vector<const CodedQuestion*> SurveyCorpus::questions_of(
    const std::string& participant_id) const {
  std::vector<const CodedQuestion*> out;
  for (const auto& q : questions)
    if (q.participant_id == participant_id) out.push_back(&q);
  return out;
}

SurveyCorpus load_survey_csv(const std::string& path, const SurveySchema& schema,
                             LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open survey CSV: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  LoadReport local;
  LoadReport& rep = report ? *report : local;

  SurveyCorpus corpus;
  auto rows = parse_csv(content);
  if (rows.empty()) {
    rep.empty_file = true;
    return corpus;
  }

  std::map<std::string, int> columns;
  for (std::size_t i = 0; i < rows[0].size(); ++i)
    columns[lower(trim(rows[0][i]))] = static_cast<int>(i);

  auto require = [&](const std::string& name) {
    auto it = columns.find(lower(name));
    if (it == columns.end()) throw MissingColumn(name);
    return it->second;
  };
  const int col_pid = require(schema.participant_id);
  const int col_platform = require(schema.platform);
  const int col_story = require(schema.story);
  const int col_caregiver = require(schema.is_caregiver);
  const int col_latinx = require(schema.is_latinx);
  const int col_freq = require(schema.read_frequency);
  const int col_exp = require(schema.experience_related);
  const int col_page = require(schema.page);
  const int col_phase = require(schema.phase);
  const int col_text = require(schema.question_text);
  const int col_car = require(schema.car_code);
  const int col_open = require(schema.open_code);
  const int col_trigger = columns.count(lower(schema.trigger_sentence))
                              ? columns[lower(schema.trigger_sentence)]
                              : -1;

  if (rows.size() == 1) {
    rep.empty_file = true;
    return corpus;
  }

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const int data_row = static_cast<int>(r);
    ++rep.rows_read;
    auto cell = [&](int col) -> std::string {
      return col >= 0 && col < static_cast<int>(row.size()) ? trim(row[col]) : std::string{};
    };

    std::string pid = cell(col_pid);
    std::string text = cell(col_text);
    std::string car_cell = cell(col_car);
    std::string open_cell = cell(col_open);
    if (pid.empty() || text.empty() || car_cell.empty() || open_cell.empty()) {
      rep.rejected_rows.push_back("row " + std::to_string(data_row) +
                                  ": missing participant, question text, or codes");
      continue;
    }

    CodedQuestion base;
    base.participant_id = pid;

    std::string story_cell = cell(col_story);
    if (story_cell.empty()) throw BadEnumValue(data_row, schema.story, story_cell);
    base.story = Story::parse(story_cell);

    try {
      base.page = std::stoi(cell(col_page));
    } catch (const std::exception&) {
      throw BadEnumValue(data_row, schema.page, cell(col_page));
    }
    if (base.page < 1) throw BadEnumValue(data_row, schema.page, cell(col_page));

    std::string phase_cell = lower(cell(col_phase));
    if (phase_cell == "during" || phase_cell == "during_page")
      base.phase = Phase::during_page;
    else if (phase_cell == "after" || phase_cell == "after_page")
      base.phase = Phase::after_page;
    else
      throw BadEnumValue(data_row, schema.phase, cell(col_phase));

    std::string car = lower(car_cell);
    if (car == "c" || car == "concrete") base.car_code = CarCode::C;
    else if (car == "a" || car == "abstract") base.car_code = CarCode::A;
    else if (car == "r" || car == "relational") base.car_code = CarCode::R;
    else throw BadEnumValue(data_row, schema.car_code, car_cell);

    std::string open = lower(open_cell);
    if (open == "open" || open == "o") base.open_code = OpenCode::open;
    else if (open == "closed" || open == "c") base.open_code = OpenCode::closed;
    else throw BadEnumValue(data_row, schema.open_code, open_cell);

    base.trigger_sentence = cell(col_trigger);

    DemographicProfile profile;
    if (!parse_bool(cell(col_caregiver), profile.is_caregiver))
      throw BadEnumValue(data_row, schema.is_caregiver, cell(col_caregiver));
    if (!parse_bool(cell(col_latinx), profile.is_latinx))
      throw BadEnumValue(data_row, schema.is_latinx, cell(col_latinx));
    if (!parse_bool(cell(col_exp), profile.experience_related))
      throw BadEnumValue(data_row, schema.experience_related, cell(col_exp));
    if (!parse_frequency(cell(col_freq), profile.read_frequency))
      throw BadEnumValue(data_row, schema.read_frequency, cell(col_freq));

    std::string platform_cell = lower(cell(col_platform));
    if (platform_cell == "mturk") profile.platform = Platform::mturk;
    else if (platform_cell == "prolific") profile.platform = Platform::prolific;
    else if (platform_cell == "other" || platform_cell.empty()) profile.platform = Platform::other;
    else throw BadEnumValue(data_row, schema.platform, cell(col_platform));

    // Split multi-question cells on `?` boundaries, one record per question.
    std::vector<std::string> fragments;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t qmark = text.find('?', start);
      std::string piece = qmark == std::string::npos ? text.substr(start)
                                                     : text.substr(start, qmark - start);
      piece = trim(piece);
      if (!piece.empty()) fragments.push_back(piece + "?");
      if (qmark == std::string::npos) break;
      start = qmark + 1;
    }
    if (fragments.empty()) {
      rep.rejected_rows.push_back("row " + std::to_string(data_row) +
                                  ": question cell contains no text");
      continue;
    }

    corpus.participants.emplace(pid, profile);  // first profile wins
    for (std::size_t k = 0; k < fragments.size(); ++k) {
      CodedQuestion q = base;
      q.text = fragments[k];
      q.question_id = pid + ":r" + std::to_string(data_row) + ":q" + std::to_string(k);
      corpus.questions.push_back(std::move(q));
      ++rep.questions_loaded;
    }
  }
  return corpus;
}

double cohen_kappa(const std::vector<std::string>& labels_a,
                   const std::vector<std::string>& labels_b) {
  if (labels_a.size() != labels_b.size())
    throw LengthMismatch(labels_a.size(), labels_b.size());
  if (labels_a.empty()) throw Error("kappa: empty label sequences");

  const double n = static_cast<double>(labels_a.size());
  std::map<std::string, int> marg_a, marg_b;
  int agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) ++agree;
    ++marg_a[labels_a[i]];
    ++marg_b[labels_b[i]];
  }
  double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, count_a] : marg_a) {
    auto it = marg_b.find(label);
    if (it != marg_b.end()) p_e += (count_a / n) * (it->second / n);
  }
  if (p_e >= 1.0) throw DegenerateMarginals();
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<std::string> load_label_column(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open label file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::vector<std::string> labels;
  for (const auto& row : parse_csv(content)) {
    if (row.empty()) continue;
    std::string v = trim(row[0]);
    if (v.empty()) continue;
    if (labels.empty() && lower(v) == "label") continue;
    labels.push_back(v);
  }
  return labels;
}

std::string GroupKey::label() const {
  std::string out;
  for (const auto& [factor, value] : factors) {
    if (!out.empty()) out += ", ";
    out += factor + "=" + value;
  }
  return out;
}

namespace {

std::string factor_value(const std::string& factor, const DemographicProfile& profile,
                         const std::optional<Story>& story) {
  if (factor == "is_caregiver") return profile.is_caregiver ? "yes" : "no";
  if (factor == "is_latinx") return profile.is_latinx ? "yes" : "no";
  if (factor == "platform") return to_string(profile.platform);
  if (factor == "read_frequency") return std::to_string(profile.read_frequency);
  if (factor == "experience_related") return profile.experience_related ? "yes" : "no";
  if (factor == "story") {
    if (!story) throw UnknownFactor("story (no story context for this unit)");
    return story->key();
  }
  throw UnknownFactor(factor);
}

void validate_grouping(const std::vector<std::string>& grouping) {
  static const std::set<std::string> known = {"is_caregiver",   "is_latinx",
                                              "platform",       "read_frequency",
                                              "experience_related", "story"};
  for (const auto& g : grouping)
    if (!known.count(g)) throw UnknownFactor(g);
}

bool phase_selected(Phase phase, PhaseFilter filter) {
  switch (filter) {
    case PhaseFilter::both: return true;
    case PhaseFilter::during_only: return phase == Phase::during_page;
    default: return phase == Phase::after_page;
  }
}

bool outcome_matches(const CodedQuestion& q, Outcome outcome) {
  switch (outcome) {
    case Outcome::relational: return q.car_code == CarCode::R;
    case Outcome::abstract_q: return q.car_code == CarCode::A;
    default: return q.open_code == OpenCode::open;
  }
}

// Units of aggregation: participants, or (participant, story) pairs when the
// grouping includes story.
struct Unit {
  std::string pid;
  std::optional<Story> story;
};

std::vector<Unit> make_units(const SurveyCorpus& corpus, bool by_story) {
  std::vector<Unit> units;
  if (!by_story) {
    for (const auto& [pid, profile] : corpus.participants) units.push_back({pid, std::nullopt});
    return units;
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& q : corpus.questions) {
    if (seen.insert({q.participant_id, q.story.key()}).second)
      units.push_back({q.participant_id, q.story});
  }
  std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
    return std::tie(a.pid, a.story->name, a.story->kind) <
           std::tie(b.pid, b.story->name, b.story->kind);
  });
  return units;
}

}  // namespace

std::vector<GroupStats> descriptive_counts(const SurveyCorpus& corpus,
                                           const std::vector<std::string>& grouping,
                                           Outcome outcome, PhaseFilter phases) {
  validate_grouping(grouping);
  bool by_story =
      std::find(grouping.begin(), grouping.end(), "story") != grouping.end();

  std::map<GroupKey, std::vector<double>> counts;
  for (const auto& unit : make_units(corpus, by_story)) {
    const auto& profile = corpus.participants.at(unit.pid);
    GroupKey key;
    for (const auto& g : grouping)
      key.factors.emplace_back(g, factor_value(g, profile, unit.story));
    int count = 0;
    for (const auto& q : corpus.questions) {
      if (q.participant_id != unit.pid) continue;
      if (unit.story && !(q.story == *unit.story)) continue;
      if (!phase_selected(q.phase, phases)) continue;
      if (outcome_matches(q, outcome)) ++count;
    }
    counts[key].push_back(count);
  }

  std::vector<GroupStats> out;
  for (const auto& [key, values] : counts) {
    GroupStats stats;
    stats.group = key;
    stats.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / stats.n;
    if (stats.n >= 2) {
      double ss = 0.0;
      for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
      stats.sd = std::sqrt(ss / (stats.n - 1));
    } else {
      stats.sd = 0.0;
      stats.n_lt_2 = true;
    }
    out.push_back(std::move(stats));
  }
  return out;
}

std::vector<GroupStats> read_frequency_stats(const SurveyCorpus& corpus,
                                             const std::vector<std::string>& grouping) {
  validate_grouping(grouping);
  std::map<GroupKey, std::vector<double>> values;
  for (const auto& [pid, profile] : corpus.participants) {
    GroupKey key;
    for (const auto& g : grouping)
      key.factors.emplace_back(g, factor_value(g, profile, std::nullopt));
    values[key].push_back(profile.read_frequency);
  }
  std::vector<GroupStats> out;
  for (const auto& [key, vals] : values) {
    GroupStats stats;
    stats.group = key;
    stats.n = static_cast<int>(vals.size());
    double sum = 0.0;
    for (double v : vals) sum += v;
    stats.mean = sum / stats.n;
    if (stats.n >= 2) {
      double ss = 0.0;
      for (double v : vals) ss += (v - stats.mean) * (v - stats.mean);
      stats.sd = std::sqrt(ss / (stats.n - 1));
    } else {
      stats.n_lt_2 = true;
    }
    out.push_back(std::move(stats));
  }
  return out;
}

std::vector<LengthStats> mean_question_length(const SurveyCorpus& corpus,
                                              const std::vector<std::string>& grouping,
                                              PhaseFilter phases) {
  validate_grouping(grouping);
  bool by_story =
      std::find(grouping.begin(), grouping.end(), "story") != grouping.end();

  // Seed every observed unit's group so empty groups surface as NA.
  std::map<GroupKey, std::pair<int, double>> agg;
  for (const auto& unit : make_units(corpus, by_story)) {
    const auto& profile = corpus.participants.at(unit.pid);
    GroupKey key;
    for (const auto& g : grouping)
      key.factors.emplace_back(g, factor_value(g, profile, unit.story));
    agg.try_emplace(key, 0, 0.0);
  }
  for (const auto& q : corpus.questions) {
    if (q.car_code != CarCode::R) continue;
    if (!phase_selected(q.phase, phases)) continue;
    const auto& profile = corpus.participants.at(q.participant_id);
    GroupKey key;
    for (const auto& g : grouping)
      key.factors.emplace_back(g, factor_value(g, profile, q.story));
    auto& [n, total] = agg[key];
    ++n;
    total += whitespace_token_count(q.text);
  }

  std::vector<LengthStats> out;
  for (const auto& [key, acc] : agg) {
    LengthStats stats;
    stats.group = key;
    stats.n_questions = acc.first;
    if (acc.first > 0) stats.mean_length = acc.second / acc.first;
    out.push_back(std::move(stats));
  }
  return out;
}

std::vector<std::string> repeated_participants(const SurveyCorpus& corpus) {
  std::map<std::string, std::set<std::string>> stories;
  for (const auto& q : corpus.questions)
    stories[q.participant_id].insert(q.story.key());
  std::vector<std::string> out;
  for (const auto& [pid, keys] : stories)
    if (keys.count("best_farm") && keys.count("celebrations")) out.push_back(pid);
  return out;
}

int count_outcome(const SurveyCorpus& corpus, const std::string& participant_id,
                  Outcome outcome, const std::optional<Story::Kind>& story,
                  PhaseFilter phases) {
  int count = 0;
  for (const auto& q : corpus.questions) {
    if (q.participant_id != participant_id) continue;
    if (story && q.story.kind != *story) continue;
    if (!phase_selected(q.phase, phases)) continue;
    if (outcome_matches(q, outcome)) ++count;
  }
  return count;
}

}  // namespace genq
