#include "genq/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "genq/annotation.hpp"
#include "genq/config.hpp"
#include "genq/corpus.hpp"
#include "genq/generator.hpp"
#include "genq/report.hpp"
#include "genq/stats.hpp"
#include "genq/templates.hpp"

namespace genq {
namespace {

using nlohmann::json;

std::string format_fixed(const char* fmt, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return buf;
}

// Temp-file-then-rename so readers never observe a half-written file.
void write_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Phase parse_phase(const std::string& value) {
  if (value == "during") return Phase::during_page;
  if (value == "after") return Phase::after_page;
  throw Error("bad phase value: " + value);
}

Platform parse_platform(const std::string& value) {
  if (value == "mturk") return Platform::mturk;
  if (value == "prolific") return Platform::prolific;
  if (value == "other") return Platform::other;
  throw Error("bad platform value: " + value);
}

CarCode parse_car(const std::string& value) {
  if (value == "C") return CarCode::C;
  if (value == "A") return CarCode::A;
  if (value == "R") return CarCode::R;
  throw Error("bad CAR code: " + value);
}

OpenCode parse_open(const std::string& value) {
  if (value == "open") return OpenCode::open;
  if (value == "closed") return OpenCode::closed;
  throw Error("bad open/closed code: " + value);
}

struct Bundle {
  SurveyCorpus survey;
  std::vector<AnnotatedSentence> sentences;
};

json profile_to_json(const DemographicProfile& p) {
  return json{{"is_caregiver", p.is_caregiver},
              {"is_latinx", p.is_latinx},
              {"platform", to_string(p.platform)},
              {"read_frequency", p.read_frequency},
              {"experience_related", p.experience_related}};
}

json question_to_json(const CodedQuestion& q) {
  return json{{"question_id", q.question_id},
              {"participant_id", q.participant_id},
              {"story", q.story.key()},
              {"page", q.page},
              {"phase", to_string(q.phase)},
              {"text", q.text},
              {"car_code", to_string(q.car_code)},
              {"open_code", to_string(q.open_code)},
              {"trigger_sentence", q.trigger_sentence}};
}

std::string bundle_to_json(const Bundle& bundle) {
  json doc;
  doc["participants"] = json::object();
  for (const auto& [pid, profile] : bundle.survey.participants) {
    doc["participants"][pid] = profile_to_json(profile);
  }
  doc["questions"] = json::array();
  for (const CodedQuestion& q : bundle.survey.questions) {
    doc["questions"].push_back(question_to_json(q));
  }
  doc["annotations"] = serialize_conllu(bundle.sentences);
  return doc.dump(2) + "\n";
}

Bundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus bundle: " + path);
  Bundle bundle;
  try {
    json doc = json::parse(in);
    for (const auto& [pid, node] : doc.at("participants").items()) {
      DemographicProfile profile;
      profile.is_caregiver = node.at("is_caregiver").get<bool>();
      profile.is_latinx = node.at("is_latinx").get<bool>();
      profile.platform = parse_platform(node.at("platform").get<std::string>());
      profile.read_frequency = node.at("read_frequency").get<int>();
      profile.experience_related = node.at("experience_related").get<bool>();
      bundle.survey.participants[pid] = profile;
    }
    for (const json& node : doc.at("questions")) {
      CodedQuestion q;
      q.question_id = node.at("question_id").get<std::string>();
      q.participant_id = node.at("participant_id").get<std::string>();
      q.story = Story::parse(node.at("story").get<std::string>());
      q.page = node.at("page").get<int>();
      q.phase = parse_phase(node.at("phase").get<std::string>());
      q.text = node.at("text").get<std::string>();
      q.car_code = parse_car(node.at("car_code").get<std::string>());
      q.open_code = parse_open(node.at("open_code").get<std::string>());
      q.trigger_sentence = node.value("trigger_sentence", std::string());
      bundle.survey.questions.push_back(std::move(q));
    }
    std::istringstream annotations(doc.at("annotations").get<std::string>());
    bundle.sentences = parse_conllu(annotations);
  } catch (const json::exception& e) {
    throw Error("corpus bundle " + path + " is malformed: " + e.what());
  }
  return bundle;
}

/// Shared config resolution: explicit flag wins, then the GENQ_CONFIG
/// environment variable, then built-in defaults.
Config resolve_config(const std::optional<std::string>& flag_path) {
  if (flag_path) return load_config(flag_path);
  if (const char* env = std::getenv("GENQ_CONFIG"); env != nullptr && *env != '\0') {
    return load_config(std::string(env));
  }
  return load_config(std::nullopt);
}

/// Splits a story's sentences into pages keyed by their "page" comment;
/// sentences without one share a single unlabeled page. Page order follows
/// first encounter.
std::vector<std::vector<AnnotatedSentence>> split_pages(
    const std::vector<AnnotatedSentence>& sentences) {
  std::vector<std::string> order;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<AnnotatedSentence>> pages;
  for (const AnnotatedSentence& sentence : sentences) {
    std::string label;
    if (auto it = sentence.meta.find("page"); it != sentence.meta.end()) label = it->second;
    auto found = index.find(label);
    if (found == index.end()) {
      found = index.emplace(label, pages.size()).first;
      pages.emplace_back();
    }
    pages[found->second].push_back(sentence);
  }
  return pages;
}

constexpr Outcome kOutcomes[] = {Outcome::relational, Outcome::abstract_q, Outcome::open_ended};

/// Per-(participant, story) count observations for the two named stories.
/// Units are pairs that actually contributed at least one coded question.
std::vector<CountObservation> regression_units(const SurveyCorpus& survey, Outcome outcome,
                                               int* skipped_other_stories) {
  std::set<std::pair<std::string, Story::Kind>> units;
  int skipped = 0;
  for (const CodedQuestion& q : survey.questions) {
    if (q.story.kind == Story::Kind::other) {
      ++skipped;
      continue;
    }
    units.emplace(q.participant_id, q.story.kind);
  }
  if (skipped_other_stories) *skipped_other_stories = skipped;
  std::vector<CountObservation> observations;
  for (const auto& [pid, kind] : units) {
    auto profile = survey.participants.find(pid);
    if (profile == survey.participants.end()) continue;
    CountObservation obs;
    obs.outcome = count_outcome(survey, pid, outcome, kind);
    obs.covariates["story"] = kind == Story::Kind::celebrations ? 1.0 : 0.0;
    obs.covariates["latinx"] = profile->second.is_latinx ? 1.0 : 0.0;
    obs.covariates["caregiver"] = profile->second.is_caregiver ? 1.0 : 0.0;
    obs.covariates["experience"] = profile->second.experience_related ? 1.0 : 0.0;
    obs.covariates["read_freq"] = static_cast<double>(profile->second.read_frequency);
    observations.push_back(std::move(obs));
  }
  return observations;
}

const char* outcome_heading(Outcome outcome) {
  switch (outcome) {
    case Outcome::relational: return "Relational";
    case Outcome::abstract_q: return "Abstract";
    default: return "Open-ended";
  }
}

struct AnalysisSection {
  std::string slug;     ///< file-name stem for CSV output
  std::string heading;  ///< printed above the text table
  TableRender render;
};

/// Builds every corpus-level table: per-demographic count summaries, reading
/// frequency, count regressions, the repeated-participant rank-sum
/// comparison, and question lengths by story.
std::vector<AnalysisSection> build_analysis(const SurveyCorpus& survey, const Config& config,
                                            std::ostream& err) {
  std::vector<AnalysisSection> sections;

  for (Outcome outcome : kOutcomes) {
    auto stats = descriptive_counts(survey, {"is_caregiver", "is_latinx"}, outcome);
    sections.push_back({std::string("counts_") + to_string(outcome),
                        std::string(outcome_heading(outcome)) +
                            " questions per participant, by caregiver and Latinx status",
                        report_table(stats, TableLayout::table3)});
  }

  sections.push_back({"read_frequency", "Reading frequency by caregiver status",
                      report_table(read_frequency_stats(survey, {"is_caregiver"}),
                                   TableLayout::table3)});

  FitOptions options;
  options.tol = config.glm_tol;
  options.max_iter = config.max_iter;
  const std::vector<std::string> terms = {"story", "latinx", "caregiver", "latinx:caregiver"};
  std::vector<RegressionTableEntry> models;
  int skipped = 0;
  for (Outcome outcome : kOutcomes) {
    auto observations = regression_units(survey, outcome, &skipped);
    if (observations.empty()) throw Error("no (participant, story) units for regression");
    models.push_back({outcome_heading(outcome), fit_negbin(observations, terms, options)});
  }
  if (skipped > 0) {
    err << "analyze: " << skipped << " questions from unnamed stories excluded from models\n";
  }
  sections.push_back({"regressions",
                      "Negative binomial models of question counts (story = celebrations)",
                      report_table(models, TableLayout::table4)});

  auto repeated = repeated_participants(survey);
  if (repeated.empty()) {
    err << "analyze: no repeated participants; skipping the story comparison\n";
  } else {
    std::vector<std::pair<std::string, RankSumResult>> rows;
    for (Outcome outcome : kOutcomes) {
      std::vector<double> farm;
      std::vector<double> celebrations;
      for (const std::string& pid : repeated) {
        farm.push_back(count_outcome(survey, pid, outcome, Story::Kind::best_farm));
        celebrations.push_back(count_outcome(survey, pid, outcome, Story::Kind::celebrations));
      }
      rows.emplace_back(std::string(outcome_heading(outcome)) + ": best_farm vs celebrations",
                        wilcoxon_rank_sum(farm, celebrations));
    }
    sections.push_back({"ranksum",
                        "Rank-sum comparison across stories (repeated participants, n = " +
                            std::to_string(repeated.size()) + ")",
                        report_table(rows, TableLayout::table5)});
  }

  sections.push_back({"lengths", "Relational question length by story",
                      report_table(mean_question_length(survey, {"story"}),
                                   TableLayout::table6)});
  return sections;
}

void print_sections(const std::vector<AnalysisSection>& sections, std::ostream& out) {
  for (const AnalysisSection& section : sections) {
    out << "== " << section.heading << " ==\n" << section.render.text << "\n";
  }
}

int run_ingest(const std::string& survey_path, const std::string& annotations_path,
               const std::string& out_path, std::ostream& err) {
  LoadReport report;
  Bundle bundle;
  bundle.survey = load_survey_csv(survey_path, SurveySchema{}, &report);
  bundle.sentences = parse_conllu_file(annotations_path);

  std::set<std::string> annotated;
  for (const AnnotatedSentence& sentence : bundle.sentences) annotated.insert(sentence.sentence_id);
  int missing = 0;
  for (const CodedQuestion& q : bundle.survey.questions) {
    if (!annotated.contains(q.question_id)) ++missing;
  }

  write_atomic(out_path, bundle_to_json(bundle));
  err << "ingest: " << report.rows_read << " rows -> " << bundle.survey.questions.size()
      << " questions from " << bundle.survey.participants.size() << " participants; "
      << bundle.sentences.size() << " annotated sentences\n";
  for (const std::string& line : report.rejected_rows) err << "ingest: rejected " << line << "\n";
  if (missing > 0) err << "ingest: " << missing << " questions have no annotation\n";
  return 0;
}

int run_kappa(const std::string& a_path, const std::string& b_path, std::ostream& out) {
  double kappa = cohen_kappa(load_label_column(a_path), load_label_column(b_path));
  out << format_fixed("%.6f", kappa) << "\n";
  return 0;
}

int run_extract(const std::string& corpus_path, const std::string& out_path,
                const Config& config, std::ostream& err) {
  Bundle bundle = load_bundle(corpus_path);
  TemplateCorpus corpus = build_corpus(bundle.survey, bundle.sentences, config.slot_config);
  corpus.provenance = corpus_path;
  persist_store(corpus, out_path);
  err << "extract: " << corpus.templates.size() << " templates ("
      << corpus.non_generative_count << " zero-slot questions dropped)\n";
  return 0;
}

int run_rank(const std::string& templates_path, int top_k, const std::string& out_path,
             std::ostream& out, std::ostream& err) {
  TemplateCorpus corpus = load_store(templates_path);
  int k = top_k;
  if (k > static_cast<int>(corpus.templates.size())) {
    k = static_cast<int>(corpus.templates.size());
    err << "rank: top-k clamped to corpus size " << k << "\n";
  }
  RankedTemplates ranked = rank_and_proportions(corpus, k);

  TemplateCorpus ordered;
  ordered.slot_config = corpus.slot_config;
  ordered.provenance = corpus.provenance;
  ordered.non_generative_count = corpus.non_generative_count;
  for (const auto& [tmpl, score] : ranked.entries) ordered.templates.push_back(tmpl);
  persist_store(ordered, out_path);

  out << report_table(ranked, TableLayout::table8).text;
  return 0;
}

int run_generate(const std::string& story_path, const std::string& templates_path,
                 const std::string& out_path, const GenerationFilters& filters,
                 std::ostream& err) {
  std::vector<AnnotatedSentence> sentences = parse_conllu_file(story_path);
  if (sentences.empty()) throw Error("story has no sentences: " + story_path);
  TemplateCorpus corpus = load_store(templates_path);
  int k = std::min(filters.top_k, static_cast<int>(corpus.templates.size()));
  RankedTemplates ranked = rank_and_proportions(corpus, std::max(k, 1));

  GenerationReport report;
  std::vector<GeneratedQuestion> questions;
  for (const std::vector<AnnotatedSentence>& page : split_pages(sentences)) {
    std::vector<GeneratedQuestion> generated = generate_for_page(page, ranked, filters, &report);
    questions.insert(questions.end(), std::make_move_iterator(generated.begin()),
                     std::make_move_iterator(generated.end()));
  }
  persist_questions(questions, out_path);

  err << "generate: " << questions.size() << " questions from " << report.sentences_seen
      << " sentences (" << report.candidates_accepted << " accepted, "
      << report.duplicates_dropped << " duplicates dropped)\n";
  if (filters.paraphrase) {
    err << "generate: paraphrase attempts " << report.paraphrase_attempts << ", failures "
        << report.paraphrase_failures << "\n";
  }
  return 0;
}

int run_analyze(const std::string& corpus_path, const std::optional<std::string>& out_prefix,
                const Config& config, std::ostream& out, std::ostream& err) {
  Bundle bundle = load_bundle(corpus_path);
  std::vector<AnalysisSection> sections = build_analysis(bundle.survey, config, err);
  print_sections(sections, out);
  if (out_prefix) {
    for (const AnalysisSection& section : sections) {
      std::string path = *out_prefix + "_" + section.slug + ".csv";
      write_atomic(path, section.render.csv);
      err << "analyze: wrote " << path << "\n";
    }
  }
  return 0;
}

int run_report(const std::string& corpus_path, const std::optional<std::string>& templates_path,
               int top_k, const std::optional<std::string>& out_path, const Config& config,
               std::ostream& out, std::ostream& err) {
  Bundle bundle = load_bundle(corpus_path);
  std::vector<AnalysisSection> sections = build_analysis(bundle.survey, config, err);
  if (templates_path) {
    TemplateCorpus corpus = load_store(*templates_path);
    int k = top_k;
    if (k > static_cast<int>(corpus.templates.size())) {
      k = static_cast<int>(corpus.templates.size());
      err << "report: top-k clamped to corpus size " << k << "\n";
    }
    RankedTemplates ranked = rank_and_proportions(corpus, k);
    sections.push_back({"template_mix",
                        "Demographic mix of the top-" + std::to_string(k) + " templates",
                        report_table(ranked, TableLayout::table8)});
  }
  std::ostringstream text;
  print_sections(sections, text);
  if (out_path) {
    write_atomic(*out_path, text.str());
    err << "report: wrote " << *out_path << "\n";
  } else {
    out << text.str();
  }
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"corpus-driven question generation over annotated children's stories"};
  app.name("genq");
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON config file (falls back to $GENQ_CONFIG)");

  std::string survey_path, annotations_path, a_path, b_path;
  std::string corpus_path, templates_path, story_path, out_path;
  std::optional<std::string> opt_out, opt_templates;
  std::optional<std::string> car_flag, open_flag, demographic_flag, paraphrase_url;
  std::optional<int> top_k_flag;
  std::optional<long> seed_flag;

  CLI::App* ingest = app.add_subcommand("ingest", "validate a coded survey into a corpus bundle");
  ingest->add_option("--survey", survey_path, "coded survey CSV")->required();
  ingest->add_option("--annotations", annotations_path, "CoNLL-U file for the coded questions")
      ->required();
  ingest->add_option("--out", out_path, "bundle JSON to write")->required();

  CLI::App* kappa = app.add_subcommand("kappa", "inter-rater agreement between two label files");
  kappa->add_option("--a", a_path, "first coder's label CSV")->required();
  kappa->add_option("--b", b_path, "second coder's label CSV")->required();

  CLI::App* extract = app.add_subcommand("extract", "extract templates from a corpus bundle");
  extract->add_option("--corpus", corpus_path, "corpus bundle JSON")->required();
  extract->add_option("--out", out_path, "template store JSONL to write")->required();

  CLI::App* rank = app.add_subcommand("rank", "order a template store by TF-IDF score");
  rank->add_option("--templates", templates_path, "template store JSONL")->required();
  rank->add_option("--top-k", top_k_flag, "rank depth for the demographic mix");
  rank->add_option("--out", out_path, "ranked template store JSONL to write")->required();

  CLI::App* generate = app.add_subcommand("generate", "generate questions for a story");
  generate->add_option("--story", story_path, "story CoNLL-U file")->required();
  generate->add_option("--templates", templates_path, "template store JSONL")->required();
  generate->add_option("--out", out_path, "generated questions JSONL to write")->required();
  generate->add_option("--car", car_flag, "only templates with this code")
      ->check(CLI::IsMember({"C", "A", "R"}));
  generate->add_option("--open", open_flag, "only templates with this code")
      ->check(CLI::IsMember({"open", "closed"}));
  generate->add_option("--demographic", demographic_flag, "only templates from this cell")
      ->check(CLI::IsMember({"latinx_caregiver", "latinx_noncaregiver", "nonlatinx_caregiver",
                             "nonlatinx_noncaregiver"}));
  generate->add_option("--top-k", top_k_flag, "template pool depth");
  generate->add_option("--paraphrase-url", paraphrase_url, "paraphrase service endpoint");
  generate->add_option("--seed", seed_flag, "reserved; the pipeline is deterministic");

  CLI::App* analyze = app.add_subcommand("analyze", "summary tables and models for a bundle");
  analyze->add_option("--corpus", corpus_path, "corpus bundle JSON")->required();
  analyze->add_option("--out", opt_out, "prefix for per-table CSV files");

  CLI::App* report = app.add_subcommand("report", "combined text report for a bundle");
  report->add_option("--corpus", corpus_path, "corpus bundle JSON")->required();
  report->add_option("--templates", opt_templates, "template store JSONL for the mix table");
  report->add_option("--top-k", top_k_flag, "rank depth for the demographic mix");
  report->add_option("--out", opt_out, "write the report here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);

    if (seed_flag) err << "generate: --seed is ignored; generation is deterministic\n";

    if (kappa->parsed()) return run_kappa(a_path, b_path, out);
    if (ingest->parsed()) return run_ingest(survey_path, annotations_path, out_path, err);

    Config config = resolve_config(config_path);
    int top_k = top_k_flag.value_or(config.top_k);
    if (top_k < 1) throw Error("top-k must be at least 1");

    if (extract->parsed()) return run_extract(corpus_path, out_path, config, err);
    if (rank->parsed()) return run_rank(templates_path, top_k, out_path, out, err);
    if (generate->parsed()) {
      GenerationFilters filters;
      if (car_flag) filters.car_code = parse_car(*car_flag);
      if (open_flag) filters.open_code = parse_open(*open_flag);
      if (demographic_flag) filters.demographic = Demographic::parse(*demographic_flag);
      filters.top_k = top_k;
      filters.max_per_sentence = config.max_per_sentence;
      filters.quota = config.quota;
      filters.paraphrase = config.paraphrase;
      if (paraphrase_url) {
        if (!filters.paraphrase) filters.paraphrase = ParaphraseConfig{};
        filters.paraphrase->url = *paraphrase_url;
      }
      return run_generate(story_path, templates_path, out_path, filters, err);
    }
    if (analyze->parsed()) return run_analyze(corpus_path, opt_out, config, out, err);
    if (report->parsed()) {
      return run_report(corpus_path, opt_templates, top_k, opt_out, config, out, err);
    }
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "genq: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "genq: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace genq
