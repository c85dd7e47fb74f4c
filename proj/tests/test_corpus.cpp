#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "genq/corpus.hpp"

using namespace genq;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

const char* kHeader =
    "participant_id,platform,story,is_caregiver,is_latinx,read_frequency,"
    "experience_related,page,phase,question_text,car_code,open_code\n";

SurveyCorpus load_inline(const std::string& name, const std::string& rows,
                         LoadReport* report = nullptr) {
  return load_survey_csv(write_temp(name, std::string(kHeader) + rows), {}, report);
}

}  // namespace

TEST_CASE("load_survey_csv splits multi-question cells") {
  LoadReport report;
  auto corpus = load_inline("split.csv",
                            "p1,prolific,best_farm,yes,no,2,no,1,during,"
                            "\"Who is Sofia? What is mole?\",C,closed\n",
                            &report);
  REQUIRE(corpus.questions.size() == 2);
  CHECK(corpus.questions[0].text == "Who is Sofia?");
  CHECK(corpus.questions[1].text == "What is mole?");
  CHECK(corpus.questions[0].question_id == "p1:r1:q0");
  CHECK(corpus.questions[1].question_id == "p1:r1:q1");
  // identical metadata on both records
  CHECK(corpus.questions[0].participant_id == corpus.questions[1].participant_id);
  CHECK(corpus.questions[0].story == corpus.questions[1].story);
  CHECK(corpus.questions[0].page == corpus.questions[1].page);
  CHECK(corpus.questions[0].car_code == corpus.questions[1].car_code);
  CHECK(report.questions_loaded == 2);
  CHECK(report.rows_read == 1);

  // no interior `?` followed by more text
  for (const auto& q : corpus.questions) {
    auto pos = q.text.find('?');
    CHECK(pos == q.text.size() - 1);
  }
}

TEST_CASE("load_survey_csv fills profile and phase fields") {
  auto corpus = load_inline("fields.csv",
                            "p2,mturk,celebrations,no,yes,3,yes,4,after,"
                            "Have you seen fireworks?,R,open\n");
  REQUIRE(corpus.participants.size() == 1);
  const auto& profile = corpus.participants.at("p2");
  CHECK(profile.platform == Platform::mturk);
  CHECK(!profile.is_caregiver);
  CHECK(profile.is_latinx);
  CHECK(profile.read_frequency == 3);
  CHECK(profile.experience_related);
  const auto& q = corpus.questions.at(0);
  CHECK(q.story.kind == Story::Kind::celebrations);
  CHECK(q.page == 4);
  CHECK(q.phase == Phase::after_page);
  CHECK(q.car_code == CarCode::R);
  CHECK(q.open_code == OpenCode::open);
}

TEST_CASE("load_survey_csv appends the question mark to unterminated cells") {
  auto corpus = load_inline("noq.csv",
                            "p1,other,best_farm,yes,yes,1,no,2,during,"
                            "what do pigs eat,A,open\n");
  REQUIRE(corpus.questions.size() == 1);
  CHECK(corpus.questions[0].text == "what do pigs eat?");
}

TEST_CASE("load_survey_csv rejects rows with missing codes") {
  LoadReport report;
  auto corpus = load_inline("reject.csv",
                            "p1,prolific,best_farm,yes,no,2,no,1,during,Why?,C,closed\n"
                            "p2,prolific,best_farm,yes,no,2,no,1,during,How?,,closed\n"
                            "p3,prolific,best_farm,yes,no,2,no,1,during,,C,closed\n",
                            &report);
  CHECK(corpus.questions.size() == 1);
  CHECK(corpus.participants.size() == 1);
  CHECK(report.rejected_rows.size() == 2);
  CHECK(report.rows_read == 3);
}

TEST_CASE("load_survey_csv raises BadEnumValue with row and column") {
  try {
    load_inline("badenum.csv",
                "p1,prolific,best_farm,yes,no,2,no,1,during,Why?,X,closed\n");
    FAIL("expected BadEnumValue");
  } catch (const BadEnumValue& e) {
    CHECK(e.row == 1);
    CHECK(e.column == "car_code");
  }
  CHECK_THROWS_AS(load_inline("badenum2.csv",
                              "p1,prolific,best_farm,yes,no,9,no,1,during,Why?,C,closed\n"),
                  BadEnumValue);
  CHECK_THROWS_AS(load_inline("badenum3.csv",
                              "p1,prolific,best_farm,yes,no,2,no,zero,during,Why?,C,closed\n"),
                  BadEnumValue);
}

TEST_CASE("load_survey_csv requires the documented header") {
  auto path = write_temp("nocol.csv", "participant_id,platform\np1,mturk\n");
  CHECK_THROWS_AS(load_survey_csv(path), MissingColumn);
}

TEST_CASE("load_survey_csv tolerates empty files with a warning") {
  LoadReport report;
  auto corpus = load_survey_csv(write_temp("empty.csv", std::string(kHeader)), {}, &report);
  CHECK(corpus.participants.empty());
  CHECK(corpus.questions.empty());
  CHECK(report.empty_file);

  LoadReport report2;
  auto corpus2 = load_survey_csv(write_temp("empty2.csv", ""), {}, &report2);
  CHECK(corpus2.participants.empty());
  CHECK(report2.empty_file);
}

TEST_CASE("load_survey_csv handles quoted fields with commas") {
  auto corpus = load_inline("quoted.csv",
                            "p1,prolific,\"farm, the best\",yes,no,2,no,1,during,"
                            "\"Why, though?\",A,open\n");
  REQUIRE(corpus.questions.size() == 1);
  CHECK(corpus.questions[0].story.kind == Story::Kind::other);
  CHECK(corpus.questions[0].story.name == "farm, the best");
  CHECK(corpus.questions[0].text == "Why, though?");
}

TEST_CASE("cohen_kappa matches the hand examples") {
  // p_o = 0.75, p_e = 0.3125, kappa = 0.4375/0.6875 = 7/11 -> prints 0.636364
  double kappa = cohen_kappa({"C", "C", "A", "R"}, {"C", "A", "A", "R"});
  CHECK(std::abs(kappa - 0.4375 / 0.6875) <= 1e-9);
  char printed[16];
  std::snprintf(printed, sizeof printed, "%.6f", kappa);
  CHECK(std::string(printed) == "0.636364");
  CHECK(cohen_kappa({"C", "A", "R", "A"}, {"C", "A", "R", "A"}) == doctest::Approx(1.0));
  CHECK(cohen_kappa({"C", "A"}, {"A", "C"}) == doctest::Approx(-1.0));
}

TEST_CASE("cohen_kappa is symmetric") {
  std::vector<std::string> a = {"C", "C", "A", "R", "R", "A", "C"};
  std::vector<std::string> b = {"C", "A", "A", "R", "C", "A", "R"};
  CHECK(cohen_kappa(a, b) == doctest::Approx(cohen_kappa(b, a)));
}

TEST_CASE("cohen_kappa error cases") {
  CHECK_THROWS_AS(cohen_kappa({"C"}, {"C", "A"}), LengthMismatch);
  CHECK_THROWS_AS(cohen_kappa({"C", "C"}, {"C", "C"}), DegenerateMarginals);
  CHECK_THROWS_AS(cohen_kappa({}, {}), Error);
}

TEST_CASE("load_label_column reads one label per row and skips a header") {
  auto path = write_temp("labels.csv", "label\nC\nA\nR\n");
  auto labels = load_label_column(path);
  REQUIRE(labels.size() == 3);
  CHECK(labels[0] == "C");
  CHECK(labels[2] == "R");

  auto bare = load_label_column(write_temp("labels2.csv", "C\nA\n"));
  CHECK(bare.size() == 2);
}

namespace {

// Nine participants over two demographic cells, with known relational counts.
std::string stats_rows() {
  std::string rows;
  auto row = [&](const std::string& pid, const std::string& caregiver,
                 const std::string& latinx, int relational) {
    // one A question so every participant exists even with 0 R
    rows += pid + ",prolific,best_farm," + caregiver + "," + latinx +
            ",2,no,1,during,What color is the barn,A,closed\n";
    for (int i = 0; i < relational; ++i)
      rows += pid + ",prolific,best_farm," + caregiver + "," + latinx +
              ",2,no,1,during,Have you fed a horse,R,open\n";
  };
  row("p1", "yes", "yes", 0);
  row("p2", "yes", "yes", 1);
  row("p3", "yes", "yes", 2);
  row("p4", "no", "yes", 4);
  row("p5", "no", "yes", 4);
  return rows;
}

}  // namespace

TEST_CASE("descriptive_counts aggregates per participant") {
  auto corpus = load_inline("stats.csv", stats_rows());
  auto table = descriptive_counts(corpus, {"is_caregiver"}, Outcome::relational);
  REQUIRE(table.size() == 2);
  // groups sort by value: no < yes
  CHECK(table[0].group.label() == "is_caregiver=no");
  CHECK(table[0].n == 2);
  CHECK(table[0].mean == doctest::Approx(4.0));
  CHECK(table[1].group.label() == "is_caregiver=yes");
  CHECK(table[1].n == 3);
  CHECK(table[1].mean == doctest::Approx(1.0));
  CHECK(table[1].sd == doctest::Approx(1.0));

  int total = 0;
  for (const auto& g : table) total += g.n;
  CHECK(total == static_cast<int>(corpus.participants.size()));
}

TEST_CASE("descriptive_counts flags single-participant groups") {
  auto corpus = load_inline("single.csv",
                            "p1,mturk,best_farm,yes,no,1,no,1,during,Why?,R,open\n");
  auto table = descriptive_counts(corpus, {"is_latinx"}, Outcome::relational);
  REQUIRE(table.size() == 1);
  CHECK(table[0].n == 1);
  CHECK(table[0].sd == 0.0);
  CHECK(table[0].n_lt_2);
}

TEST_CASE("descriptive_counts crosses caregiver and latinx factors") {
  auto corpus = load_inline("cross.csv", stats_rows());
  auto table =
      descriptive_counts(corpus, {"is_caregiver", "is_latinx"}, Outcome::relational);
  REQUIRE(table.size() == 2);  // only two cells are populated
  CHECK(table[0].group.label() == "is_caregiver=no, is_latinx=yes");
  CHECK(table[1].group.label() == "is_caregiver=yes, is_latinx=yes");
}

TEST_CASE("descriptive_counts rejects unknown factors") {
  auto corpus = load_inline("unknown.csv", stats_rows());
  CHECK_THROWS_AS(descriptive_counts(corpus, {"shoe_size"}, Outcome::relational),
                  UnknownFactor);
}

TEST_CASE("descriptive_counts respects outcome and phase filters") {
  auto corpus = load_inline(
      "phases.csv",
      "p1,prolific,best_farm,yes,no,2,no,1,during,Why is it red,A,open\n"
      "p1,prolific,best_farm,yes,no,2,no,1,after,Have you been there,R,open\n");
  auto after =
      descriptive_counts(corpus, {"is_caregiver"}, Outcome::relational, PhaseFilter::after_only);
  CHECK(after[0].mean == doctest::Approx(1.0));
  auto during =
      descriptive_counts(corpus, {"is_caregiver"}, Outcome::relational, PhaseFilter::during_only);
  CHECK(during[0].mean == doctest::Approx(0.0));
  auto open_ended = descriptive_counts(corpus, {"is_caregiver"}, Outcome::open_ended);
  CHECK(open_ended[0].mean == doctest::Approx(2.0));
}

TEST_CASE("mean_question_length averages whitespace tokens of relational questions") {
  auto corpus = load_inline(
      "lengths.csv",
      "p1,prolific,best_farm,yes,no,2,no,1,during,How are you,R,open\n"
      "p2,prolific,best_farm,no,no,2,no,1,during,a b c d e f g h,R,open\n"
      "p2,prolific,best_farm,no,no,2,no,1,during,a b c d e f g h i j,R,open\n"
      "p3,prolific,best_farm,no,yes,2,no,1,during,Why,A,open\n");
  auto table = mean_question_length(corpus, {"is_caregiver"});
  REQUIRE(table.size() == 2);
  CHECK(table[0].group.label() == "is_caregiver=no");
  CHECK(table[0].n_questions == 2);
  CHECK(*table[0].mean_length == doctest::Approx(9.0));
  CHECK(*table[1].mean_length == doctest::Approx(3.0));

  // group of p3 (latinx=yes) has no relational questions -> NA
  auto by_latinx = mean_question_length(corpus, {"is_latinx"});
  REQUIRE(by_latinx.size() == 2);
  CHECK(by_latinx[1].group.label() == "is_latinx=yes");
  CHECK(!by_latinx[1].mean_length.has_value());
}

TEST_CASE("repeated_participants selects ids present under both stories") {
  auto corpus = load_inline(
      "repeat.csv",
      "p1,prolific,best_farm,yes,no,2,no,1,during,Why?,C,closed\n"
      "p1,prolific,celebrations,yes,no,2,no,1,during,How?,C,closed\n"
      "p2,prolific,best_farm,yes,no,2,no,1,during,Who?,C,closed\n");
  auto repeated = repeated_participants(corpus);
  REQUIRE(repeated.size() == 1);
  CHECK(repeated[0] == "p1");

  CHECK(count_outcome(corpus, "p1", Outcome::relational, std::nullopt) == 0);
  CHECK(count_outcome(corpus, "p1", Outcome::abstract_q, std::nullopt) == 0);
  CHECK(count_outcome(corpus, "p1", Outcome::open_ended, Story::Kind::best_farm) == 0);
}

TEST_CASE("count_outcome restricts by story") {
  auto corpus = load_inline(
      "counts.csv",
      "p1,prolific,best_farm,yes,no,2,no,1,during,Have you milked a cow,R,open\n"
      "p1,prolific,celebrations,yes,no,2,no,1,during,Have you danced,R,open\n"
      "p1,prolific,celebrations,yes,no,2,no,2,after,Have you sung,R,open\n");
  CHECK(count_outcome(corpus, "p1", Outcome::relational, std::nullopt) == 3);
  CHECK(count_outcome(corpus, "p1", Outcome::relational, Story::Kind::celebrations) == 2);
  CHECK(count_outcome(corpus, "p1", Outcome::relational, Story::Kind::best_farm) == 1);
}

TEST_CASE("story grouping switches the aggregation unit") {
  auto corpus = load_inline(
      "bystory.csv",
      "p1,prolific,best_farm,yes,no,2,no,1,during,Have you fed pigs,R,open\n"
      "p1,prolific,celebrations,yes,no,2,no,1,during,What is it,A,closed\n"
      "p2,prolific,best_farm,no,no,2,no,1,during,Have you fed hens,R,open\n");
  auto table = descriptive_counts(corpus, {"story"}, Outcome::relational);
  REQUIRE(table.size() == 2);
  CHECK(table[0].group.label() == "story=best_farm");
  CHECK(table[0].n == 2);
  CHECK(table[0].mean == doctest::Approx(1.0));
  CHECK(table[1].group.label() == "story=celebrations");
  CHECK(table[1].n == 1);
  CHECK(table[1].mean == doctest::Approx(0.0));
}

TEST_CASE("read_frequency_stats averages the ordinal per group") {
  auto corpus = load_inline(
      "freq.csv",
      "p1,prolific,best_farm,yes,no,0,no,1,during,Why?,C,closed\n"
      "p2,prolific,best_farm,yes,no,2,no,1,during,Why not?,C,closed\n");
  auto table = read_frequency_stats(corpus, {"is_caregiver"});
  REQUIRE(table.size() == 1);
  CHECK(table[0].mean == doctest::Approx(1.0));
  CHECK(table[0].n == 2);
}
