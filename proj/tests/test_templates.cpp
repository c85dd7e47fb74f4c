#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "genq/templates.hpp"

using namespace genq;

namespace {

Token tok(int index, const std::string& form, Upos upos, const std::string& deprel = "") {
  Token t;
  t.index = index;
  t.form = form;
  t.lemma = form;
  t.upos = upos;
  t.deprel = deprel;
  return t;
}

AnnotatedSentence sentence(const std::string& id, std::vector<Token> tokens) {
  AnnotatedSentence s;
  s.sentence_id = id;
  s.tokens = std::move(tokens);
  return s;
}

// "What is an earthquake?" with copular annotation.
AnnotatedSentence earthquake_question() {
  return sentence("q1", {tok(0, "What", Upos::PRON), tok(1, "is", Upos::AUX, "cop"),
                         tok(2, "an", Upos::DET, "det"),
                         tok(3, "earthquake", Upos::NOUN, "nsubj"),
                         tok(4, "?", Upos::PUNCT, "punct")});
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("extract_template abstracts the earthquake question") {
  auto t = extract_template(earthquake_question(), CarCode::C, OpenCode::closed, {});
  CHECK(t.pattern() == "What AUX DET NSUBJ");
  CHECK(t.slot_count() == 3);
  CHECK(t.elements[0].word == "What");
  CHECK(t.elements[1].slot == SlotLabel::AUX);
  CHECK(t.elements[3].slot == SlotLabel::NSUBJ);
  CHECK(t.source_question_id == "q1");
}

TEST_CASE("extract_template keeps the whitelist literal only at the head") {
  // mid-question "is" abstracts to a slot; the head "What" stays literal
  auto q = sentence("q2", {tok(0, "what", Upos::PRON), tok(1, "time", Upos::NOUN),
                           tok(2, "is", Upos::AUX), tok(3, "it", Upos::PRON),
                           tok(4, "?", Upos::PUNCT)});
  auto t = extract_template(q, CarCode::C, OpenCode::closed, {});
  CHECK(t.pattern() == "What NOUN AUX it");
}

TEST_CASE("extract_template prefers dependency slots over POS slots") {
  // "earthquake" is a NOUN but carries nsubj; NSUBJ wins over NOUN
  auto t = extract_template(earthquake_question(), CarCode::C, OpenCode::closed, {});
  CHECK(t.elements[3].slot == SlotLabel::NSUBJ);

  // drop NSUBJ from the active set: the deprel no longer maps, NOUN takes over
  auto config = SlotConfig::defaults();
  config.slots.erase(std::remove(config.slots.begin(), config.slots.end(), SlotLabel::NSUBJ),
                     config.slots.end());
  auto t2 = extract_template(earthquake_question(), CarCode::C, OpenCode::closed, {}, config);
  CHECK(t2.elements[3].slot == SlotLabel::NOUN);
}

TEST_CASE("extract_template reproduces the stored caregiver exemplar") {
  // narrowed slot set leaves verbs and adjectives literal
  SlotConfig config;
  config.slots = {SlotLabel::NSUBJ, SlotLabel::DOBJ, SlotLabel::POBJ, SlotLabel::DET,
                  SlotLabel::PREP};
  config.interrogative_whitelist = SlotConfig::defaults().interrogative_whitelist;

  auto q = sentence(
      "q3", {tok(0, "have", Upos::AUX), tok(1, "your", Upos::PRON),
             tok(2, "kids", Upos::NOUN, "nsubj"), tok(3, "ever", Upos::ADV),
             tok(4, "forgotten", Upos::VERB, "root"), tok(5, "important", Upos::ADJ),
             tok(6, "items", Upos::NOUN, "dobj"), tok(7, "in", Upos::ADP),
             tok(8, "the", Upos::DET), tok(9, "backpack", Upos::NOUN, "pobj"),
             tok(10, "?", Upos::PUNCT)});
  auto t = extract_template(q, CarCode::R, OpenCode::open, {false, true}, config);
  CHECK(t.pattern() == "Have your NSUBJ ever forgotten important DOBJ PREP DET POBJ");
}

TEST_CASE("extract_template rejects slotless and empty questions") {
  auto bare = sentence("q4", {tok(0, "Really", Upos::INTJ), tok(1, "?", Upos::PUNCT)});
  CHECK_THROWS_AS(extract_template(bare, CarCode::C, OpenCode::closed, {}), NonGenerative);
  CHECK_THROWS_AS(extract_template(sentence("q5", {}), CarCode::C, OpenCode::closed, {}),
                  EmptyQuestion);
  // a lone trailing ? leaves nothing behind
  auto only_q = sentence("q6", {tok(0, "?", Upos::PUNCT)});
  CHECK_THROWS_AS(extract_template(only_q, CarCode::C, OpenCode::closed, {}), NonGenerative);
}

namespace {

SurveyCorpus tiny_survey(const std::vector<std::pair<std::string, CarCode>>& rows) {
  SurveyCorpus survey;
  int n = 0;
  for (const auto& [pid, car] : rows) {
    survey.participants.try_emplace(pid);
    CodedQuestion q;
    q.question_id = "q" + std::to_string(++n);
    q.participant_id = pid;
    q.car_code = car;
    q.open_code = OpenCode::closed;
    survey.questions.push_back(q);
  }
  return survey;
}

}  // namespace

TEST_CASE("build_corpus joins annotations, dedupes, counts non-generative") {
  auto survey = tiny_survey({{"p1", CarCode::C},
                             {"p2", CarCode::C},
                             {"p3", CarCode::A},
                             {"p4", CarCode::R}});
  // q1 and q2: the same question text from different participants
  std::vector<AnnotatedSentence> annotations;
  auto eq = earthquake_question();
  eq.sentence_id = "q1";
  annotations.push_back(eq);
  eq.sentence_id = "q2";
  annotations.push_back(eq);
  annotations.push_back(sentence(
      "q3", {tok(0, "Why", Upos::ADV), tok(1, "do", Upos::AUX),
             tok(2, "people", Upos::NOUN, "nsubj"), tok(3, "dance", Upos::VERB, "root"),
             tok(4, "?", Upos::PUNCT)}));
  annotations.push_back(sentence("q4", {tok(0, "Really", Upos::INTJ),
                                        tok(1, "?", Upos::PUNCT)}));

  auto corpus = build_corpus(survey, annotations);
  REQUIRE(corpus.templates.size() == 2);
  CHECK(corpus.templates[0].duplicate_count == 2);
  CHECK(corpus.templates[0].source_question_id == "q1");
  CHECK(corpus.templates[0].template_id == "t0001");
  CHECK(corpus.templates[1].duplicate_count == 1);
  CHECK(corpus.non_generative_count == 1);
}

TEST_CASE("build_corpus partitions by car_code on a balanced fixture") {
  auto survey = tiny_survey({{"p1", CarCode::C}, {"p2", CarCode::C},
                             {"p3", CarCode::A}, {"p4", CarCode::A},
                             {"p5", CarCode::R}, {"p6", CarCode::R}});
  std::vector<AnnotatedSentence> annotations;
  // distinct adverb literals keep the six element sequences distinct
  const char* advs[] = {"often", "rarely", "loudly", "gently", "today", "together"};
  for (int i = 0; i < 6; ++i) {
    annotations.push_back(sentence(
        "q" + std::to_string(i + 1),
        {tok(0, "Do", Upos::AUX), tok(1, "cows", Upos::NOUN, "nsubj"),
         tok(2, "run", Upos::VERB, "root"), tok(3, advs[i], Upos::ADV),
         tok(4, "?", Upos::PUNCT)}));
  }
  auto corpus = build_corpus(survey, annotations);
  REQUIRE(corpus.templates.size() == 6);
  int c = 0, a = 0, r = 0;
  for (const auto& t : corpus.templates) {
    if (t.car_code == CarCode::C) ++c;
    if (t.car_code == CarCode::A) ++a;
    if (t.car_code == CarCode::R) ++r;
  }
  CHECK(c == 2);
  CHECK(a == 2);
  CHECK(r == 2);
}

TEST_CASE("build_corpus errors on a missing annotation") {
  auto survey = tiny_survey({{"p1", CarCode::C}});
  try {
    build_corpus(survey, {});
    FAIL("expected MissingAnnotation");
  } catch (const MissingAnnotation& e) {
    CHECK(e.question_id == "q1");
  }
}

TEST_CASE("build_corpus is stable under re-extraction") {
  auto survey = tiny_survey({{"p1", CarCode::C}, {"p2", CarCode::A}});
  std::vector<AnnotatedSentence> annotations;
  auto eq = earthquake_question();
  eq.sentence_id = "q1";
  annotations.push_back(eq);
  annotations.push_back(sentence(
      "q2", {tok(0, "Why", Upos::ADV), tok(1, "do", Upos::AUX),
             tok(2, "people", Upos::NOUN, "nsubj"), tok(3, "dance", Upos::VERB, "root"),
             tok(4, "?", Upos::PUNCT)}));
  auto once = build_corpus(survey, annotations);
  auto twice = build_corpus(survey, annotations);
  CHECK(once.templates == twice.templates);
}

TEST_CASE("template store round-trips") {
  auto survey = tiny_survey({{"p1", CarCode::C}, {"p2", CarCode::A}, {"p3", CarCode::R}});
  std::vector<AnnotatedSentence> annotations;
  auto eq = earthquake_question();
  eq.sentence_id = "q1";
  annotations.push_back(eq);
  annotations.push_back(sentence(
      "q2", {tok(0, "Why", Upos::ADV), tok(1, "do", Upos::AUX),
             tok(2, "people", Upos::NOUN, "nsubj"), tok(3, "dance", Upos::VERB, "root"),
             tok(4, "?", Upos::PUNCT)}));
  annotations.push_back(sentence(
      "q3", {tok(0, "Have", Upos::AUX), tok(1, "you", Upos::PRON, "nsubj"),
             tok(2, "seen", Upos::VERB, "root"), tok(3, "a", Upos::DET),
             tok(4, "parade", Upos::NOUN, "dobj"), tok(5, "?", Upos::PUNCT)}));
  auto corpus = build_corpus(survey, annotations);
  corpus.templates[0].demographic = {true, true};
  corpus.templates[1].demographic = {true, false};

  auto path = temp_path("store.jsonl");
  persist_store(corpus, path);
  auto loaded = load_store(path);
  CHECK(loaded.templates == corpus.templates);
}

TEST_CASE("load_store rejects bad records and duplicate ids") {
  auto bad = temp_path("bad.jsonl");
  {
    std::ofstream out(bad);
    out << R"({"template_id":"t1","elements":[{"kind":"blob","value":"x"}],)"
        << R"("car_code":"C","open_code":"open",)"
        << R"("demographic":{"latinx":true,"caregiver":false},"source_question_id":"q1"})"
        << "\n";
  }
  try {
    load_store(bad);
    FAIL("expected BadRecord");
  } catch (const BadRecord& e) {
    CHECK(e.line == 1);
  }

  auto dup = temp_path("dup.jsonl");
  {
    std::ofstream out(dup);
    std::string record =
        R"({"template_id":"t1","elements":[{"kind":"slot","value":"AUX"}],)"
        R"("car_code":"C","open_code":"open",)"
        R"("demographic":{"latinx":true,"caregiver":false},"source_question_id":"q1"})";
    out << record << "\n" << record << "\n";
  }
  CHECK_THROWS_AS(load_store(dup), DuplicateTemplateId);

  auto empty = temp_path("emptystore.jsonl");
  std::ofstream(empty).close();
  CHECK(load_store(empty).templates.empty());

  auto garbled = temp_path("garbled.jsonl");
  {
    std::ofstream out(garbled);
    out << "not json\n";
  }
  CHECK_THROWS_AS(load_store(garbled), BadRecord);
}

namespace {

Template make_template(const std::string& id, std::vector<Element> elements,
                       Demographic demographic = {}) {
  Template t;
  t.template_id = id;
  t.elements = std::move(elements);
  t.demographic = demographic;
  return t;
}

}  // namespace

TEST_CASE("tfidf_scores matches the two-template hand example") {
  TemplateCorpus corpus;
  corpus.templates.push_back(make_template(
      "t1", {Element::lit("what"), Element::of(SlotLabel::AUX), Element::of(SlotLabel::NOUN)}));
  corpus.templates.push_back(
      make_template("t2", {Element::lit("why"), Element::of(SlotLabel::AUX)}));

  auto scores = tfidf_scores(corpus);
  CHECK(scores.at("t1") == doctest::Approx(1.537901).epsilon(1e-5));
  CHECK(scores.at("t2") == doctest::Approx(1.303658).epsilon(1e-5));

  auto ranked = rank_and_proportions(corpus, 1);
  CHECK(ranked.entries[0].first.template_id == "t1");
}

TEST_CASE("tfidf_scores is positive and errors on an empty corpus") {
  TemplateCorpus one;
  one.templates.push_back(make_template("t1", {Element::of(SlotLabel::NOUN)}));
  CHECK(tfidf_scores(one).at("t1") > 0.0);
  CHECK_THROWS_AS(tfidf_scores(TemplateCorpus{}), EmptyCorpus);
}

TEST_CASE("tfidf_scores is exactly invariant under corpus permutation") {
  TemplateCorpus corpus;
  const char* words[] = {"what", "why", "how", "who", "farm", "mole", "dance", "sing"};
  for (int i = 0; i < 24; ++i) {
    std::vector<Element> elements = {Element::lit(words[i % 8]),
                                     Element::of(static_cast<SlotLabel>(i % 11))};
    if (i % 3 == 0) elements.push_back(Element::lit(words[(i + 3) % 8]));
    corpus.templates.push_back(make_template("t" + std::to_string(i), std::move(elements)));
  }
  auto base = tfidf_scores(corpus);

  TemplateCorpus shuffled = corpus;
  std::reverse(shuffled.templates.begin(), shuffled.templates.end());
  std::rotate(shuffled.templates.begin(), shuffled.templates.begin() + 7,
              shuffled.templates.end());
  auto permuted = tfidf_scores(shuffled);
  REQUIRE(base.size() == permuted.size());
  for (const auto& [id, score] : base) CHECK(score == permuted.at(id));  // bit-exact
}

TEST_CASE("rank_and_proportions orders by score with id tie-break") {
  TemplateCorpus corpus;
  // identical element sequences => identical scores => id decides
  corpus.templates.push_back(make_template("tb", {Element::of(SlotLabel::AUX)}));
  corpus.templates.push_back(make_template("ta", {Element::of(SlotLabel::AUX)}));
  auto ranked = rank_and_proportions(corpus, 2);
  CHECK(ranked.entries[0].first.template_id == "ta");
  CHECK(ranked.entries[1].first.template_id == "tb");
  for (std::size_t i = 1; i < ranked.entries.size(); ++i)
    CHECK(ranked.entries[i - 1].second >= ranked.entries[i].second);
}

TEST_CASE("rank_and_proportions percentages cover the four cells and sum to 100") {
  TemplateCorpus corpus;
  int n = 0;
  for (bool latinx : {true, false})
    for (bool caregiver : {true, false})
      for (int i = 0; i < 3; ++i)
        corpus.templates.push_back(
            make_template("t" + std::to_string(++n),
                          {Element::lit("w" + std::to_string(n)),
                           Element::of(SlotLabel::NOUN)},
                          {latinx, caregiver}));

  auto ranked = rank_and_proportions(corpus, 8);
  REQUIRE(ranked.proportions.size() == 4);
  double total = 0.0;
  for (const auto& share : ranked.proportions) total += share.percent;
  CHECK(std::abs(total - 100.0) < 0.1);

  // k = corpus size reproduces each group's base rate
  auto full = rank_and_proportions(corpus, 12);
  for (const auto& share : full.proportions) CHECK(share.percent == doctest::Approx(25.0));

  CHECK_THROWS_AS(rank_and_proportions(corpus, 13), KTooLarge);
  CHECK_THROWS_AS(rank_and_proportions(corpus, 0), KTooLarge);
}

TEST_CASE("a group with term-rich templates beats its base rate in the top-k") {
  TemplateCorpus corpus;
  int n = 0;
  // three plain templates per non-target cell, drawn from a tiny shared pool
  for (Demographic d : {Demographic{false, false}, {false, true}, {true, false}}) {
    for (int i = 0; i < 3; ++i)
      corpus.templates.push_back(make_template(
          "t" + std::to_string(++n),
          {Element::lit("did"), Element::of(SlotLabel::NSUBJ), Element::of(SlotLabel::VERB)},
          d));
  }
  // target cell: distinctive vocabulary and denser templates
  const char* rare[] = {"tamales", "mariachi", "abuela"};
  for (int i = 0; i < 3; ++i)
    corpus.templates.push_back(make_template(
        "t" + std::to_string(++n),
        {Element::lit("have"), Element::of(SlotLabel::NSUBJ), Element::lit("ever"),
         Element::lit(rare[i]), Element::of(SlotLabel::PREP), Element::of(SlotLabel::POBJ)},
        {true, true}));

  auto ranked = rank_and_proportions(corpus, 4);
  double target_share = 0.0;
  for (const auto& share : ranked.proportions)
    if (share.group == "latinx_caregiver") target_share = share.percent;
  CHECK(target_share > 25.0);  // base rate is 3/12
}
