#include "genq/templates.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace genq {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Dependency labels take precedence over POS tags during extraction.
std::optional<SlotLabel> slot_for_deprel(const std::string& deprel) {
  if (deprel == "nsubj") return SlotLabel::NSUBJ;
  if (deprel == "dobj") return SlotLabel::DOBJ;
  if (deprel == "pobj") return SlotLabel::POBJ;
  if (deprel == "root") return SlotLabel::ROOT;
  return std::nullopt;
}

std::optional<SlotLabel> slot_for_upos(Upos upos) {
  switch (upos) {
    case Upos::AUX: return SlotLabel::AUX;
    case Upos::DET: return SlotLabel::DET;
    case Upos::ADP: return SlotLabel::PREP;
    case Upos::NOUN: return SlotLabel::NOUN;
    case Upos::VERB: return SlotLabel::VERB;
    case Upos::ADJ: return SlotLabel::ADJ;
    case Upos::PROPN: return SlotLabel::PROPN;
    default: return std::nullopt;
  }
}

// Stable dedupe key: element sequence plus both codes.
std::string dedupe_key(const Template& t) {
  std::string key;
  for (const auto& e : t.elements) {
    key += e.is_slot() ? 'S' : 'L';
    key += e.display();
    key += '\x1f';
  }
  key += to_string(t.car_code);
  key += '\x1f';
  key += to_string(t.open_code);
  return key;
}

}  // namespace

std::string Demographic::key() const {
  std::string out = is_latinx ? "latinx" : "nonlatinx";
  out += is_caregiver ? "_caregiver" : "_noncaregiver";
  return out;
}

Demographic Demographic::parse(const std::string& key) {
  Demographic d;
  auto us = key.find('_');
  if (us == std::string::npos) throw Error("bad demographic key: " + key);
  std::string left = key.substr(0, us);
  std::string right = key.substr(us + 1);
  if (left == "latinx") d.is_latinx = true;
  else if (left == "nonlatinx") d.is_latinx = false;
  else throw Error("bad demographic key: " + key);
  if (right == "caregiver") d.is_caregiver = true;
  else if (right == "noncaregiver") d.is_caregiver = false;
  else throw Error("bad demographic key: " + key);
  return d;
}

int Template::slot_count() const {
  int n = 0;
  for (const auto& e : elements) n += e.is_slot() ? 1 : 0;
  return n;
}

std::string Template::pattern() const {
  std::string out;
  for (const auto& e : elements) {
    if (!out.empty()) out += ' ';
    out += e.display();
  }
  return out;
}

SlotConfig SlotConfig::defaults() {
  SlotConfig config;
  config.slots = {SlotLabel::NSUBJ, SlotLabel::DOBJ, SlotLabel::POBJ, SlotLabel::ROOT,
                  SlotLabel::AUX,   SlotLabel::DET,  SlotLabel::PREP, SlotLabel::NOUN,
                  SlotLabel::VERB,  SlotLabel::ADJ,  SlotLabel::PROPN};
  config.interrogative_whitelist = {"what", "why",  "how",   "who",  "when",  "where",
                                    "which", "do",   "does",  "did",  "have",  "has",
                                    "can",   "could", "would", "will", "is",    "are"};
  return config;
}

bool SlotConfig::slot_enabled(SlotLabel label) const {
  return std::find(slots.begin(), slots.end(), label) != slots.end();
}

bool SlotConfig::whitelisted(const std::string& lowercased_word) const {
  return std::find(interrogative_whitelist.begin(), interrogative_whitelist.end(),
                   lowercased_word) != interrogative_whitelist.end();
}

Template extract_template(const AnnotatedSentence& question, CarCode car_code,
                          OpenCode open_code, Demographic demographic,
                          const SlotConfig& config) {
  if (question.tokens.empty()) throw EmptyQuestion();

  // Trailing `?` tokens never make it into the template.
  std::size_t end = question.tokens.size();
  while (end > 0 && question.tokens[end - 1].form == "?") --end;
  if (end == 0) throw NonGenerative();

  Template out;
  out.template_id = "tpl:" + question.sentence_id;
  out.source_question_id = question.sentence_id;
  out.car_code = car_code;
  out.open_code = open_code;
  out.demographic = demographic;

  for (std::size_t i = 0; i < end; ++i) {
    const Token& token = question.tokens[i];
    if (i == 0 && config.whitelisted(lower(token.form))) {
      out.elements.push_back(Element::lit(capitalize(token.form)));
      continue;
    }
    if (!token.deprel.empty()) {
      if (auto slot = slot_for_deprel(token.deprel); slot && config.slot_enabled(*slot)) {
        out.elements.push_back(Element::of(*slot));
        continue;
      }
    }
    if (auto slot = slot_for_upos(token.upos); slot && config.slot_enabled(*slot)) {
      out.elements.push_back(Element::of(*slot));
      continue;
    }
    out.elements.push_back(Element::lit(token.form));
  }

  if (out.slot_count() == 0) throw NonGenerative();
  return out;
}

TemplateCorpus build_corpus(const SurveyCorpus& survey,
                            const std::vector<AnnotatedSentence>& annotations,
                            const SlotConfig& config) {
  std::map<std::string, const AnnotatedSentence*> by_id;
  for (const auto& s : annotations) by_id[s.sentence_id] = &s;

  TemplateCorpus corpus;
  corpus.slot_config = config;

  std::map<std::string, std::size_t> seen;  // dedupe key -> index in templates
  int next_id = 0;
  for (const auto& q : survey.questions) {
    auto it = by_id.find(q.question_id);
    if (it == by_id.end()) throw MissingAnnotation(q.question_id);
    const auto& profile = survey.participants.at(q.participant_id);
    Demographic demographic{profile.is_latinx, profile.is_caregiver};

    Template t;
    try {
      t = extract_template(*it->second, q.car_code, q.open_code, demographic, config);
    } catch (const NonGenerative&) {
      ++corpus.non_generative_count;
      continue;
    }
    t.source_question_id = q.question_id;

    std::string key = dedupe_key(t);
    if (auto hit = seen.find(key); hit != seen.end()) {
      ++corpus.templates[hit->second].duplicate_count;
      continue;
    }
    char id[16];
    std::snprintf(id, sizeof id, "t%04d", ++next_id);
    t.template_id = id;
    seen.emplace(std::move(key), corpus.templates.size());
    corpus.templates.push_back(std::move(t));
  }
  return corpus;
}

void persist_store(const TemplateCorpus& corpus, const std::string& path) {
  std::ostringstream out;
  for (const auto& t : corpus.templates) {
    json elements = json::array();
    for (const auto& e : t.elements) {
      elements.push_back({{"kind", e.is_slot() ? "slot" : "lit"},
                          {"value", e.is_slot() ? to_string(e.slot) : e.word}});
    }
    json record = {{"template_id", t.template_id},
                   {"elements", std::move(elements)},
                   {"car_code", to_string(t.car_code)},
                   {"open_code", to_string(t.open_code)},
                   {"demographic",
                    {{"latinx", t.demographic.is_latinx},
                     {"caregiver", t.demographic.is_caregiver}}},
                   {"source_question_id", t.source_question_id},
                   {"duplicate_count", t.duplicate_count}};
    out << record.dump() << "\n";
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write template store: " + path);
    file << out.str();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move template store into place: " + path);
}

TemplateCorpus load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open template store: " + path);

  TemplateCorpus corpus;
  corpus.slot_config = SlotConfig::defaults();
  std::set<std::string> ids;

  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw BadRecord(line_number, e.what());
    }
    Template t;
    try {
      t.template_id = record.at("template_id").get<std::string>();
      for (const auto& e : record.at("elements")) {
        std::string kind = e.at("kind").get<std::string>();
        std::string value = e.at("value").get<std::string>();
        if (kind == "lit") {
          t.elements.push_back(Element::lit(value));
        } else if (kind == "slot") {
          auto label = parse_slot_label(value);
          if (!label) throw BadRecord(line_number, "unknown slot label: " + value);
          t.elements.push_back(Element::of(*label));
        } else {
          throw BadRecord(line_number, "unknown element kind: " + kind);
        }
      }
      std::string car = record.at("car_code").get<std::string>();
      if (car == "C") t.car_code = CarCode::C;
      else if (car == "A") t.car_code = CarCode::A;
      else if (car == "R") t.car_code = CarCode::R;
      else throw BadRecord(line_number, "bad car_code: " + car);
      std::string open = record.at("open_code").get<std::string>();
      if (open == "open") t.open_code = OpenCode::open;
      else if (open == "closed") t.open_code = OpenCode::closed;
      else throw BadRecord(line_number, "bad open_code: " + open);
      t.demographic.is_latinx = record.at("demographic").at("latinx").get<bool>();
      t.demographic.is_caregiver = record.at("demographic").at("caregiver").get<bool>();
      t.source_question_id = record.at("source_question_id").get<std::string>();
      t.duplicate_count = record.value("duplicate_count", 1);
    } catch (const json::exception& e) {
      throw BadRecord(line_number, e.what());
    }
    if (!ids.insert(t.template_id).second) throw DuplicateTemplateId(t.template_id);
    corpus.templates.push_back(std::move(t));
  }
  return corpus;
}

std::map<std::string, double> tfidf_scores(const TemplateCorpus& corpus) {
  if (corpus.templates.empty()) throw EmptyCorpus();

  // Canonical document order (template_id-sorted) so every accumulation below
  // is independent of the corpus's storage order.
  std::vector<const Template*> docs;
  docs.reserve(corpus.templates.size());
  for (const auto& t : corpus.templates) docs.push_back(&t);
  std::sort(docs.begin(), docs.end(), [](const Template* a, const Template* b) {
    return a->template_id < b->template_id;
  });

  auto term_of = [](const Element& e) {
    return e.is_slot() ? std::string(to_string(e.slot)) : lower(e.word);
  };

  // Document frequencies over distinct terms.
  std::map<std::string, int> df;
  for (const Template* t : docs) {
    std::set<std::string> distinct;
    for (const auto& e : t->elements) distinct.insert(term_of(e));
    for (const auto& term : distinct) ++df[term];
  }
  const double n_docs = static_cast<double>(docs.size());
  std::map<std::string, double> idf;
  for (const auto& [term, count] : df)
    idf[term] = std::log((1.0 + n_docs) / (1.0 + count)) + 1.0;

  // Column sums of squares, accumulated in canonical document order.
  std::map<std::string, double> column_ss;
  for (const Template* t : docs) {
    std::map<std::string, int> counts;
    for (const auto& e : t->elements) ++counts[term_of(e)];
    const double len = static_cast<double>(t->elements.size());
    for (const auto& [term, count] : counts) {
      double weight = (count / len) * idf[term];
      column_ss[term] += weight * weight;
    }
  }
  std::map<std::string, double> column_norm;
  for (const auto& [term, ss] : column_ss) column_norm[term] = std::sqrt(ss);

  // score(d) = sum of column norms over d's distinct terms (sorted by term).
  std::map<std::string, double> scores;
  for (const Template* t : docs) {
    std::set<std::string> distinct;
    for (const auto& e : t->elements) distinct.insert(term_of(e));
    double score = 0.0;
    for (const auto& term : distinct) score += column_norm[term];
    scores[t->template_id] = score;
  }
  return scores;
}

RankedTemplates rank_and_proportions(const TemplateCorpus& corpus, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > corpus.templates.size())
    throw KTooLarge(k, corpus.templates.size());

  auto scores = tfidf_scores(corpus);

  RankedTemplates ranked;
  ranked.k = k;
  for (const auto& t : corpus.templates)
    ranked.entries.emplace_back(t, scores.at(t.template_id));
  std::sort(ranked.entries.begin(), ranked.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first.template_id < b.first.template_id;
            });

  std::map<Demographic, int> counts;
  for (int i = 0; i < k; ++i) ++counts[ranked.entries[i].first.demographic];
  for (bool latinx : {true, false}) {
    for (bool caregiver : {true, false}) {
      Demographic d{latinx, caregiver};
      DemographicShare share;
      share.group = d.key();
      share.count = counts.count(d) ? counts[d] : 0;
      share.percent = 100.0 * share.count / k;
      ranked.proportions.push_back(std::move(share));
    }
  }
  return ranked;
}

}  // namespace genq
