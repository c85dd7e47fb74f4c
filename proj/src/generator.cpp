#include "genq/generator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace genq {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

const char* to_string(GeneratedQuestion::Stage stage) {
  switch (stage) {
    case GeneratedQuestion::Stage::raw: return "raw";
    case GeneratedQuestion::Stage::rule_fixed: return "rule_fixed";
    default: return "paraphrased";
  }
}

bool slot_accepts(SlotLabel label, const Token& token) {
  if (token.upos == Upos::PUNCT) return false;
  auto nominal = [&] {
    return token.upos == Upos::NOUN || token.upos == Upos::PROPN ||
           token.upos == Upos::PRON;
  };
  switch (label) {
    case SlotLabel::NSUBJ: return token.deprel == "nsubj" || nominal();
    case SlotLabel::DOBJ: return token.deprel == "dobj" || nominal();
    case SlotLabel::POBJ: return token.deprel == "pobj" || nominal();
    case SlotLabel::ROOT:
      return token.deprel == "root" || token.upos == Upos::VERB || token.upos == Upos::AUX;
    case SlotLabel::AUX: return token.upos == Upos::AUX;
    case SlotLabel::DET: return token.upos == Upos::DET;
    case SlotLabel::PREP: return token.upos == Upos::ADP;
    case SlotLabel::NOUN: return token.upos == Upos::NOUN;
    case SlotLabel::VERB: return token.upos == Upos::VERB;
    case SlotLabel::ADJ: return token.upos == Upos::ADJ;
    case SlotLabel::PROPN: return token.upos == Upos::PROPN;
  }
  return false;
}

std::optional<SlotBinding> match_template(const Template& tmpl,
                                          const AnnotatedSentence& sentence) {
  SlotBinding binding;
  binding.sentence_id = sentence.sentence_id;
  std::size_t next_token = 0;
  for (std::size_t pos = 0; pos < tmpl.elements.size(); ++pos) {
    const Element& element = tmpl.elements[pos];
    if (!element.is_slot()) continue;  // literals need no sentence support
    bool bound = false;
    for (std::size_t i = next_token; i < sentence.tokens.size(); ++i) {
      const Token& token = sentence.tokens[i];
      if (!slot_accepts(element.slot, token)) continue;
      binding.slots[pos] = {token.index, expand_contraction(token.form, token.lemma)};
      next_token = i + 1;
      bound = true;
      break;
    }
    if (!bound) return std::nullopt;
  }
  return binding;
}

GeneratedQuestion fill_template(const Template& tmpl, const SlotBinding& binding) {
  std::vector<std::string> forms;
  forms.reserve(tmpl.elements.size() + 1);
  for (std::size_t pos = 0; pos < tmpl.elements.size(); ++pos) {
    const Element& element = tmpl.elements[pos];
    if (element.is_slot()) {
      auto it = binding.slots.find(pos);
      if (it == binding.slots.end()) throw UnboundSlot(pos);
      forms.push_back(it->second.surface);
    } else {
      forms.push_back(element.word);
    }
  }
  if (forms.empty() || forms.back() != "?") forms.push_back("?");

  GeneratedQuestion out;
  out.text = detokenize(forms);
  out.template_id = tmpl.template_id;
  out.sentence_id = binding.sentence_id;
  out.binding = binding;
  out.car_code = tmpl.car_code;
  out.open_code = tmpl.open_code;
  out.stage = GeneratedQuestion::Stage::raw;
  return out;
}

GeneratedQuestion rule_fix(const GeneratedQuestion& question, const AnnotatedSentence& source) {
  std::string text = question.text;
  while (!text.empty() && (text.back() == '?' || text.back() == ' ')) text.pop_back();

  std::vector<std::string> words;
  {
    std::istringstream stream(text);
    std::string word;
    while (stream >> word) words.push_back(word);
  }

  // (1) determiner reattachment: a bound NOUN/PROPN directly preceded by a
  // DET in the source gets that determiner when the question lacks one.
  std::size_t search_from = 0;
  for (const auto& [pos, bound] : question.binding.slots) {
    std::size_t wi = words.size();
    for (std::size_t i = search_from; i < words.size(); ++i) {
      if (lower(words[i]) == lower(bound.surface)) {
        wi = i;
        break;
      }
    }
    if (wi == words.size()) continue;  // surface not found verbatim
    if (bound.token_index >= 1 &&
        bound.token_index < static_cast<int>(source.tokens.size())) {
      const Token& token = source.tokens[bound.token_index];
      const Token& prev = source.tokens[bound.token_index - 1];
      if ((token.upos == Upos::NOUN || token.upos == Upos::PROPN) &&
          prev.upos == Upos::DET) {
        std::string det = lower(prev.form);
        if (wi == 0 || lower(words[wi - 1]) != det) {
          words.insert(words.begin() + wi, det);
          ++wi;
        }
      }
    }
    search_from = wi + 1;
  }

  // (2) capitalize the first word
  if (!words.empty() && std::isalpha(static_cast<unsigned char>(words[0][0])))
    words[0][0] = static_cast<char>(std::toupper(static_cast<unsigned char>(words[0][0])));

  // (3) collapse duplicate adjacent words
  std::vector<std::string> kept;
  for (auto& word : words) {
    if (!kept.empty() && lower(kept.back()) == lower(word)) continue;
    kept.push_back(std::move(word));
  }

  // (4) single trailing `?`
  std::string fixed;
  for (const auto& word : kept) {
    if (!fixed.empty()) fixed += ' ';
    fixed += word;
  }
  fixed += '?';

  GeneratedQuestion out = question;
  out.text = std::move(fixed);
  out.stage = GeneratedQuestion::Stage::rule_fixed;
  return out;
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host:port
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

GeneratedQuestion paraphrase_remote(const GeneratedQuestion& question,
                                    const std::optional<ParaphraseConfig>& config,
                                    GenerationReport* report) {
  if (!config) {  // paraphrasing not requested: identity, counters untouched
    GeneratedQuestion out = question;
    out.stage = GeneratedQuestion::Stage::rule_fixed;
    return out;
  }

  GenerationReport scratch;
  GenerationReport& rep = report ? *report : scratch;
  ++rep.paraphrase_attempts;

  auto fallback = [&] {
    ++rep.paraphrase_failures;
    GeneratedQuestion out = question;
    out.stage = GeneratedQuestion::Stage::rule_fixed;
    return out;
  };

  auto [base, path] = split_url(config->url);
  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::milliseconds(config->timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(config->timeout_ms));
  client.set_write_timeout(std::chrono::milliseconds(config->timeout_ms));

  std::string body = json{{"text", question.text}}.dump();
  for (int attempt = 0; attempt <= config->retries; ++attempt) {
    auto res = client.Post(path, body, "application/json");
    if (!res) continue;  // transport error: retry
    if (res->status != 200) continue;
    try {
      json parsed = json::parse(res->body);
      for (const auto& candidate : parsed.at("candidates")) {
        std::string text = candidate.get<std::string>();
        if (text.empty()) continue;
        if (text.back() != '?') text += '?';
        GeneratedQuestion out = question;
        out.text = std::move(text);
        out.stage = GeneratedQuestion::Stage::paraphrased;
        return out;
      }
    } catch (const json::exception&) {
      // malformed response body: fall through to the fallback
    }
    break;  // well-formed transport, unusable payload: no point retrying
  }
  return fallback();
}

namespace {

int car_slot(CarCode code) {
  switch (code) {
    case CarCode::C: return 0;
    case CarCode::A: return 1;
    default: return 2;
  }
}

struct PoolEntry {
  const Template* tmpl;
  int rank;
};

}  // namespace

std::vector<GeneratedQuestion> generate_for_page(const std::vector<AnnotatedSentence>& page,
                                                 const RankedTemplates& ranked,
                                                 const GenerationFilters& filters,
                                                 GenerationReport* report) {
  if (filters.top_k < 1) throw Error("top_k must be positive");
  if (filters.max_per_sentence < 1) throw Error("max_per_sentence must be positive");

  GenerationReport scratch;
  GenerationReport& rep = report ? *report : scratch;

  std::vector<PoolEntry> pool;
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    const Template& t = ranked.entries[i].first;
    if (filters.car_code && t.car_code != *filters.car_code) continue;
    if (filters.open_code && t.open_code != *filters.open_code) continue;
    if (filters.demographic && !(t.demographic == *filters.demographic)) continue;
    pool.push_back({&t, static_cast<int>(i)});
  }
  if (pool.size() > static_cast<std::size_t>(filters.top_k))
    pool.resize(static_cast<std::size_t>(filters.top_k));
  if (pool.empty()) throw EmptyTemplatePool();

  // car-code pools for quota mode, in rank order
  std::array<std::vector<const PoolEntry*>, 3> car_pools;
  for (const auto& entry : pool) car_pools[car_slot(entry.tmpl->car_code)].push_back(&entry);

  std::vector<GeneratedQuestion> all;
  for (std::size_t si = 0; si < page.size(); ++si) {
    const AnnotatedSentence& sentence = page[si];
    ++rep.sentences_seen;
    std::vector<std::pair<int, GeneratedQuestion>> accepted;

    auto try_accept = [&](const PoolEntry& entry) {
      auto binding = match_template(*entry.tmpl, sentence);
      if (!binding) return false;
      accepted.emplace_back(entry.rank,
                            rule_fix(fill_template(*entry.tmpl, *binding), sentence));
      return true;
    };

    if (filters.quota) {
      // smooth weighted round-robin across C/A/R pools
      const auto& shares = *filters.quota;
      std::array<double, 3> credit = {0.0, 0.0, 0.0};
      std::array<std::size_t, 3> cursor = {0, 0, 0};
      while (static_cast<int>(accepted.size()) < filters.max_per_sentence) {
        int chosen = -1;
        double best = -1e18;
        for (int c = 0; c < 3; ++c) {
          if (cursor[c] >= car_pools[c].size()) continue;
          credit[c] += shares[c];
          if (credit[c] > best) {
            best = credit[c];
            chosen = c;
          }
        }
        if (chosen < 0) break;  // every pool exhausted
        credit[chosen] -= 1.0;
        while (cursor[chosen] < car_pools[chosen].size()) {
          const PoolEntry* entry = car_pools[chosen][cursor[chosen]++];
          if (try_accept(*entry)) break;
        }
      }
    } else {
      for (const auto& entry : pool) {
        if (static_cast<int>(accepted.size()) >= filters.max_per_sentence) break;
        try_accept(entry);
      }
    }

    std::sort(accepted.begin(), accepted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [rank, question] : accepted) all.push_back(std::move(question));
    rep.candidates_accepted += static_cast<int>(accepted.size());
  }

  if (filters.paraphrase && !all.empty()) {
    int workers = std::min<int>(std::max(filters.paraphrase->max_in_flight, 1),
                                static_cast<int>(all.size()));
    if (workers <= 1) {
      for (auto& question : all) question = paraphrase_remote(question, filters.paraphrase, &rep);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<GenerationReport> local(workers);
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= all.size()) break;
            all[i] = paraphrase_remote(all[i], filters.paraphrase, &local[w]);
          }
        });
      }
      for (auto& t : threads) t.join();
      for (const auto& l : local) {
        rep.paraphrase_attempts += l.paraphrase_attempts;
        rep.paraphrase_failures += l.paraphrase_failures;
      }
    }
  }

  // drop exact-duplicate output texts, first occurrence wins
  std::vector<GeneratedQuestion> unique;
  std::set<std::string> seen;
  for (auto& question : all) {
    if (!seen.insert(question.text).second) {
      ++rep.duplicates_dropped;
      continue;
    }
    unique.push_back(std::move(question));
  }
  return unique;
}

void persist_questions(const std::vector<GeneratedQuestion>& questions,
                       const std::string& path) {
  std::ostringstream out;
  for (const auto& q : questions) {
    json slots = json::array();
    for (const auto& [pos, bound] : q.binding.slots) {
      slots.push_back({{"position", pos},
                       {"token_index", bound.token_index},
                       {"surface", bound.surface}});
    }
    json record = {{"text", q.text},
                   {"template_id", q.template_id},
                   {"sentence_id", q.sentence_id},
                   {"car_code", to_string(q.car_code)},
                   {"open_code", to_string(q.open_code)},
                   {"stage", to_string(q.stage)},
                   {"binding", std::move(slots)}};
    out << record.dump() << "\n";
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write question file: " + path);
    file << out.str();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move question file into place: " + path);
}

std::vector<GeneratedQuestion> load_questions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open question file: " + path);
  std::vector<GeneratedQuestion> questions;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      json record = json::parse(line);
      GeneratedQuestion q;
      q.text = record.at("text").get<std::string>();
      q.template_id = record.at("template_id").get<std::string>();
      q.sentence_id = record.at("sentence_id").get<std::string>();
      q.binding.sentence_id = q.sentence_id;
      std::string car = record.at("car_code").get<std::string>();
      if (car == "C") q.car_code = CarCode::C;
      else if (car == "A") q.car_code = CarCode::A;
      else if (car == "R") q.car_code = CarCode::R;
      else throw BadRecord(line_number, "bad car_code: " + car);
      std::string open = record.at("open_code").get<std::string>();
      if (open == "open") q.open_code = OpenCode::open;
      else if (open == "closed") q.open_code = OpenCode::closed;
      else throw BadRecord(line_number, "bad open_code: " + open);
      std::string stage = record.at("stage").get<std::string>();
      if (stage == "raw") q.stage = GeneratedQuestion::Stage::raw;
      else if (stage == "rule_fixed") q.stage = GeneratedQuestion::Stage::rule_fixed;
      else if (stage == "paraphrased") q.stage = GeneratedQuestion::Stage::paraphrased;
      else throw BadRecord(line_number, "bad stage: " + stage);
      for (const auto& slot : record.at("binding")) {
        q.binding.slots[slot.at("position").get<std::size_t>()] = {
            slot.at("token_index").get<int>(), slot.at("surface").get<std::string>()};
      }
      questions.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw BadRecord(line_number, e.what());
    }
  }
  return questions;
}

}  // namespace genq
