#include "genq/annotation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

namespace genq {

namespace {

constexpr std::array<const char*, 17> kUposNames = {
    "NOUN", "VERB", "AUX", "DET", "ADP", "PRON", "PROPN", "ADJ", "ADV",
    "NUM", "PART", "CCONJ", "SCONJ", "INTJ", "SYM", "PUNCT", "X"};

constexpr std::array<const char*, 11> kSlotNames = {
    "NSUBJ", "DOBJ", "POBJ", "ROOT", "AUX", "DET", "PREP", "NOUN", "VERB", "ADJ", "PROPN"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

bool all_punct(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_ascii_punct);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string normalize_deprel(std::string deprel) {
  // Drop UD subtype suffixes (nsubj:pass -> nsubj).
  if (auto colon = deprel.find(':'); colon != std::string::npos) deprel.resize(colon);
  deprel = lower(deprel);
  if (deprel == "obj") return "dobj";
  if (deprel == "case") return "prep";
  return deprel;
}

// `3-4` multiword ranges and `5.1` empty nodes are not word tokens.
bool is_range_or_empty_node_id(const std::string& id) {
  return id.find('-') != std::string::npos || id.find('.') != std::string::npos;
}

bool attaches_left(const std::string& form) {
  if (form.empty()) return false;
  static const std::string closers = "?!.,;:)]}%";
  if (closers.find(form[0]) != std::string::npos) return true;
  if (form[0] == '\'') return true;               // 's, 're, 'm, 'll ...
  return form == "n't";
}

}  // namespace

const char* to_string(Upos upos) { return kUposNames[static_cast<int>(upos)]; }

std::optional<Upos> parse_upos(std::string_view text) {
  for (std::size_t i = 0; i < kUposNames.size(); ++i)
    if (text == kUposNames[i]) return static_cast<Upos>(i);
  return std::nullopt;
}

const char* to_string(SlotLabel label) { return kSlotNames[static_cast<int>(label)]; }

std::optional<SlotLabel> parse_slot_label(std::string_view text) {
  for (std::size_t i = 0; i < kSlotNames.size(); ++i)
    if (text == kSlotNames[i]) return static_cast<SlotLabel>(i);
  return std::nullopt;
}

bool is_dependency_slot(SlotLabel label) {
  switch (label) {
    case SlotLabel::NSUBJ:
    case SlotLabel::DOBJ:
    case SlotLabel::POBJ:
    case SlotLabel::ROOT:
      return true;
    default:
      return false;
  }
}

std::vector<AnnotatedSentence> parse_conllu(std::istream& in) {
  std::vector<AnnotatedSentence> sentences;
  AnnotatedSentence current;
  int line_number = 0;
  int auto_id = 0;

  auto flush = [&] {
    if (current.tokens.empty() && current.meta.empty()) return;
    if (!current.tokens.empty()) {
      if (auto it = current.meta.find("sent_id"); it != current.meta.end())
        current.sentence_id = it->second;
      else
        current.sentence_id = "s" + std::to_string(++auto_id);
      if (auto it = current.meta.find("text"); it != current.meta.end()) {
        current.text = it->second;
      } else {
        std::vector<std::string> forms;
        forms.reserve(current.tokens.size());
        for (const auto& t : current.tokens) forms.push_back(t.form);
        current.text = detokenize(forms);
      }
      // Canonical meta so parse(serialize(x)) round-trips field-for-field.
      current.meta["sent_id"] = current.sentence_id;
      current.meta["text"] = current.text;
      sentences.push_back(std::move(current));
    }
    current = AnnotatedSentence{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (auto eq = body.find('='); eq != std::string::npos) {
        auto trim = [](std::string s) {
          auto b = s.find_first_not_of(" \t");
          auto e = s.find_last_not_of(" \t");
          return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        current.meta[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      }
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() != 10)
      throw MalformedLine(line_number,
                          "expected 10 tab-separated columns, got " +
                              std::to_string(fields.size()));
    if (is_range_or_empty_node_id(fields[0])) continue;

    Token token;
    token.index = static_cast<int>(current.tokens.size());
    token.form = fields[1];
    if (token.form.empty())
      throw MalformedLine(line_number, "empty FORM column");
    token.lemma = fields[2] == "_" ? token.form : fields[2];
    auto upos = parse_upos(fields[3]);
    if (!upos) throw UnknownUpos(line_number, fields[3]);
    token.upos = *upos;
    if (fields[7] != "_" && !fields[7].empty())
      token.deprel = normalize_deprel(fields[7]);
    current.tokens.push_back(std::move(token));
  }
  flush();

  if (sentences.empty()) throw EmptyDocument();
  return sentences;
}

std::vector<AnnotatedSentence> parse_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CoNLL-U file: " + path);
  return parse_conllu(in);
}

std::string serialize_conllu(const std::vector<AnnotatedSentence>& sentences) {
  std::ostringstream out;
  for (const auto& sentence : sentences) {
    out << "# sent_id = " << sentence.sentence_id << "\n";
    out << "# text = " << sentence.text << "\n";
    for (const auto& [key, value] : sentence.meta) {
      if (key == "sent_id" || key == "text") continue;
      out << "# " << key << " = " << value << "\n";
    }
    for (const auto& token : sentence.tokens) {
      out << token.index + 1 << '\t' << token.form << '\t' << token.lemma << '\t'
          << to_string(token.upos) << "\t_\t_\t_\t"
          << (token.deprel.empty() ? "_" : token.deprel) << "\t_\t_\n";
    }
    out << "\n";
  }
  return out.str();
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon file: " + path);
  Lexicon lexicon;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw MalformedLine(line_number, "lexicon line lacks a tab separator");
    auto upos = parse_upos(line.substr(tab + 1));
    if (!upos) throw UnknownUpos(line_number, line.substr(tab + 1));
    lexicon[lower(line.substr(0, tab))] = *upos;
  }
  return lexicon;
}

namespace {

Upos tag_word(const std::string& word, const Lexicon& lexicon) {
  auto it = lexicon.find(lower(word));
  if (it != lexicon.end()) return it->second;
  if (all_punct(word)) return Upos::PUNCT;
  std::string w = lower(word);
  auto ends_with = [&](std::string_view suffix) {
    return w.size() > suffix.size() &&
           w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("ly")) return Upos::ADV;
  if (ends_with("ing") || ends_with("ed")) return Upos::VERB;
  return Upos::NOUN;
}

}  // namespace

AnnotatedSentence fallback_tag(const std::string& raw, const Lexicon& lexicon) {
  std::vector<std::string> words;
  std::istringstream stream(raw);
  std::string chunk;
  while (stream >> chunk) {
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    std::vector<std::string> leading;
    while (begin < end && is_ascii_punct(chunk[begin]) && chunk[begin] != '\'') {
      leading.push_back(std::string(1, chunk[begin]));
      ++begin;
    }
    std::vector<std::string> trailing;
    while (end > begin && is_ascii_punct(chunk[end - 1]) && chunk[end - 1] != '\'') {
      trailing.insert(trailing.begin(), std::string(1, chunk[end - 1]));
      --end;
    }
    for (auto& p : leading) words.push_back(std::move(p));
    if (end > begin) words.push_back(chunk.substr(begin, end - begin));
    for (auto& p : trailing) words.push_back(std::move(p));
  }
  if (words.empty()) throw EmptyInput("fallback_tag");

  AnnotatedSentence sentence;
  sentence.text = raw;
  for (std::size_t i = 0; i < words.size(); ++i) {
    Token token;
    token.index = static_cast<int>(i);
    token.form = words[i];
    token.lemma = lower(words[i]);
    token.upos = tag_word(words[i], lexicon);
    sentence.tokens.push_back(std::move(token));
  }
  return sentence;
}

std::string detokenize(const std::vector<std::string>& forms) {
  if (forms.empty()) throw EmptyInput("detokenize");
  std::string out;
  for (const auto& form : forms) {
    if (form.empty()) continue;
    if (!out.empty() && !attaches_left(form)) out += ' ';
    out += form;
  }
  if (out.empty()) throw EmptyInput("detokenize");
  // Collapse a trailing run of question marks to a single one.
  while (out.size() >= 2 && out[out.size() - 1] == '?' && out[out.size() - 2] == '?')
    out.pop_back();
  if (std::isalpha(static_cast<unsigned char>(out[0])))
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string expand_contraction(const std::string& form, const std::string& lemma) {
  struct Entry {
    std::string_view form, lemma, expansion;
  };
  static constexpr std::array<Entry, 4> table = {{
      {"'s", "be", "is"},
      {"'re", "be", "are"},
      {"'m", "be", "am"},
      {"n't", "not", "not"},
  }};
  std::string f = lower(form);
  for (const auto& entry : table) {
    if (f != entry.form) continue;
    if (lemma == entry.lemma || lemma.empty() || lemma == f)
      return std::string(entry.expansion);
  }
  return form;
}

}  // namespace genq
