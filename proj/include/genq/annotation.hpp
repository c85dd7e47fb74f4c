#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "genq/error.hpp"

namespace genq {

/// The 17-tag universal part-of-speech inventory.
enum class Upos {
  NOUN, VERB, AUX, DET, ADP, PRON, PROPN, ADJ, ADV,
  NUM, PART, CCONJ, SCONJ, INTJ, SYM, PUNCT, X
};

const char* to_string(Upos upos);
std::optional<Upos> parse_upos(std::string_view text);

struct Token {
  int index = 0;          ///< 0-based position within the sentence
  std::string form;
  std::string lemma;      ///< may equal form
  Upos upos = Upos::X;
  std::string deprel;     ///< lowercase dependency label, empty when absent

  bool operator==(const Token&) const = default;
};

struct AnnotatedSentence {
  std::string sentence_id;
  std::string text;                          ///< original surface string
  std::vector<Token> tokens;
  std::map<std::string, std::string> meta;   ///< "# key = value" comment lines

  bool empty() const { return tokens.empty(); }
};

/// Slot alphabet shared by template extraction and matching.
/// NSUBJ/DOBJ/POBJ/ROOT are dependency-derived; the rest are POS-derived.
enum class SlotLabel { NSUBJ, DOBJ, POBJ, ROOT, AUX, DET, PREP, NOUN, VERB, ADJ, PROPN };

const char* to_string(SlotLabel label);
std::optional<SlotLabel> parse_slot_label(std::string_view text);
bool is_dependency_slot(SlotLabel label);

struct MalformedLine : Error {
  int line;
  MalformedLine(int line_number, const std::string& detail)
      : Error("malformed CoNLL-U line " + std::to_string(line_number) + ": " + detail),
        line(line_number) {}
};

struct UnknownUpos : Error {
  int line;
  UnknownUpos(int line_number, const std::string& tag)
      : Error("unknown UPOS tag '" + tag + "' at line " + std::to_string(line_number)),
        line(line_number) {}
};

struct EmptyDocument : Error {
  EmptyDocument() : Error("CoNLL-U document contains no sentences") {}
};

struct EmptyInput : Error {
  EmptyInput(const std::string& what_input) : Error("empty input: " + what_input) {}
};

/// Parses a CoNLL-U document (10-column TSV, `#` comments, blank-line
/// separators). Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are
/// skipped; `obj` is normalized to `dobj` and `case` to `prep`.
std::vector<AnnotatedSentence> parse_conllu(std::istream& in);
std::vector<AnnotatedSentence> parse_conllu_file(const std::string& path);

/// Writes sentences back out as CoNLL-U; parse(serialize(parse(x))) is a
/// fixed point on the fields this library keeps.
std::string serialize_conllu(const std::vector<AnnotatedSentence>& sentences);

using Lexicon = std::map<std::string, Upos>;

/// Loads a two-column TSV `word<TAB>UPOS` lexicon with lowercase keys.
Lexicon load_lexicon(const std::string& path);

/// Heuristic tagger for fixtures: whitespace tokenization with punctuation
/// detached, lexicon lookup, then suffix rules (-ly ADV, -ing/-ed VERB),
/// default NOUN. Never assigns dependency labels.
AnnotatedSentence fallback_tag(const std::string& raw, const Lexicon& lexicon);

/// Joins token forms with single spaces, attaching clitics and closing
/// punctuation, and capitalizes the first character. A trailing run of `?`
/// collapses to one.
std::string detokenize(const std::vector<std::string>& forms);

/// Fixed contraction table ('s/'re/'m/n't), keyed on lemma. Returns the
/// expanded form, or `form` unchanged when no entry applies.
std::string expand_contraction(const std::string& form, const std::string& lemma);

}  // namespace genq
