#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "default_lexicon.hpp"
#include "error.hpp"
#include "hash.hpp"

namespace rtlm::textfeat {

// ---------------------------------------------------------------------------
// Lemmatization
// ---------------------------------------------------------------------------

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

// Lowercase, then apply the first matching rule of a fixed suffix table.
// A rule only fires if the resulting stem keeps at least 3 characters.
//
//   sses -> ss      ies -> y        (x|ch|sh|z)es -> \1
//   ss, us, is      unchanged       s -> ''
//   ied -> y        eed unchanged   ed -> ''
//   ing -> ''
//
// Contraction pieces map through a small table ("n't" -> "not").
inline std::string lemmatize(std::string_view surface) {
  std::string w = detail::to_lower(surface);
  if (w == "n't") return "not";
  if (w == "'re") return "are";
  if (w == "'ve") return "have";
  if (w == "'ll") return "will";
  if (w == "'m") return "am";
  if (w == "'s" || w == "'d") return w;

  constexpr std::size_t kMinStem = 3;
  auto strip = [&](std::size_t n, std::string_view repl) -> bool {
    if (w.size() < n || w.size() - n + repl.size() < kMinStem) return false;
    w.resize(w.size() - n);
    w += repl;
    return true;
  };

  using detail::ends_with;
  if (ends_with(w, "sses")) {
    strip(2, "");
  } else if (ends_with(w, "ies")) {
    strip(3, "y");
  } else if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") ||
             ends_with(w, "zes")) {
    strip(2, "");
  } else if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) {
    // unchanged
  } else if (ends_with(w, "s")) {
    strip(1, "");
  } else if (ends_with(w, "ied")) {
    strip(3, "y");
  } else if (ends_with(w, "eed")) {
    // unchanged
  } else if (ends_with(w, "ed")) {
    strip(2, "");
  } else if (ends_with(w, "ing")) {
    strip(3, "");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

struct Lexicon {
  std::set<std::string> vague_words;
  std::map<std::string, int> polysemous_words;
  std::map<std::string, std::set<std::string>> pos_table;
  // Sentence-initial opener phrases, each a sequence of lemmas.
  std::vector<std::vector<std::string>> wh_openers;
  // Broad-scope nouns that make a question open-ended when they end it.
  std::set<std::string> broad_nouns;
  std::set<std::string> coordinators;
  std::set<std::string> prepositions;
  // Content hash of the source text. Scores are only comparable under one version.
  std::string version;

  // Parses the line-oriented lexicon format:
  //   section headers `vague:` `polysemy:` `pos:` `wh:` `coord:` `prep:`
  //   polysemy lines `lemma<TAB>count` (count >= 2)
  //   pos lines `lemma<TAB>TAG[,TAG...]`
  //   `#` starts a comment line.
  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::string& path);

  std::vector<std::string> lemma_phrase(std::string_view phrase) const;

  const std::set<std::string>* pos_of(const std::string& lemma) const {
    auto it = pos_table.find(lemma);
    return it == pos_table.end() ? nullptr : &it->second;
  }
};

inline const Lexicon& default_lexicon() {
  static const Lexicon lex = Lexicon::parse(kDefaultLexiconText);
  return lex;
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

struct Token {
  std::string surface;
  std::string lemma;
  std::set<std::string> pos_tags;

  bool is_word() const {
    return !surface.empty() && (detail::is_ascii_alnum(static_cast<unsigned char>(surface[0])) ||
                                static_cast<unsigned char>(surface[0]) >= 0x80 ||
                                surface.size() > 1);
  }
  bool is_punct(char c) const { return surface.size() == 1 && surface[0] == c; }
};

struct TokenizeDiagnostics {
  std::size_t dropped_bytes = 0;
};

namespace detail {

// Length of a valid UTF-8 multi-byte sequence starting at s[i], or 0.
inline std::size_t utf8_seq_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t n = 0;
  if (c >= 0xC2 && c <= 0xDF) n = 2;
  else if (c >= 0xE0 && c <= 0xEF) n = 3;
  else if (c >= 0xF0 && c <= 0xF4) n = 4;
  else return 0;
  if (i + n > s.size()) return 0;
  for (std::size_t k = 1; k < n; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
  }
  return n;
}

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

enum class CharClass { kSpace, kWord, kPunct, kDrop };

struct Char {
  std::string_view bytes;
  CharClass cls;
};

inline std::vector<Char> classify(std::string_view text, TokenizeDiagnostics* diag) {
  std::vector<Char> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      CharClass cls;
      if (is_space(c)) cls = CharClass::kSpace;
      else if (c < 0x20 || c == 0x7F) cls = CharClass::kDrop;
      else if (is_ascii_alnum(c)) cls = CharClass::kWord;
      else cls = CharClass::kPunct;
      if (cls == CharClass::kDrop) {
        if (diag) ++diag->dropped_bytes;
      } else {
        out.push_back({text.substr(i, 1), cls});
      }
      ++i;
      continue;
    }
    const std::size_t n = utf8_seq_len(text, i);
    if (n == 0) {
      if (diag) ++diag->dropped_bytes;
      ++i;
      continue;
    }
    out.push_back({text.substr(i, n), CharClass::kWord});
    i += n;
  }
  return out;
}

// Splits a word into its contraction pieces:
//   X + "n't"                      (don't -> do n't, can't -> ca n't)
//   X + one of 's 're 've 'll 'd 'm
inline std::vector<std::string> split_contraction(const std::string& word) {
  const std::string lw = to_lower(word);
  if (lw.size() > 3 && ends_with(lw, "n't")) {
    return {word.substr(0, word.size() - 3), word.substr(word.size() - 3)};
  }
  for (std::string_view suf : {"'s", "'re", "'ve", "'ll", "'d", "'m"}) {
    if (lw.size() > suf.size() && ends_with(lw, suf)) {
      return {word.substr(0, word.size() - suf.size()), word.substr(word.size() - suf.size())};
    }
  }
  return {word};
}

}  // namespace detail

// Splits on whitespace and punctuation. Word characters are ASCII letters and
// digits plus any valid UTF-8 multi-byte sequence. Apostrophes and hyphens stay
// inside a word when flanked by word characters, as do '.' and ',' between
// digits. Other punctuation characters become single-character tokens with no
// PoS tags. Invalid UTF-8 and control bytes are dropped and counted in `diag`.
inline std::vector<Token> tokenize(std::string_view text, const Lexicon& lex = default_lexicon(),
                                   TokenizeDiagnostics* diag = nullptr) {
  using detail::CharClass;
  const auto chars = detail::classify(text, diag);

  std::vector<Token> tokens;
  auto emit = [&](std::string surface, bool word) {
    Token t;
    t.lemma = lemmatize(surface);
    if (word) {
      if (const auto* tags = lex.pos_of(t.lemma)) t.pos_tags = *tags;
    }
    t.surface = std::move(surface);
    tokens.push_back(std::move(t));
  };

  auto is_digit = [](const detail::Char& ch) {
    return ch.bytes.size() == 1 && ch.bytes[0] >= '0' && ch.bytes[0] <= '9';
  };

  std::string word;
  auto flush_word = [&] {
    if (word.empty()) return;
    for (auto& piece : detail::split_contraction(word)) emit(std::move(piece), true);
    word.clear();
  };

  for (std::size_t i = 0; i < chars.size(); ++i) {
    const auto& ch = chars[i];
    switch (ch.cls) {
      case CharClass::kSpace:
        flush_word();
        break;
      case CharClass::kWord:
        word.append(ch.bytes);
        break;
      case CharClass::kPunct: {
        const char p = ch.bytes[0];
        const bool prev_word = !word.empty();
        const bool next_word = i + 1 < chars.size() && chars[i + 1].cls == CharClass::kWord;
        bool joins = false;
        if ((p == '\'' || p == '-') && prev_word && next_word) joins = true;
        if ((p == '.' || p == ',') && prev_word && next_word && is_digit(chars[i - 1]) &&
            is_digit(chars[i + 1])) {
          joins = true;
        }
        if (joins) {
          word.push_back(p);
        } else {
          flush_word();
          emit(std::string(1, p), false);
        }
        break;
      }
      case CharClass::kDrop:
        break;
    }
  }
  flush_word();
  return tokens;
}

// ---------------------------------------------------------------------------
// Lexicon parsing (needs the tokenizer for phrase patterns)
// ---------------------------------------------------------------------------

inline std::vector<std::string> Lexicon::lemma_phrase(std::string_view phrase) const {
  std::vector<std::string> out;
  for (auto& t : tokenize(phrase, *this)) out.push_back(t.lemma);
  return out;
}

inline Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  lex.version = content_hash(text);
  enum class Section { kNone, kVague, kPolysemy, kPos, kWh, kCoord, kPrep } section = Section::kNone;

  auto trim = [](std::string_view s) {
    while (!s.empty() && detail::is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && detail::is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };

  std::vector<std::string> raw_openers;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }
    if (line.back() == ':' && line.find('\t') == std::string_view::npos) {
      const std::string_view name = line.substr(0, line.size() - 1);
      if (name == "vague") section = Section::kVague;
      else if (name == "polysemy") section = Section::kPolysemy;
      else if (name == "pos") section = Section::kPos;
      else if (name == "wh") section = Section::kWh;
      else if (name == "coord") section = Section::kCoord;
      else if (name == "prep") section = Section::kPrep;
      else throw ParseError(lineno, "unknown lexicon section '" + std::string(name) + "'");
      if (eol == text.size()) break;
      continue;
    }

    auto split_tab = [&](std::string_view l) {
      const auto tab = l.find('\t');
      if (tab == std::string_view::npos) throw ParseError(lineno, "expected <lemma>TAB<value>");
      return std::pair{trim(l.substr(0, tab)), trim(l.substr(tab + 1))};
    };

    switch (section) {
      case Section::kNone:
        throw ParseError(lineno, "entry outside of any section");
      case Section::kVague:
        lex.vague_words.insert(lemmatize(line));
        break;
      case Section::kCoord:
        lex.coordinators.insert(lemmatize(line));
        break;
      case Section::kPrep:
        lex.prepositions.insert(lemmatize(line));
        break;
      case Section::kPolysemy: {
        auto [lemma, value] = split_tab(line);
        int count = 0;
        try {
          count = std::stoi(std::string(value));
        } catch (const std::exception&) {
          throw ParseError(lineno, "bad sense count '" + std::string(value) + "'");
        }
        if (count < 2) throw ParseError(lineno, "sense count must be >= 2");
        lex.polysemous_words[lemmatize(lemma)] = count;
        break;
      }
      case Section::kPos: {
        auto [lemma, value] = split_tab(line);
        auto& tags = lex.pos_table[lemmatize(lemma)];
        std::size_t p = 0;
        while (p <= value.size()) {
          const std::size_t comma = std::min(value.find(',', p), value.size());
          const auto tag = trim(value.substr(p, comma - p));
          if (!tag.empty()) tags.insert(std::string(tag));
          p = comma + 1;
        }
        break;
      }
      case Section::kWh:
        raw_openers.emplace_back(line);
        break;
    }
    if (eol == text.size()) break;
  }

  // Phrase patterns are lemmatized after the PoS table is complete.
  for (const auto& op : raw_openers) {
    std::string_view v = op;
    if (v.substr(0, 3) == "...") {
      lex.broad_nouns.insert(lemmatize(trim(v.substr(3))));
    } else {
      auto lemmas = lex.lemma_phrase(v);
      if (!lemmas.empty()) lex.wh_openers.push_back(std::move(lemmas));
    }
  }
  return lex;
}

inline Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

enum class Feature : std::size_t {
  kStructural = 0,
  kSyntactic = 1,
  kSemantic = 2,
  kVague = 3,
  kOpenEnded = 4,
  kMultiPart = 5,
};

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "structural", "syntactic", "semantic", "vague", "open_ended", "multi_part"};

// The six rule intensities in the fixed order of `Feature`.
struct FeatureVector {
  std::array<double, kNumFeatures> scores{};

  double operator[](Feature f) const { return scores[static_cast<std::size_t>(f)]; }
  double& operator[](Feature f) { return scores[static_cast<std::size_t>(f)]; }
  bool all_zero() const {
    return std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
  }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using ScorerWeights = std::array<double, kNumFeatures>;
inline constexpr ScorerWeights kUnitWeights = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

namespace detail {

// Half-open [begin, end) token ranges for each sentence. A sentence ends after
// '.', '?' or '!'.
inline std::vector<std::pair<std::size_t, std::size_t>> sentences(const std::vector<Token>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_punct('.') || tokens[i].is_punct('?') || tokens[i].is_punct('!')) {
      out.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < tokens.size()) out.emplace_back(begin, tokens.size());
  return out;
}

}  // namespace detail

// Listing-1 style count of vague lemmas, duplicates included.
inline double vague_expression_score(const std::vector<Token>& tokens, double weight,
                                     const Lexicon& lex = default_lexicon()) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += lex.vague_words.count(t.lemma);
  return weight * static_cast<double>(n);
}

// Prepositions that follow at least two distinct noun-tagged lemmas earlier in
// the same sentence: each one is a possible attachment site.
inline double structural_ambiguity_score(const std::vector<Token>& tokens, double weight,
                                         const Lexicon& lex = default_lexicon()) {
  std::size_t n = 0;
  for (auto [b, e] : detail::sentences(tokens)) {
    std::set<std::string> nouns;
    for (std::size_t i = b; i < e; ++i) {
      const auto& t = tokens[i];
      if (!t.is_word()) continue;
      if (lex.prepositions.count(t.lemma) && nouns.size() >= 2) ++n;
      if (t.pos_tags.count("NOUN")) nouns.insert(t.lemma);
    }
  }
  return weight * static_cast<double>(n);
}

inline double syntactic_ambiguity_score(const std::vector<Token>& tokens, double weight,
                                        const Lexicon& = default_lexicon()) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.pos_tags.size() >= 2 ? 1 : 0;
  return weight * static_cast<double>(n);
}

inline double semantic_ambiguity_score(const std::vector<Token>& tokens, double weight,
                                       const Lexicon& lex = default_lexicon()) {
  double extra_senses = 0.0;
  for (const auto& t : tokens) {
    auto it = lex.polysemous_words.find(t.lemma);
    if (it != lex.polysemous_words.end()) extra_senses += std::max(0, it->second - 1);
  }
  return weight * extra_senses;
}

// Per sentence: one point if it starts with an opener phrase, one more if it is
// a question whose last word is a broad-scope noun.
inline double open_endedness_score(const std::vector<Token>& tokens, double weight,
                                   const Lexicon& lex = default_lexicon()) {
  std::size_t n = 0;
  for (auto [b, e] : detail::sentences(tokens)) {
    for (const auto& pattern : lex.wh_openers) {
      if (e - b < pattern.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < pattern.size() && match; ++k) match = tokens[b + k].lemma == pattern[k];
      if (match) {
        ++n;
        break;
      }
    }
    if (tokens[e - 1].is_punct('?')) {
      for (std::size_t i = e - 1; i-- > b;) {
        if (!tokens[i].is_word()) continue;
        if (lex.broad_nouns.count(tokens[i].lemma)) ++n;
        break;
      }
    }
  }
  return weight * static_cast<double>(n);
}

// Sum of three components:
//   - question marks beyond the first;
//   - coordinators with a word on both sides inside the same sentence;
//   - comma-separated lists of >= 3 items. Items between commas hold 1..4
//     words; "A, B and C" counts the trailing coordinator as a third item.
inline double multi_partness_score(const std::vector<Token>& tokens, double weight,
                                   const Lexicon& lex = default_lexicon()) {
  constexpr std::size_t kMaxItemWords = 4;
  std::size_t questions = 0;
  for (const auto& t : tokens) questions += t.is_punct('?') ? 1 : 0;
  std::size_t n = questions > 1 ? questions - 1 : 0;

  for (auto [b, e] : detail::sentences(tokens)) {
    std::size_t words_before = 0;
    std::size_t words_total = 0;
    for (std::size_t i = b; i < e; ++i) words_total += tokens[i].is_word() ? 1 : 0;
    for (std::size_t i = b; i < e; ++i) {
      const auto& t = tokens[i];
      if (!t.is_word()) continue;
      if (lex.coordinators.count(t.lemma) && words_before > 0 && words_total - words_before - 1 > 0) ++n;
      ++words_before;
    }

    // Segments between commas, as word-index lists.
    std::vector<std::vector<std::size_t>> segments(1);
    for (std::size_t i = b; i < e; ++i) {
      if (tokens[i].is_punct(',')) segments.emplace_back();
      else if (tokens[i].is_word()) segments.back().push_back(i);
    }
    const std::size_t commas = segments.size() - 1;
    std::size_t c = 0;
    while (c < commas) {
      // A run starts at comma c (between segments c and c+1).
      if (segments[c].empty()) {
        ++c;
        continue;
      }
      std::size_t last = c;  // last comma in the run
      while (last + 1 < commas && !segments[last + 1].empty() &&
             segments[last + 1].size() <= kMaxItemWords) {
        ++last;
      }
      const auto& tail = segments[last + 1];
      if (tail.empty()) {
        c = last + 1;
        continue;
      }
      std::size_t items = (last - c + 1) + 1;
      const bool tail_leads_with_coord = lex.coordinators.count(tokens[tail.front()].lemma) > 0;
      if (!tail_leads_with_coord) {
        for (std::size_t k = 1; k < tail.size() && k <= kMaxItemWords; ++k) {
          if (lex.coordinators.count(tokens[tail[k]].lemma)) {
            ++items;
            break;
          }
        }
      }
      if (items >= 3) ++n;
      c = last + 1;
    }
  }
  return weight * static_cast<double>(n);
}

inline FeatureVector rule_gen_tokens(const std::vector<Token>& tokens, const ScorerWeights& w = kUnitWeights,
                                     const Lexicon& lex = default_lexicon()) {
  FeatureVector f;
  f[Feature::kStructural] = structural_ambiguity_score(tokens, w[0], lex);
  f[Feature::kSyntactic] = syntactic_ambiguity_score(tokens, w[1], lex);
  f[Feature::kSemantic] = semantic_ambiguity_score(tokens, w[2], lex);
  f[Feature::kVague] = vague_expression_score(tokens, w[3], lex);
  f[Feature::kOpenEnded] = open_endedness_score(tokens, w[4], lex);
  f[Feature::kMultiPart] = multi_partness_score(tokens, w[5], lex);
  return f;
}

inline FeatureVector rule_gen(std::string_view text, const ScorerWeights& w = kUnitWeights,
                              const Lexicon& lex = default_lexicon()) {
  return rule_gen_tokens(tokenize(text, lex), w, lex);
}

// Falls back to the token count when no rule fires; otherwise the strongest rule.
inline double single_rule_score(std::string_view text, const Lexicon& lex = default_lexicon()) {
  const auto tokens = tokenize(text, lex);
  const auto f = rule_gen_tokens(tokens, kUnitWeights, lex);
  if (f.all_zero()) return static_cast<double>(tokens.size());
  return *std::max_element(f.scores.begin(), f.scores.end());
}

}  // namespace rtlm::textfeat
