#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"
#include "workload.hpp"

namespace rtlm::synth {

// Synthetic dialogue trace: neutral context sentences plus planted sentences
// from the six uncertainty categories. Output lengths grow with each planted
// sentence; mean contributions rank the lexical ambiguities below vague
// expressions, and those below open-ended and multi-part questions.

enum class Category : std::size_t { kStructural, kSyntactic, kSemantic, kVague, kOpenEnded, kMultiPart };
inline constexpr std::size_t kNumCategories = 6;

struct SynthConfig {
  // Expected output tokens added per planted sentence, by category.
  std::array<double, kNumCategories> contribution = {5.0, 4.0, 6.0, 10.0, 16.0, 18.0};
  std::array<double, kNumCategories> category_weight = {0.15, 0.15, 0.15, 0.20, 0.175, 0.175};
  // P(number of planted sentences = 0, 1, 2, 3).
  std::array<double, 4> planted_count_p = {0.35, 0.40, 0.20, 0.05};
  double base_len = 6.0;
  double per_context_word = 0.15;
  double noise_sigma = 0.2;  // multiplicative log-normal noise
  int min_context = 2;
  int max_context = 4;
};

namespace detail {

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& a) {
  return a[static_cast<std::size_t>(rng.below(N))];
}

inline constexpr std::array<std::string_view, 24> kContext = {
    "I went to the store today.",
    "My friend is a teacher.",
    "We had tea in the afternoon.",
    "The weather is nice.",
    "She bought a new coat.",
    "It was a long day.",
    "I made dinner for my family.",
    "The car is red.",
    "My sister has a dog.",
    "We went home early.",
    "Hello there.",
    "Thanks for asking.",
    "I am fine.",
    "That sounds nice.",
    "I just got back from the city.",
    "My brother is a doctor.",
    "We have a small garden.",
    "I usually drink coffee.",
    "The movie was good.",
    "Yes, I agree.",
    "Not really.",
    "I have a cat.",
    "My father is a student again.",
    "Our house is near the river.",
};

inline constexpr std::array<std::string_view, 2> kNames = {"John", "Mary"};
inline constexpr std::array<std::string_view, 9> kPeople = {"boy", "girl", "man", "woman", "friend",
                                                             "teacher", "student", "doctor", "child"};
inline constexpr std::array<std::string_view, 6> kPlaces = {"park", "garden", "river", "city", "house", "store"};
inline constexpr std::array<std::string_view, 4> kTools = {"telescope", "camera", "hat", "coat"};
inline constexpr std::array<std::string_view, 4> kFlyNouns = {"Rice", "Time", "Sand", "Fruit"};
inline constexpr std::array<std::string_view, 4> kFlyTargets = {"sand", "an arrow", "rice", "a banana"};
inline constexpr std::array<std::string_view, 12> kPoly = {"bat", "trunk", "monitor", "bank", "bark", "pitch",
                                                            "spring", "ring", "match", "mouse", "club", "star"};
inline constexpr std::array<std::string_view, 10> kVagueTopics = {"history", "art", "life", "culture", "science",
                                                                   "nature", "technology", "philosophy", "religion",
                                                                   "politics"};
inline constexpr std::array<std::string_view, 5> kOpenTopics = {"poverty", "pollution", "inequality", "war",
                                                                 "unemployment"};
inline constexpr std::array<std::string_view, 3> kAnimals = {"cat", "dog", "bird"};
inline constexpr std::array<std::string_view, 6> kTraits = {"behavior", "diet", "social interaction", "habitat",
                                                             "size", "intelligence"};

inline std::string planted_sentence(Category c, Rng& rng) {
  std::string s;
  switch (c) {
    case Category::kStructural:
      if (rng.bernoulli(0.5)) {
        s = std::string(pick(rng, kNames)) + " saw a " + std::string(pick(rng, kPeople)) + " in the " +
            std::string(pick(rng, kPlaces)) + " with a " + std::string(pick(rng, kTools)) + ".";
      } else {
        s = "The " + std::string(pick(rng, kPeople)) + " met a " + std::string(pick(rng, kPeople)) +
            " near the " + std::string(pick(rng, kPlaces)) + " with a " + std::string(pick(rng, kTools)) + ".";
      }
      break;
    case Category::kSyntactic:
      s = std::string(pick(rng, kFlyNouns)) + " flies like " + std::string(pick(rng, kFlyTargets)) + ".";
      break;
    case Category::kSemantic:
      if (rng.bernoulli(0.5)) {
        s = "What's the best way to deal with " + std::string(pick(rng, kPoly)) + "s?";
      } else {
        s = "I saw the " + std::string(pick(rng, kPoly)) + " by the " + std::string(pick(rng, kPoly)) + ".";
      }
      break;
    case Category::kVague:
      if (rng.bernoulli(0.5)) {
        s = "Tell me about the " + std::string(pick(rng, kVagueTopics)) + " of " +
            std::string(pick(rng, kVagueTopics)) + ".";
      } else {
        s = "Tell me something about " + std::string(pick(rng, kVagueTopics)) + ".";
      }
      break;
    case Category::kOpenEnded:
      switch (rng.below(3)) {
        case 0:
          s = "What are the causes and consequences of " + std::string(pick(rng, kOpenTopics)) +
              " in developing countries?";
          break;
        case 1:
          s = "How will " + std::string(pick(rng, kVagueTopics)) + " change society?";
          break;
        default:
          s = "Why do people care about " + std::string(pick(rng, kOpenTopics)) + "?";
          break;
      }
      break;
    case Category::kMultiPart:
      if (rng.bernoulli(0.5)) {
        s = "How do " + std::string(pick(rng, kAnimals)) + "s and " + std::string(pick(rng, kAnimals)) +
            "s differ in " + std::string(pick(rng, kTraits)) + ", " + std::string(pick(rng, kTraits)) + ", and " +
            std::string(pick(rng, kTraits)) + "?";
      } else {
        s = "Where is the " + std::string(pick(rng, kPlaces)) + "? When does it open? And who runs it?";
      }
      break;
  }
  return s;
}

inline std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace detail

inline std::vector<workload::TraceRecord> synthesize_trace(std::size_t n, std::uint64_t seed,
                                                           const SynthConfig& cfg = {},
                                                           std::uint64_t first_id = 0) {
  Rng rng(seed, "synth");
  std::vector<workload::TraceRecord> out;
  out.reserve(n);
  double cat_total = 0.0;
  for (double w : cfg.category_weight) cat_total += w;

  for (std::size_t i = 0; i < n; ++i) {
    // Planted sentence count.
    double u = rng.uniform();
    int planted = 0;
    for (int k = 0; k < 4; ++k) {
      if (u < cfg.planted_count_p[static_cast<std::size_t>(k)]) {
        planted = k;
        break;
      }
      u -= cfg.planted_count_p[static_cast<std::size_t>(k)];
      planted = k;
    }
    const int span = cfg.max_context - cfg.min_context + 1;
    const int context = cfg.min_context + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));

    std::vector<std::string> sentences;
    std::size_t context_words = 0;
    for (int c = 0; c < context; ++c) {
      std::string s(detail::pick(rng, detail::kContext));
      context_words += detail::count_words(s);
      sentences.push_back(std::move(s));
    }
    double expected = cfg.base_len + cfg.per_context_word * static_cast<double>(context_words);
    for (int p = 0; p < planted; ++p) {
      double v = rng.uniform() * cat_total;
      std::size_t cat = 0;
      for (; cat + 1 < kNumCategories; ++cat) {
        if (v < cfg.category_weight[cat]) break;
        v -= cfg.category_weight[cat];
      }
      expected += cfg.contribution[cat];
      sentences.push_back(detail::planted_sentence(static_cast<Category>(cat), rng));
    }
    // Planted questions go last, after the context.
    std::string text;
    for (const auto& s : sentences) {
      if (!text.empty()) text += ' ';
      text += s;
    }
    const double noise = std::exp(cfg.noise_sigma * rng.normal() - 0.5 * cfg.noise_sigma * cfg.noise_sigma);
    workload::TraceRecord r;
    r.id = first_id + i;
    r.text = std::move(text);
    r.out_len = std::max(1, static_cast<int>(std::lround(expected * noise)));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rtlm::synth
