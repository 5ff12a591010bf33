#pragma once

// Prompt specs behind the checked-in golden files in tests/golden/.

#include "llmtaxo/generation.hpp"

namespace testing {

inline std::vector<llmtaxo::taxonomy::LearningExample> golden_examples() {
  return {
      {"Officials reported 12 cases of myocarditis after the second dose.",
       {"", "Vaccine Safety", "Side Effects", "Heart Inflammation"}},
      {"The city council voted to require masks in all public schools.",
       {"", "Public Policy", "Mandates", std::nullopt}},
  };
}

/// with_seed false gives the ablation spec.
inline llmtaxo::generation::PromptSpec golden_spec(bool with_seed) {
  llmtaxo::generation::PromptSpec spec;
  spec.examples = golden_examples();
  if (with_seed) spec.seed = llmtaxo::taxonomy::SeedTaxonomy(spec.examples);
  spec.target = {"t1", "Hospitals in Ohio reported 40 new admissions this week.", "t1", 0.8};
  return spec;
}

inline constexpr const char* kGoldenSeeded = "prompt_seeded.txt";
inline constexpr const char* kGoldenAblation = "prompt_ablation.txt";

}  // namespace testing
