#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lift/data.hpp"

namespace lift::prompts {

enum class NamingMode {
  generic,                  // x1=.., x2=.., what should be y?
  without_names_alt,        // generic wording with "what should be y value?"
  correct_names_list,       // feature names in place of xi
  correct_names_sentence,   // user sentence with {feature} holes
  shuffled_names_list,      // names under a fixed derangement
  shuffled_names_sentence,  // sentence holes filled through the derangement
};

std::string_view to_string(NamingMode mode);
NamingMode parse_naming_mode(std::string_view text);
bool uses_names(NamingMode mode);
bool is_shuffled(NamingMode mode);
bool is_sentence(NamingMode mode);

struct PromptTemplate {
  NamingMode naming = NamingMode::generic;
  std::uint64_t shuffle_seed = 0;
  std::string sentence_template;  // "{<feature name>}" holes, optional "{target}"
  std::string qa_separator = "###";
  std::string end_token = "@@@";
  int decimals = 2;
  std::optional<std::string> question_suffix;  // list modes; "{target}" allowed
  std::string answer_prefix = "y=";

  void validate() const;
  std::string effective_question_suffix(const FeatureSchema& schema) const;
};

struct PromptedExample {
  std::string prompt;
  std::string completion;

  bool operator==(const PromptedExample&) const = default;
};

/// Fixed permutation for the shuffled modes: a derangement whenever p >= 2.
/// Feature j is shown under the name of feature perm[j].
std::vector<std::size_t> feature_permutation(std::size_t p, std::uint64_t seed);

/// Rejects label sets, feature names and sentence text that contain a
/// separator. Call once per (template, dataset) before serializing.
void bind_template(const PromptTemplate& tpl, const FeatureSchema& schema,
                   std::span<const std::string> label_set);

std::string serialize_query(std::span<const double> row, const FeatureSchema& schema, const PromptTemplate& tpl);

std::string format_target(const Target& target, const PromptTemplate& tpl);

PromptedExample serialize_example(std::span<const double> row, const Target& target,
                                  const FeatureSchema& schema, const PromptTemplate& tpl);

std::vector<PromptedExample> serialize_dataset(const TabularDataset& ds, const PromptTemplate& tpl);
std::vector<std::string> serialize_queries(const TabularDataset& ds, const PromptTemplate& tpl);

// ---------------------------------------------------------------------------
// In-context prompts

struct IncontextPrompt {
  std::string text;
  std::size_t examples_used = 0;
};

/// Greedy prefix of `examples` (each as prompt + completion + separator)
/// that fits together with the query in `max_chars`, then the query.
IncontextPrompt build_incontext_prompt(std::span<const PromptedExample> examples, std::string_view query,
                                       std::size_t max_chars, std::string_view example_separator = "\n");

// ---------------------------------------------------------------------------
// Level (thermometer) encoding of a bounded response

struct LevelEncoding {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 1;

  void validate() const;
  std::size_t bin_of(double y) const;
  double bin_midpoint(std::size_t bin) const;
};

/// Bin k of `bins` is a string of bins-1 characters whose last k are '1'.
std::string encode_level(double y, const LevelEncoding& enc);
double decode_level(std::string_view code, const LevelEncoding& enc);
std::size_t hamming_distance(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Image generation prompts

inline constexpr std::size_t kCroppedPixels = 324;
inline constexpr std::size_t kHalfPixels = 162;

std::string image_generation_prompt(int digit, const PromptTemplate& tpl = {});
PromptedExample image_generation_example(int digit, std::span<const int> pixels, const PromptTemplate& tpl = {});
/// Prompt followed by the first `include_count` pixels (0 or 162).
std::string image_generation_query(int digit, std::span<const int> pixels, std::size_t include_count,
                                   const PromptTemplate& tpl = {});

// ---------------------------------------------------------------------------
// JSONL fine-tune files: one {"prompt":..,"completion":..} object per line.

std::string to_jsonl_line(const PromptedExample& example);
void write_jsonl(std::ostream& out, std::span<const PromptedExample> examples);
void save_jsonl(const std::filesystem::path& path, std::span<const PromptedExample> examples);
std::vector<PromptedExample> read_jsonl(std::istream& in);
std::vector<PromptedExample> load_jsonl(const std::filesystem::path& path);

}  // namespace lift::prompts
