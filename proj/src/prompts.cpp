#include "lift/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lift/error.hpp"
#include "lift/random.hpp"
#include "lift/text.hpp"

namespace lift::prompts {

std::string_view to_string(NamingMode mode) {
  switch (mode) {
    case NamingMode::generic: return "generic";
    case NamingMode::without_names_alt: return "without_names_alt";
    case NamingMode::correct_names_list: return "correct_names_list";
    case NamingMode::correct_names_sentence: return "correct_names_sentence";
    case NamingMode::shuffled_names_list: return "shuffled_names_list";
    case NamingMode::shuffled_names_sentence: return "shuffled_names_sentence";
  }
  return "?";
}

NamingMode parse_naming_mode(std::string_view text) {
  for (auto m : {NamingMode::generic, NamingMode::without_names_alt, NamingMode::correct_names_list,
                 NamingMode::correct_names_sentence, NamingMode::shuffled_names_list,
                 NamingMode::shuffled_names_sentence}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown naming mode '{}'", text));
}

bool uses_names(NamingMode mode) {
  return mode != NamingMode::generic && mode != NamingMode::without_names_alt;
}

bool is_shuffled(NamingMode mode) {
  return mode == NamingMode::shuffled_names_list || mode == NamingMode::shuffled_names_sentence;
}

bool is_sentence(NamingMode mode) {
  return mode == NamingMode::correct_names_sentence || mode == NamingMode::shuffled_names_sentence;
}

namespace {

// A separator made only of characters that occur in formatted numbers could
// collide with a serialized value.
bool number_safe(std::string_view sep) {
  return sep.find_first_not_of("0123456789.-+eE") != std::string_view::npos;
}

void require_no_separator(std::string_view text, const PromptTemplate& tpl, std::string_view what) {
  if (text.find(tpl.qa_separator) != std::string_view::npos || text.find(tpl.end_token) != std::string_view::npos) {
    throw Error(ErrorCode::separator_in_text, fmt::format("{} '{}' contains a separator", what, text));
  }
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::set<std::string> placeholders(std::string_view text) {
  std::set<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const auto close = text.find('}', pos + 1);
    if (close == std::string_view::npos) break;
    out.emplace(text.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return out;
}

void check_sentence_holes(const PromptTemplate& tpl, const FeatureSchema& schema) {
  auto holes = placeholders(tpl.sentence_template);
  holes.erase("target");
  const std::set<std::string> names(schema.names.begin(), schema.names.end());
  if (holes != names) {
    std::vector<std::string> missing;
    for (const auto& n : names) {
      if (!holes.count(n)) missing.push_back(n);
    }
    std::vector<std::string> unknown;
    for (const auto& h : holes) {
      if (!names.count(h)) unknown.push_back(h);
    }
    throw Error(ErrorCode::template_hole_mismatch,
                fmt::format("sentence template holes do not match features (missing: [{}], unknown: [{}])",
                            join(missing, ", "), join(unknown, ", ")));
  }
}

void check_row(std::span<const double> row, const FeatureSchema& schema, const PromptTemplate& tpl) {
  if (row.size() != schema.p) {
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("row has {} values, schema has {} features", row.size(), schema.p));
  }
  if (uses_names(tpl.naming) && !schema.has_names()) {
    throw Error(ErrorCode::missing_names, fmt::format("naming mode '{}' needs feature names", to_string(tpl.naming)));
  }
}

}  // namespace

void PromptTemplate::validate() const {
  if (qa_separator.empty() || end_token.empty()) {
    throw Error(ErrorCode::invalid_argument, "separators must be non-empty");
  }
  if (qa_separator == end_token || qa_separator.find(end_token) != std::string::npos ||
      end_token.find(qa_separator) != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "qa_separator and end_token must be distinct");
  }
  if (!number_safe(qa_separator) || !number_safe(end_token)) {
    throw Error(ErrorCode::invalid_argument, "separators must not look like numbers");
  }
  if (decimals < 0 || decimals > 17) throw Error(ErrorCode::invalid_argument, "decimals must be in [0,17]");
  if (is_sentence(naming) && sentence_template.empty()) {
    throw Error(ErrorCode::invalid_argument, "sentence naming mode needs a sentence_template");
  }
}

std::string PromptTemplate::effective_question_suffix(const FeatureSchema& schema) const {
  std::string suffix;
  if (question_suffix) {
    suffix = *question_suffix;
  } else if (naming == NamingMode::without_names_alt) {
    suffix = "what should be y value?";
  } else if (uses_names(naming) && !schema.target_name.empty()) {
    suffix = "how is the {target}?";
  } else {
    suffix = "what should be y?";
  }
  return replace_all(std::move(suffix), "{target}", schema.target_name.empty() ? "y" : schema.target_name);
}

std::vector<std::size_t> feature_permutation(std::size_t p, std::uint64_t seed) {
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (p < 2) return perm;
  Rng rng = make_rng(seed, 0x5f);
  for (;;) {
    std::shuffle(perm.begin(), perm.end(), rng);
    bool deranged = true;
    for (std::size_t i = 0; i < p; ++i) deranged = deranged && perm[i] != i;
    if (deranged) return perm;
  }
}

void bind_template(const PromptTemplate& tpl, const FeatureSchema& schema, std::span<const std::string> label_set) {
  tpl.validate();
  for (const auto& label : label_set) require_no_separator(label, tpl, "label");
  if (uses_names(tpl.naming)) {
    if (!schema.has_names()) {
      throw Error(ErrorCode::missing_names, fmt::format("naming mode '{}' needs feature names", to_string(tpl.naming)));
    }
    for (const auto& name : schema.names) require_no_separator(name, tpl, "feature name");
  }
  if (is_sentence(tpl.naming)) {
    require_no_separator(tpl.sentence_template, tpl, "sentence template");
    check_sentence_holes(tpl, schema);
  }
  if (tpl.question_suffix) require_no_separator(*tpl.question_suffix, tpl, "question suffix");
}

std::string serialize_query(std::span<const double> row, const FeatureSchema& schema, const PromptTemplate& tpl) {
  check_row(row, schema, tpl);

  std::vector<std::size_t> perm(schema.p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (is_shuffled(tpl.naming)) perm = feature_permutation(schema.p, tpl.shuffle_seed);

  if (is_sentence(tpl.naming)) {
    check_sentence_holes(tpl, schema);
    // Substitute all holes in one pass so values never get re-scanned.
    std::map<std::string, std::string> fill;
    for (std::size_t j = 0; j < schema.p; ++j) {
      fill[schema.names[perm[j]]] = format_number(row[j], tpl.decimals);
    }
    fill["target"] = schema.target_name.empty() ? "y" : schema.target_name;
    std::string out;
    const std::string& s = tpl.sentence_template;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const auto open = s.find('{', pos);
      if (open == std::string::npos) {
        out.append(s, pos);
        break;
      }
      const auto close = s.find('}', open + 1);
      if (close == std::string::npos) {
        out.append(s, pos);
        break;
      }
      out.append(s, pos, open - pos);
      const auto it = fill.find(s.substr(open + 1, close - open - 1));
      out += it != fill.end() ? it->second : s.substr(open, close - open + 1);
      pos = close + 1;
    }
    return out + tpl.qa_separator;
  }

  std::string out = "When we have ";
  for (std::size_t j = 0; j < schema.p; ++j) {
    const std::string name = uses_names(tpl.naming) ? schema.names[perm[j]] : fmt::format("x{}", j + 1);
    out += name;
    out += '=';
    out += format_number(row[j], tpl.decimals);
    out += ", ";
  }
  out += tpl.effective_question_suffix(schema);
  out += tpl.qa_separator;
  return out;
}

std::string format_target(const Target& target, const PromptTemplate& tpl) {
  if (const auto* label = std::get_if<std::string>(&target)) return *label;
  return format_number(std::get<double>(target), tpl.decimals);
}

PromptedExample serialize_example(std::span<const double> row, const Target& target, const FeatureSchema& schema,
                                  const PromptTemplate& tpl) {
  PromptedExample ex;
  ex.prompt = serialize_query(row, schema, tpl);
  ex.completion = " " + tpl.answer_prefix + format_target(target, tpl) + tpl.end_token;
  return ex;
}

std::vector<PromptedExample> serialize_dataset(const TabularDataset& ds, const PromptTemplate& tpl) {
  bind_template(tpl, ds.schema(), ds.label_set());
  std::vector<PromptedExample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back(serialize_example(ds.rows()[i], ds.targets()[i], ds.schema(), tpl));
  }
  return out;
}

std::vector<std::string> serialize_queries(const TabularDataset& ds, const PromptTemplate& tpl) {
  bind_template(tpl, ds.schema(), ds.label_set());
  std::vector<std::string> out;
  out.reserve(ds.size());
  for (const auto& row : ds.rows()) out.push_back(serialize_query(row, ds.schema(), tpl));
  return out;
}

IncontextPrompt build_incontext_prompt(std::span<const PromptedExample> examples, std::string_view query,
                                       std::size_t max_chars, std::string_view example_separator) {
  if (query.size() > max_chars) {
    throw Error(ErrorCode::query_too_long,
                fmt::format("query of {} chars exceeds budget of {}", query.size(), max_chars));
  }
  IncontextPrompt out;
  std::size_t used = query.size();
  for (const auto& ex : examples) {
    const std::size_t cost = ex.prompt.size() + ex.completion.size() + example_separator.size();
    if (used + cost > max_chars) break;
    out.text += ex.prompt;
    out.text += ex.completion;
    out.text += example_separator;
    used += cost;
    ++out.examples_used;
  }
  out.text += query;
  return out;
}

// ---------------------------------------------------------------------------

void LevelEncoding::validate() const {
  if (!(lo < hi)) throw Error(ErrorCode::invalid_argument, "level encoding needs lo < hi");
  if (bins < 1) throw Error(ErrorCode::invalid_argument, "level encoding needs at least one bin");
}

std::size_t LevelEncoding::bin_of(double y) const {
  validate();
  if (!(y >= lo && y <= hi)) {
    throw Error(ErrorCode::out_of_range, fmt::format("{} outside [{}, {}]", y, lo, hi));
  }
  const double scaled = (y - lo) * static_cast<double>(bins) / (hi - lo);
  const auto k = static_cast<std::size_t>(std::floor(scaled));
  return std::min(k, bins - 1);
}

double LevelEncoding::bin_midpoint(std::size_t bin) const {
  return lo + (static_cast<double>(bin) + 0.5) * (hi - lo) / static_cast<double>(bins);
}

std::string encode_level(double y, const LevelEncoding& enc) {
  const std::size_t k = enc.bin_of(y);
  std::string code(enc.bins - 1, '0');
  std::fill(code.end() - static_cast<std::ptrdiff_t>(k), code.end(), '1');
  return code;
}

double decode_level(std::string_view code, const LevelEncoding& enc) {
  enc.validate();
  if (code.size() != enc.bins - 1) {
    throw Error(ErrorCode::malformed_code,
                fmt::format("code '{}' has length {}, expected {}", code, code.size(), enc.bins - 1));
  }
  const auto first_one = code.find('1');
  const std::size_t ones = first_one == std::string_view::npos ? 0 : code.size() - first_one;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const char expected = i < code.size() - ones ? '0' : '1';
    if (code[i] != expected) throw Error(ErrorCode::malformed_code, fmt::format("'{}' is not a thermometer code", code));
  }
  return enc.bin_midpoint(ones);
}

std::size_t hamming_distance(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "hamming distance of unequal lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// ---------------------------------------------------------------------------

namespace {

void check_digit(int digit) {
  if (digit < 0 || digit > 9) throw Error(ErrorCode::invalid_argument, fmt::format("digit {} not in 0..9", digit));
}

std::string join_pixels(std::span<const int> pixels) {
  std::string out;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i] < 0 || pixels[i] > 255) {
      throw Error(ErrorCode::bad_pixel_range, fmt::format("pixel {} has value {}", i, pixels[i]));
    }
    if (i) out += ' ';
    out += std::to_string(pixels[i]);
  }
  return out;
}

void check_pixel_count(std::span<const int> pixels) {
  if (pixels.size() != kCroppedPixels) {
    throw Error(ErrorCode::bad_pixel_count, fmt::format("{} pixels, expected {}", pixels.size(), kCroppedPixels));
  }
}

}  // namespace

std::string image_generation_prompt(int digit, const PromptTemplate& tpl) {
  check_digit(digit);
  return fmt::format("Generate an image of digit {}.{}", digit, tpl.qa_separator);
}

PromptedExample image_generation_example(int digit, std::span<const int> pixels, const PromptTemplate& tpl) {
  check_pixel_count(pixels);
  return {image_generation_prompt(digit, tpl), join_pixels(pixels) + tpl.end_token};
}

std::string image_generation_query(int digit, std::span<const int> pixels, std::size_t include_count,
                                   const PromptTemplate& tpl) {
  if (include_count != 0 && include_count != kHalfPixels) {
    throw Error(ErrorCode::invalid_argument, fmt::format("include_count must be 0 or {}", kHalfPixels));
  }
  std::string query = image_generation_prompt(digit, tpl);
  if (include_count == 0) return query;
  check_pixel_count(pixels);
  return query + " " + join_pixels(pixels.first(include_count));
}

// ---------------------------------------------------------------------------

std::string to_jsonl_line(const PromptedExample& example) {
  nlohmann::ordered_json j;
  j["prompt"] = example.prompt;
  j["completion"] = example.completion;
  return j.dump();
}

void write_jsonl(std::ostream& out, std::span<const PromptedExample> examples) {
  for (const auto& ex : examples) out << to_jsonl_line(ex) << '\n';
}

void save_jsonl(const std::filesystem::path& path, std::span<const PromptedExample> examples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", path.string()));
  write_jsonl(out, examples);
}

std::vector<PromptedExample> read_jsonl(std::istream& in) {
  std::vector<PromptedExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::malformed_jsonl, fmt::format("line {}: {}", line_no, e.what()), line_no);
    }
    if (!j.is_object() || j.size() != 2 || !j.contains("prompt") || !j.contains("completion") ||
        !j["prompt"].is_string() || !j["completion"].is_string()) {
      throw Error(ErrorCode::malformed_jsonl,
                  fmt::format("line {}: expected exactly string fields prompt and completion", line_no), line_no);
    }
    out.push_back({j["prompt"].get<std::string>(), j["completion"].get<std::string>()});
  }
  return out;
}

std::vector<PromptedExample> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open '{}'", path.string()));
  return read_jsonl(in);
}

}  // namespace lift::prompts
