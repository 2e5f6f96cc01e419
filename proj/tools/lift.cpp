// Command-line front end: lift <subcommand> [options]

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lift/backends.hpp"
#include "lift/baselines.hpp"
#include "lift/data.hpp"
#include "lift/error.hpp"
#include "lift/eval.hpp"
#include "lift/parse.hpp"
#include "lift/prompts.hpp"
#include "lift/runner.hpp"
#include "lift/synth.hpp"
#include "lift/text.hpp"

namespace {

using lift::runner::json;

void print_error(const std::string& code, const std::string& message, std::optional<std::size_t> line = {},
                 std::optional<std::size_t> column = {}) {
  json j{{"error", code}, {"message", message}};
  if (line) j["line"] = *line;
  if (column) j["column"] = *column;
  std::cerr << j.dump() << '\n';
}

lift::CsvOptions csv_options(const std::string& task, const std::string& target, bool no_header) {
  lift::CsvOptions o;
  o.task = lift::parse_task_kind(task);
  o.has_header = !no_header;
  if (!target.empty()) {
    if (auto idx = lift::parse_double(target); idx && *idx >= 0 && *idx == std::floor(*idx)) {
      o.target_column = static_cast<std::size_t>(*idx);
    } else {
      o.target_column = target;
    }
  }
  return o;
}

std::unique_ptr<lift::backends::Backend> offline_or_http(const std::string& kind, const std::string& store,
                                                         std::uint64_t seed) {
  lift::runner::BackendConfig bc;
  if (kind == "memorizer") {
    bc.kind = lift::backends::BackendKind::memorizer;
    bc.store_dir = store;
    std::filesystem::create_directories(store);
  } else if (kind == "http") {
    bc.kind = lift::backends::BackendKind::http;
  } else {
    throw lift::Error(lift::ErrorCode::invalid_argument, fmt::format("backend '{}' is not usable from the CLI", kind));
  }
  bc.seed = seed;
  return lift::runner::make_backend(bc, 0);
}

int finish(const lift::runner::ExperimentResult& r) {
  std::cout << r.to_json().dump(2) << '\n';
  if (r.error) {
    print_error(r.error->code, r.error->message);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LIFT experiment harness"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset as CSV");
  std::string gen_type = "classification", gen_function = "linear", gen_shape = "blobs", gen_out;
  std::size_t gen_p = 1, gen_n = 1000;
  double gen_sigma = 0.1, gen_noise = 0.1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--type", gen_type, "regression | classification | heteroscedastic");
  gen->add_option("--function", gen_function, "linear | quadratic | exponential | cosine | l1norm | piecewise");
  gen->add_option("--shape", gen_shape, "blobs | circles | two_circles | moons | nine_clusters");
  gen->add_option("--p", gen_p, "Feature count (regression)");
  gen->add_option("--n", gen_n, "Sample count");
  gen->add_option("--sigma", gen_sigma, "Regression noise std");
  gen->add_option("--noise", gen_noise, "Classification noise std");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // serialize
  auto* ser = app.add_subcommand("serialize", "Turn a CSV into a prompt/completion JSONL file");
  std::string ser_in, ser_out, ser_task = "classification", ser_target, ser_naming = "generic", ser_sentence;
  int ser_decimals = 2;
  bool ser_no_header = false;
  ser->add_option("--input", ser_in)->required();
  ser->add_option("--out", ser_out)->required();
  ser->add_option("--task", ser_task);
  ser->add_option("--target", ser_target, "Target column name or 0-based index (default 0)");
  ser->add_flag("--no-header", ser_no_header);
  ser->add_option("--naming", ser_naming);
  ser->add_option("--sentence", ser_sentence, "Sentence template with {feature} holes");
  ser->add_option("--decimals", ser_decimals);

  // finetune
  auto* ft = app.add_subcommand("finetune", "Fine-tune on a JSONL file; prints the model handle");
  std::string ft_jsonl, ft_backend = "memorizer", ft_store = ".lift-models", ft_base = "davinci-002";
  std::size_t ft_epochs = 5;
  std::optional<double> ft_lr;
  ft->add_option("--jsonl", ft_jsonl)->required();
  ft->add_option("--backend", ft_backend, "memorizer | http");
  ft->add_option("--store", ft_store, "Memorizer model directory");
  ft->add_option("--epochs", ft_epochs);
  ft->add_option("--lr-mult", ft_lr);
  ft->add_option("--base-model", ft_base);

  // predict
  auto* pr = app.add_subcommand("predict", "Predict a CSV with a fine-tuned model and score it");
  std::string pr_model, pr_backend = "memorizer", pr_store = ".lift-models", pr_in, pr_out, pr_task = "classification",
                        pr_target, pr_naming = "generic", pr_fallback;
  int pr_decimals = 2;
  bool pr_no_header = false;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--backend", pr_backend);
  pr->add_option("--store", pr_store);
  pr->add_option("--input", pr_in)->required();
  pr->add_option("--out", pr_out, "Predictions JSONL");
  pr->add_option("--task", pr_task);
  pr->add_option("--target", pr_target);
  pr->add_flag("--no-header", pr_no_header);
  pr->add_option("--naming", pr_naming);
  pr->add_option("--decimals", pr_decimals);
  pr->add_option("--fallback", pr_fallback, "Fallback value (default: mean or majority of the input)");

  // config-driven commands
  std::string cfg_path, out_dir, report_format = "md", report_out, references;
  std::vector<std::string> overrides, result_paths;
  std::vector<std::size_t> sizes;
  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", cfg_path, "Experiment config (JSON)")->required();
    sub->add_option("--set", overrides, "Override a config key: key.path=value");
    sub->add_option("--output-dir", out_dir, "Overrides output_dir");
  };
  auto* run = app.add_subcommand("run", "Run an experiment config");
  add_config_flags(run);
  auto* sweep = app.add_subcommand("sweep", "Sample-complexity sweep over train sizes");
  add_config_flags(sweep);
  sweep->add_option("--sizes", sizes, "Ascending train sizes")->required()->delimiter(',');
  auto* icl = app.add_subcommand("icl", "In-context run (mode forced to in_context)");
  add_config_flags(icl);
  auto* base = app.add_subcommand("baseline", "Baseline run (mode forced to baseline)");
  add_config_flags(base);

  auto* rep = app.add_subcommand("report", "Tabulate result.json files");
  rep->add_option("results", result_paths, "result.json files or run directories")->required();
  rep->add_option("--format", report_format, "json | csv | md");
  rep->add_option("--out", report_out);
  rep->add_option("--references", references, "Published results CSV to add matching rows from");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      json j{{"type", gen_type}, {"function", gen_function}, {"shape", gen_shape}, {"p", gen_p},
             {"n", gen_n},       {"sigma", gen_sigma},       {"noise", gen_noise}, {"seed", gen_seed}};
      auto cfg = lift::runner::config_from_json(json{{"dataset", {{"synth", j}}}});
      const auto ds = cfg.dataset.load();
      lift::save_csv(ds, gen_out);
      std::cout << json{{"rows", ds.size()}, {"p", ds.p()}, {"out", gen_out}}.dump() << '\n';
      return 0;
    }
    if (*ser) {
      const auto ds = lift::load_csv(ser_in, csv_options(ser_task, ser_target, ser_no_header));
      lift::prompts::PromptTemplate tpl;
      tpl.naming = lift::prompts::parse_naming_mode(ser_naming);
      tpl.sentence_template = ser_sentence;
      tpl.decimals = ser_decimals;
      const auto examples = lift::prompts::serialize_dataset(ds, tpl);
      lift::prompts::save_jsonl(ser_out, examples);
      std::cout << json{{"examples", examples.size()}, {"out", ser_out}}.dump() << '\n';
      return 0;
    }
    if (*ft) {
      auto backend = offline_or_http(ft_backend, ft_store, 0);
      std::ifstream in(ft_jsonl);
      if (!in) throw lift::Error(lift::ErrorCode::io_error, "cannot open " + ft_jsonl);
      lift::backends::FineTuneSpec spec;
      spec.epochs = ft_epochs;
      spec.learning_rate_multiplier = ft_lr;
      spec.base_model = ft_base;
      const auto h = lift::backends::fine_tune_jsonl(*backend, in, spec);
      std::cout << json{{"backend", std::string(lift::backends::to_string(h.backend_kind))}, {"model_id", h.model_id}}.dump()
                << '\n';
      return 0;
    }
    if (*pr) {
      auto backend = offline_or_http(pr_backend, pr_store, 0);
      const auto kind = pr_backend == "http" ? lift::backends::BackendKind::http : lift::backends::BackendKind::memorizer;
      const lift::backends::ModelHandle handle{kind, pr_model};
      const auto ds = lift::load_csv(pr_in, csv_options(pr_task, pr_target, pr_no_header));
      lift::prompts::PromptTemplate tpl;
      tpl.naming = lift::prompts::parse_naming_mode(pr_naming);
      tpl.decimals = pr_decimals;
      lift::parse::InferenceSettings s;
      s.task = ds.task();
      s.label_set = ds.label_set();
      if (!pr_fallback.empty()) {
        if (ds.task() == lift::TaskKind::regression) {
          const auto v = lift::parse_double(pr_fallback);
          if (!v) throw lift::Error(lift::ErrorCode::invalid_argument, "--fallback must be numeric for regression");
          s.fallback = *v;
        } else {
          s.fallback = pr_fallback;
        }
      } else {
        s.fallback = lift::parse::fallback_for(ds);
      }
      const auto source = lift::parse::bind(*backend, handle);
      const auto queries = lift::prompts::serialize_queries(ds, tpl);
      std::ofstream out;
      if (!pr_out.empty()) out.open(pr_out);
      std::vector<double> pv;
      std::vector<std::string> pl;
      std::size_t fallbacks = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto p = lift::parse::infer_with_retry(source, queries[i], s);
        fallbacks += p.used_fallback;
        if (ds.task() == lift::TaskKind::regression) pv.push_back(std::get<double>(p.value));
        else pl.push_back(std::get<std::string>(p.value));
        if (out.is_open()) {
          json j{{"row", i}, {"prompt", queries[i]}, {"value", lift::target_to_string(p.value)},
                 {"valid", p.valid}, {"attempts", p.attempts}, {"raw_texts", p.raw_texts}};
          out << j.dump() << '\n';
        }
      }
      lift::eval::MetricReport r;
      if (ds.task() == lift::TaskKind::regression) {
        r = lift::eval::regression_metrics(pv, ds.values());
      } else {
        const auto truth = ds.labels();
        std::optional<std::string> fb;
        if (const auto* f = std::get_if<std::string>(&s.fallback)) fb = *f;
        r = lift::eval::classification_metrics(pl, truth, std::nullopt, ds.label_set(), fb);
      }
      r.set_fallbacks(fallbacks);
      std::cout << r.to_json().dump(2) << '\n';
      return 0;
    }
    if (*run || *sweep || *icl || *base) {
      if (*icl) overrides.push_back("mode=in_context");
      if (*base) overrides.push_back("mode=baseline");
      if (!out_dir.empty()) overrides.push_back("output_dir=" + json(out_dir).dump());
      const auto cfg = lift::runner::load_config(cfg_path, overrides);
      if (*sweep) {
        const auto results = lift::runner::sample_complexity_sweep(cfg, sizes);
        json arr = json::array();
        int rc = 0;
        for (const auto& r : results) {
          arr.push_back(r.to_json());
          if (r.error) {
            print_error(r.error->code, r.error->message);
            rc = 1;
          }
        }
        std::cout << arr.dump(2) << '\n';
        return rc;
      }
      return finish(lift::runner::run(cfg));
    }
    if (*rep) {
      std::vector<lift::runner::ReportRow> rows;
      std::vector<lift::baselines::ReferenceResult> refs;
      if (!references.empty()) refs = lift::baselines::load_reference_results(references);
      for (const auto& p : result_paths) {
        std::filesystem::path file = p;
        if (std::filesystem::is_directory(file)) file /= "result.json";
        std::ifstream in(file);
        if (!in) throw lift::Error(lift::ErrorCode::io_error, "cannot open " + file.string());
        const auto row = lift::runner::report_row(json::parse(in));
        rows.push_back(row);
      }
      if (!refs.empty()) {
        std::vector<std::string> seen;
        const std::size_t own = rows.size();
        for (std::size_t i = 0; i < own; ++i) {
          if (std::find(seen.begin(), seen.end(), rows[i].dataset) != seen.end()) continue;
          seen.push_back(rows[i].dataset);
          for (auto& r : lift::runner::reference_rows(refs, rows[i].dataset)) rows.push_back(std::move(r));
        }
      }
      const auto text = lift::runner::emit_report(rows, lift::runner::parse_report_format(report_format));
      if (report_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(report_out, std::ios::binary) << text;
      }
      return 0;
    }
  } catch (const lift::Error& e) {
    print_error(std::string(lift::to_string(e.code())), e.what(), e.line(), e.column());
    return 2;
  } catch (const json::exception& e) {
    print_error("MalformedJson", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 3;
  }
  return 0;
}
