/*
 * Copyright (c) 2026 The attnq Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// attnq command-line entry point.
//
//   attnq gen      --seed 0 --d 16 --dh 4 --L 8 --n 32 --n-eval 32 --model m.json --calib c.json --eval e.json
//   attnq quantize --model m.json --calib c.json --output q.json --bits 2 --method aespa
//   attnq eval     --model m.json --quantized q.json --eval e.json
//   attnq flops    --preset all
//   attnq check
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numerical failure.

#include "attnq/checks.hpp"
#include "attnq/flops.hpp"
#include "attnq/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace attnq;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct RunConfig
{
  std::string config;

  std::uint64_t seed = 0;
  std::int64_t d = 16;
  std::int64_t d_h = 4;
  std::int64_t length = 8;
  std::int64_t n = 32;
  std::int64_t n_eval = 32;

  std::string model;
  std::string calib;
  std::string eval;
  std::string output;
  std::string quantized;
  std::string report;
  std::string trace_csv;
  std::string stats_cache;

  int bits = 4;
  std::string method = "aespa";
  std::string projections = "V,Q,K";
  std::string value_objective;
  int iterations = SoftQuantConfig{}.iterations;
  double learning_rate = SoftQuantConfig{}.learning_rate;
  double lambda = SoftQuantConfig{}.lambda;

  std::int64_t batch = 4;
  std::int64_t flop_length = 2048;
  std::vector<std::string> presets;
  std::string csv;

  int trials = 10;
};

// Options registered on a subcommand, keyed by the JSON config field they mirror.
using Binder = std::map<std::string, std::pair<CLI::Option *, std::function<void(const json &)>>>;

template <typename T>
void bind_option(CLI::App &app, Binder &binder, const std::string &flag, const std::string &key, T &target,
                 const std::string &help)
{
  CLI::Option *opt = app.add_option(flag, target, help);
  binder[key] = {opt, [&target, key](const json &v) {
                   try
                   {
                     target = v.get<T>();
                   }
                   catch (const json::exception &)
                   {
                     throw UsageError("config field '" + key + "' has the wrong type");
                   }
                 }};
}

// Config-file values fill every option not given on the command line.
void apply_config(const std::string &path, const Binder &binder)
{
  if (path.empty())
    return;
  const json cfg = read_json_file(path);
  if (!cfg.is_object())
    throw UsageError("config file must hold a JSON object");
  for (const auto &[key, value] : cfg.items())
  {
    const auto it = binder.find(key);
    if (it == binder.end())
    {
      if (key == "command")
        continue;
      throw UsageError("unknown config field '" + key + "'");
    }
    if (it->second.first->count() == 0)
      it->second.second(value);
  }
}

void require(const std::string &value, const char *flag)
{
  if (value.empty())
    throw UsageError(std::string(flag) + " is required");
}

void emit_json(const std::string &path, const json &j)
{
  if (path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(path, j);
}

std::vector<Projection> parse_projections(const std::string &list)
{
  std::vector<Projection> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    if (item == "V" || item == "W_V" || item == "v")
      out.push_back(Projection::Value);
    else if (item == "Q" || item == "W_Q" || item == "q")
      out.push_back(Projection::Query);
    else if (item == "K" || item == "W_K" || item == "k")
      out.push_back(Projection::Key);
    else
      throw UsageError("unknown projection '" + item + "' (expected V, Q or K)");
  }
  return out;
}

QuantizeOptions quantize_options(const RunConfig &c)
{
  QuantizeOptions o;
  o.bits = c.bits;
  const auto m = parse_method(c.method);
  if (!m)
    throw UsageError("unknown method '" + c.method + "'");
  o.method = *m;
  o.order = parse_projections(c.projections);
  if (!c.value_objective.empty())
  {
    const auto k = parse_projection_kind(c.value_objective);
    if (!k)
      throw UsageError("unknown value objective '" + c.value_objective + "'");
    o.value_kind = *k;
  }
  o.soft.iterations = c.iterations;
  o.soft.learning_rate = c.learning_rate;
  o.soft.lambda = c.lambda;
  o.soft.seed = c.seed;
  try
  {
    o.validate();
  }
  catch (const DataError &e)
  {
    throw UsageError(e.what());
  }
  return o;
}

int run_gen(const RunConfig &c)
{
  require(c.model, "--model");
  require(c.calib, "--calib");
  if (c.n < 1 || c.n_eval < 0)
    throw UsageError("--n must be positive and --n-eval nonnegative");
  if (c.n_eval > 0)
    require(c.eval, "--eval");
  SyntheticSet set = generate_synthetic(c.seed, c.d, c.d_h, c.length, static_cast<std::size_t>(c.n + c.n_eval));
  std::vector<CalibSequence> held(set.sequences.begin() + c.n, set.sequences.end());
  set.sequences.resize(static_cast<std::size_t>(c.n));
  save_checkpoint(c.model, set.head);
  save_calibration(c.calib, set.sequences);
  if (c.n_eval > 0)
    save_calibration(c.eval, held);
  return kExitOk;
}

CalibStats load_or_build_stats(const RunConfig &c, const AttentionHead &head, const std::vector<CalibSequence> &calib)
{
  if (!c.stats_cache.empty() && fs::exists(c.stats_cache))
  {
    CalibStats s = stats_from_json(read_json_file(c.stats_cache));
    if (s.exx.rows() != head.d || s.ektk.rows() != head.d_h)
      throw DataError("stats cache '" + c.stats_cache + "' does not match the model dimensions");
    return s;
  }
  CalibStats s = accumulate_stats(head, calib);
  if (!c.stats_cache.empty())
    write_json_file(c.stats_cache, stats_to_json(s));
  return s;
}

int run_quantize(const RunConfig &c)
{
  require(c.model, "--model");
  require(c.calib, "--calib");
  require(c.output, "--output");
  const QuantizeOptions opts = quantize_options(c);
  const AttentionHead head = load_checkpoint(c.model);
  const auto calib = load_calibration(c.calib);
  const CalibStats stats = load_or_build_stats(c, head, calib);
  const QuantizeOutcome out = quantize_head(head, calib, stats, opts);

  if (!c.trace_csv.empty())
  {
    std::ostringstream csv;
    csv << "projection,iteration,total,reconstruction,regularizer\n";
    for (const auto &r : out.projections)
    {
      std::ostringstream rows;
      write_loss_trace_csv(rows, r.trace, false);
      std::string line;
      std::istringstream in(rows.str());
      while (std::getline(in, line))
        csv << to_string(r.projection) << "," << line << "\n";
    }
    write_file_atomic(c.trace_csv, csv.str());
  }
  write_json_file(c.output, quantized_to_json(out.quantized, head));
  json rep = quantize_report(out, opts);
  rep["model"] = c.model;
  rep["calibration"] = c.calib;
  rep["n_calibration_sequences"] = calib.size();
  emit_json(c.report, rep);
  return kExitOk;
}

int run_eval(const RunConfig &c)
{
  require(c.model, "--model");
  require(c.quantized, "--quantized");
  require(c.eval, "--eval");
  const AttentionHead head = load_checkpoint(c.model);
  AttentionHead stored;
  const QuantizedHead q = quantized_from_json(read_json_file(c.quantized), &stored);
  if (q.d != head.d || q.d_h != head.d_h)
    throw DataError("quantized checkpoint dimensions differ from the model");
  const auto eval = load_calibration(c.eval);
  const EvalResult r = evaluate_head(head, q.materialize(head), eval);
  json rep = eval_report(r);
  rep["model"] = c.model;
  rep["quantized"] = c.quantized;
  rep["n_bits"] = q.n_bits;
  emit_json(c.report, rep);
  return kExitOk;
}

int run_flops(const RunConfig &c, bool custom)
{
  std::vector<CostRow> rows;
  if (custom)
  {
    CostParams p{c.d, c.d_h, c.flop_length, c.batch};
    p.validate();
    rows.push_back({{"custom", c.d, c.d_h}, flops_exist(p), flops_aespa(p)});
  }
  std::vector<std::string> names = c.presets;
  if (names.empty() && !custom)
    names = {"all"};
  if (names.size() == 1 && names.front() == "all")
  {
    names.clear();
    for (const auto &p : opt_presets())
      names.push_back(p.name);
  }
  for (auto &r : cost_table(names, c.flop_length, c.batch))
    rows.push_back(std::move(r));
  write_cost_table_text(std::cout, rows);
  if (!c.csv.empty())
  {
    std::ostringstream csv;
    write_cost_table_csv(csv, rows);
    write_file_atomic(c.csv, csv.str());
  }
  return kExitOk;
}

int run_check(const RunConfig &c)
{
  const auto results = run_oracle_checks(c.seed, c.trials);
  write_check_table(std::cout, results);
  for (const auto &r : results)
    if (!r.passed)
      return kExitNumerical;
  return kExitOk;
}

int run(int argc, char **argv)
{
  RunConfig c;
  CLI::App app{"Attention-aware post-training quantization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "attnq 1.0.0");

  std::map<std::string, Binder> binders;

  auto *gen = app.add_subcommand("gen", "generate a synthetic head with calibration and evaluation sequences");
  auto *quant = app.add_subcommand("quantize", "quantize a head's projections");
  auto *eval = app.add_subcommand("eval", "compare quantized and full-precision attention outputs");
  auto *flops = app.add_subcommand("flops", "print the per-iteration cost table");
  auto *check = app.add_subcommand("check", "run the oracle self-check suite");

  for (auto *sub : {gen, quant, eval, flops, check})
    sub->add_option("--config", c.config, "JSON file with defaults for any option")->check(CLI::ExistingFile);

  {
    Binder &b = binders["gen"];
    bind_option(*gen, b, "--seed", "seed", c.seed, "random seed");
    bind_option(*gen, b, "--d", "d", c.d, "hidden size");
    bind_option(*gen, b, "--dh", "d_h", c.d_h, "head dimension");
    bind_option(*gen, b, "--L", "L", c.length, "sequence length");
    bind_option(*gen, b, "--n", "n", c.n, "calibration sequences");
    bind_option(*gen, b, "--n-eval", "n_eval", c.n_eval, "held-out sequences");
    bind_option(*gen, b, "--model", "model", c.model, "output checkpoint path");
    bind_option(*gen, b, "--calib", "calib", c.calib, "output calibration path");
    bind_option(*gen, b, "--eval", "eval", c.eval, "output held-out path");
  }
  {
    Binder &b = binders["quantize"];
    bind_option(*quant, b, "--model", "model", c.model, "full-precision checkpoint");
    bind_option(*quant, b, "--calib", "calib", c.calib, "calibration sequences");
    bind_option(*quant, b, "--output", "output", c.output, "quantized checkpoint to write");
    bind_option(*quant, b, "--report", "report", c.report, "report path (stdout when omitted)");
    bind_option(*quant, b, "--bits", "bits", c.bits, "bit-width: 2, 3, 4, 6 or 8");
    bind_option(*quant, b, "--method", "method", c.method, "rtn, optq, aespa or aespa-noround");
    bind_option(*quant, b, "--projections", "projections", c.projections, "comma-separated order, e.g. V,Q,K");
    bind_option(*quant, b, "--value-objective", "value_objective", c.value_objective, "value or other");
    bind_option(*quant, b, "--iterations", "iterations", c.iterations, "rounding-optimization iterations");
    bind_option(*quant, b, "--lr", "learning_rate", c.learning_rate, "learning rate");
    bind_option(*quant, b, "--lambda", "lambda", c.lambda, "rounding regularizer weight");
    bind_option(*quant, b, "--seed", "seed", c.seed, "seed recorded in the report");
    bind_option(*quant, b, "--trace-csv", "trace_csv", c.trace_csv, "write the loss trace as CSV");
    bind_option(*quant, b, "--stats-cache", "stats_cache", c.stats_cache, "statistics cache (read if present, else written)");
  }
  {
    Binder &b = binders["eval"];
    bind_option(*eval, b, "--model", "model", c.model, "full-precision checkpoint");
    bind_option(*eval, b, "--quantized", "quantized", c.quantized, "quantized checkpoint");
    bind_option(*eval, b, "--eval", "eval", c.eval, "held-out sequences");
    bind_option(*eval, b, "--report", "report", c.report, "report path (stdout when omitted)");
  }
  {
    Binder &b = binders["flops"];
    bind_option(*flops, b, "--d", "d", c.d, "hidden size for a custom row");
    bind_option(*flops, b, "--dh", "d_h", c.d_h, "head dimension for a custom row");
    bind_option(*flops, b, "--L", "L", c.flop_length, "sequence length");
    bind_option(*flops, b, "--B", "B", c.batch, "batch size");
    bind_option(*flops, b, "--preset", "presets", c.presets, "preset name (repeatable) or 'all'");
    bind_option(*flops, b, "--csv", "csv", c.csv, "also write the table as CSV");
  }
  {
    Binder &b = binders["check"];
    bind_option(*check, b, "--seed", "seed", c.seed, "random seed");
    bind_option(*check, b, "--trials", "trials", c.trials, "instances per check");
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (auto *sub : {gen, quant, eval, flops, check})
  {
    if (!sub->parsed())
      continue;
    const Binder &b = binders[sub->get_name()];
    apply_config(c.config, b);
    if (sub == gen)
      return run_gen(c);
    if (sub == quant)
      return run_quantize(c);
    if (sub == eval)
      return run_eval(c);
    if (sub == flops)
    {
      const bool custom = b.at("d").first->count() > 0 || b.at("d_h").first->count() > 0;
      return run_flops(c, custom);
    }
    return run_check(c);
  }
  return kExitUsage;
}

} // namespace

int main(int argc, char **argv)
{
  try
  {
    return run(argc, argv);
  }
  catch (const UsageError &e)
  {
    std::cerr << "attnq: " << e.what() << "\n";
    return kExitUsage;
  }
  catch (const NumericalError &e)
  {
    std::cerr << "attnq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  catch (const BudgetError &e)
  {
    std::cerr << "attnq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  catch (const Error &e)
  {
    std::cerr << "attnq: " << e.what() << "\n";
    return kExitData;
  }
  catch (const fs::filesystem_error &e)
  {
    std::cerr << "attnq: " << e.what() << "\n";
    return kExitData;
  }
  catch (const std::exception &e)
  {
    std::cerr << "attnq: internal error: " << e.what() << "\n";
    return 1;
  }
}
