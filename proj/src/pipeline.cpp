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

#include "attnq/pipeline.hpp"
#include "attnq/oracle.hpp"

namespace attnq {

namespace {

template <typename F>
auto staged(Projection p, const char *stage, F &&f)
{
  try
  {
    return f();
  }
  catch (const NumericalError &e)
  {
    throw NumericalError(std::string(to_string(p)) + " [" + stage + "]: " + e.what());
  }
  catch (const BudgetError &e)
  {
    throw BudgetError(std::string(to_string(p)) + " [" + stage + "]: " + e.what());
  }
  catch (const ShapeError &e)
  {
    throw ShapeError(std::string(to_string(p)) + " [" + stage + "]: " + e.what());
  }
  catch (const DataError &e)
  {
    throw DataError(std::string(to_string(p)) + " [" + stage + "]: " + e.what());
  }
}

} // namespace

std::string_view to_string(Method m)
{
  switch (m)
  {
    case Method::Rtn:
      return "rtn";
    case Method::Optq:
      return "optq";
    case Method::Aespa:
      return "aespa";
    case Method::AespaNoRound:
      return "aespa-noround";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view s)
{
  for (auto m : {Method::Rtn, Method::Optq, Method::Aespa, Method::AespaNoRound})
    if (s == to_string(m))
      return m;
  return std::nullopt;
}

bool attention_aware(Method m) { return m == Method::Aespa || m == Method::AespaNoRound; }

void QuantizeOptions::validate() const
{
  if (bits != 2 && bits != 3 && bits != 4 && bits != 6 && bits != 8)
    throw DataError("bits must be one of 2, 3, 4, 6, 8");
  if (order.empty())
    throw DataError("no projections selected");
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j)
      if (order[i] == order[j])
        throw DataError("projection " + std::string(to_string(order[i])) + " listed twice");
  if (value_kind && *value_kind != ProjectionKind::Value && *value_kind != ProjectionKind::Other)
    throw DataError("value objective must be 'value' or 'other'");
  soft.validate();
}

ProjectionKind QuantizeOptions::kind_for_projection(Projection p) const
{
  if (p == Projection::Value && value_kind)
    return *value_kind;
  return attention_aware(method) ? kind_for(p) : ProjectionKind::Other;
}

QuantizeOutcome quantize_head(const AttentionHead &head, const std::vector<CalibSequence> &calib,
                              const QuantizeOptions &opts)
{
  opts.validate();
  head.validate();
  const CalibStats stats = accumulate_stats(head, calib);
  return quantize_head(head, calib, stats, opts);
}

QuantizeOutcome quantize_head(const AttentionHead &head, const std::vector<CalibSequence> &calib,
                              const CalibStats &stats, const QuantizeOptions &opts)
{
  opts.validate();
  head.validate();
  check_sequences(calib, head.d);
  if (stats.exx.rows() != head.d || stats.ektk.rows() != head.d_h)
    throw ShapeError("statistics do not match the head dimensions");

  QuantizeOutcome out;
  out.quantized.d = head.d;
  out.quantized.d_h = head.d_h;
  out.quantized.n_bits = opts.bits;

  for (const Projection p : opts.order)
  {
    const Matrix &w = head.weight(p);
    const ProjectionKind kind = opts.kind_for_projection(p);
    const LossContext ctx = make_loss_context(kind, stats);
    const Matrix hessian = row_hessian(ctx);

    const QuantSpec spec = staged(p, "step-size", [&] { return fit_step_size(w, hessian, opts.bits); });

    ProjectionReport rep;
    rep.projection = p;
    rep.kind = kind;
    QuantizedWeight q;
    switch (opts.method)
    {
      case Method::Rtn:
        q = staged(p, "rtn", [&] { return rtn_quantize(w, spec); });
        break;
      case Method::Optq:
      case Method::AespaNoRound:
        q = staged(p, "optq", [&] { return optq_quantize(w, hessian, spec); });
        break;
      case Method::Aespa:
      {
        Matrix updated;
        const QuantizedWeight warm = staged(p, "optq", [&] { return optq_quantize(w, hessian, spec, &updated); });
        RoundingResult r =
          staged(p, "rounding", [&] { return optimize_rounding(w, updated, spec, ctx, opts.soft); });
        q = std::move(r.quantized);
        q.fell_back_to_rtn = warm.fell_back_to_rtn;
        rep.trace = std::move(r.state.loss_trace);
        break;
      }
    }
    rep.fell_back_to_rtn = q.fell_back_to_rtn;

    const Matrix w_hat = q.dequantize();
    const LossContext natural = make_loss_context(kind_for(p), stats);
    rep.refined_loss = loss(natural, Matrix(w - w_hat));
    rep.exact_error = staged(p, "oracle", [&] { return exact_error(head, calib, kind_for(p), Matrix(w_hat - w)); });
    out.projections.push_back(std::move(rep));
    out.quantized.projections[p] = std::move(q);
  }

  out.calib_attention_error = attention_error(head, out.quantized.materialize(head), calib);
  return out;
}

EvalResult evaluate_head(const AttentionHead &reference, const AttentionHead &quantized,
                         const std::vector<CalibSequence> &eval)
{
  if (eval.empty())
    throw DataError("evaluation set is empty");
  reference.validate();
  quantized.validate();
  if (reference.d != quantized.d || reference.d_h != quantized.d_h)
    throw ShapeError("quantized head dimensions differ from the reference model");
  check_sequences(eval, reference.d);

  EvalResult r;
  r.n_sequences = eval.size();
  double err = 0.0;
  double norm = 0.0;
  for (const auto &s : eval)
  {
    const Matrix ref = attention_forward(reference, s).sa;
    err += (attention_forward(quantized, s).sa - ref).squaredNorm();
    norm += ref.squaredNorm();
  }
  const double n = static_cast<double>(eval.size());
  r.mean_attention_error = err / n;
  r.mean_output_norm = norm / n;
  r.relative_output_error = norm > 0.0 ? std::sqrt(err / norm) : 0.0;
  return r;
}

json quantize_report(const QuantizeOutcome &out, const QuantizeOptions &opts)
{
  json order = json::array();
  for (const auto p : opts.order)
    order.push_back(std::string(to_string(p)));
  json projs = json::array();
  for (const auto &r : out.projections)
    projs.push_back(json{{"name", std::string(to_string(r.projection))},
                         {"objective", std::string(to_string(r.kind))},
                         {"refined_loss", r.refined_loss},
                         {"exact_error", r.exact_error},
                         {"fell_back_to_rtn", r.fell_back_to_rtn},
                         {"iterations", r.trace.size()},
                         {"final_total_loss", r.trace.empty() ? 0.0 : r.trace.back().total}});
  return json{{"schema_version", kReportSchemaVersion},
              {"command", "quantize"},
              {"method", std::string(to_string(opts.method))},
              {"bits", opts.bits},
              {"order", std::move(order)},
              {"seed", opts.soft.seed},
              {"iterations", opts.soft.iterations},
              {"learning_rate", opts.soft.learning_rate},
              {"lambda", opts.soft.lambda},
              {"projections", std::move(projs)},
              {"calib_attention_error", out.calib_attention_error}};
}

json eval_report(const EvalResult &r)
{
  return json{{"schema_version", kReportSchemaVersion},
              {"command", "eval"},
              {"n_sequences", r.n_sequences},
              {"mean_attention_error", r.mean_attention_error},
              {"mean_output_norm", r.mean_output_norm},
              {"relative_output_error", r.relative_output_error}};
}

} // namespace attnq
