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

#include "attnq/io.hpp"

#include <fstream>
#include <sstream>

namespace attnq {

namespace {

const json &field(const json &j, const std::string &name, const std::string &context)
{
  if (!j.is_object())
    throw DataError(context + ": expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end())
    throw DataError(context + ": missing field '" + name + "'");
  return *it;
}

Eigen::Index dim_field(const json &j, const std::string &name, const std::string &context)
{
  const json &v = field(j, name, context);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
    throw DataError(context + ": field '" + name + "' must be a positive integer");
  return v.get<Eigen::Index>();
}

void expect_shape(const Matrix &m, Eigen::Index rows, Eigen::Index cols, const std::string &name)
{
  if (m.rows() != rows || m.cols() != cols)
    throw DataError("field '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                    std::to_string(cols));
}

template <typename T>
std::vector<T> vector_field(const json &j, const std::string &name, const std::string &context)
{
  const json &v = field(j, name, context);
  if (!v.is_array())
    throw DataError(context + ": field '" + name + "' must be an array");
  try
  {
    return v.get<std::vector<T>>();
  }
  catch (const json::exception &)
  {
    throw DataError(context + ": field '" + name + "' has non-numeric entries");
  }
}

const char *const kProjectionNames[] = {"W_Q", "W_K", "W_V"};
const Projection kProjections[] = {Projection::Query, Projection::Key, Projection::Value};

} // namespace

json matrix_to_json(const Matrix &m)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json &j, const std::string &name)
{
  if (!j.is_array() || j.empty())
    throw DataError("field '" + name + "' must be a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0)
    throw DataError("field '" + name + "' rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i)
  {
    const json &row = j[i];
    if (!row.is_array() || row.size() != cols)
      throw DataError("field '" + name + "' row " + std::to_string(i) + " is ragged");
    for (std::size_t c = 0; c < cols; ++c)
    {
      if (!row[c].is_number())
        throw DataError("field '" + name + "' entry (" + std::to_string(i) + "," + std::to_string(c) +
                        ") is not a number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  if (!all_finite(m))
    throw DataError("field '" + name + "' contains non-finite values");
  return m;
}

json head_to_json(const AttentionHead &head)
{
  head.validate();
  return json{{"d", head.d},
              {"d_h", head.d_h},
              {"W_Q", matrix_to_json(head.w_q)},
              {"W_K", matrix_to_json(head.w_k)},
              {"W_V", matrix_to_json(head.w_v)}};
}

AttentionHead head_from_json(const json &j)
{
  const std::string ctx = "checkpoint";
  AttentionHead h;
  h.d = dim_field(j, "d", ctx);
  h.d_h = dim_field(j, "d_h", ctx);
  if (h.d_h > h.d)
    throw DataError("checkpoint: d_h must not exceed d");
  for (int k = 0; k < 3; ++k)
  {
    Matrix m = matrix_from_json(field(j, kProjectionNames[k], ctx), kProjectionNames[k]);
    expect_shape(m, h.d_h, h.d, kProjectionNames[k]);
    h.weight(kProjections[k]) = std::move(m);
  }
  return h;
}

json calibration_to_json(const std::vector<CalibSequence> &seqs)
{
  if (seqs.empty())
    throw DataError("calibration: no sequences to write");
  json arr = json::array();
  for (const auto &s : seqs)
    arr.push_back(matrix_to_json(s.x));
  return json{{"d", seqs.front().x.rows()}, {"L", seqs.front().x.cols()}, {"sequences", std::move(arr)}};
}

std::vector<CalibSequence> calibration_from_json(const json &j)
{
  const std::string ctx = "calibration";
  const Eigen::Index d = dim_field(j, "d", ctx);
  const Eigen::Index len = dim_field(j, "L", ctx);
  const json &arr = field(j, "sequences", ctx);
  if (!arr.is_array())
    throw DataError("calibration: field 'sequences' must be an array");
  std::vector<CalibSequence> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
  {
    const std::string name = "sequences[" + std::to_string(i) + "]";
    Matrix x = matrix_from_json(arr[i], name);
    expect_shape(x, d, len, name);
    out.push_back({std::move(x)});
  }
  return out;
}

json stats_to_json(const CalibStats &stats)
{
  return json{{"format", "attnq-stats"},
              {"exx", matrix_to_json(stats.exx)},
              {"exax", matrix_to_json(stats.exax)},
              {"ektk", matrix_to_json(stats.ektk)},
              {"eqtq", matrix_to_json(stats.eqtq)},
              {"n_sequences", stats.n_sequences}};
}

CalibStats stats_from_json(const json &j)
{
  const std::string ctx = "stats cache";
  if (field(j, "format", ctx) != "attnq-stats")
    throw DataError("stats cache: unexpected format tag");
  CalibStats s;
  s.exx = matrix_from_json(field(j, "exx", ctx), "exx");
  s.exax = matrix_from_json(field(j, "exax", ctx), "exax");
  s.ektk = matrix_from_json(field(j, "ektk", ctx), "ektk");
  s.eqtq = matrix_from_json(field(j, "eqtq", ctx), "eqtq");
  s.n_sequences = static_cast<std::size_t>(dim_field(j, "n_sequences", ctx));
  expect_shape(s.exax, s.exx.rows(), s.exx.rows(), "exax");
  expect_shape(s.eqtq, s.ektk.rows(), s.ektk.rows(), "eqtq");
  s.validate();
  return s;
}

AttentionHead QuantizedHead::materialize(const AttentionHead &base) const
{
  AttentionHead h = base;
  for (const auto &[p, q] : projections)
    h.weight(p) = q.dequantize();
  h.validate();
  return h;
}

json quantized_to_json(const QuantizedHead &q, const AttentionHead &base)
{
  json projs = json::object();
  for (const auto &[p, w] : q.projections)
  {
    json rows = json::array();
    for (Eigen::Index i = 0; i < w.w_int.rows(); ++i)
    {
      json row = json::array();
      for (Eigen::Index c = 0; c < w.w_int.cols(); ++c)
        row.push_back(w.w_int(i, c));
      rows.push_back(std::move(row));
    }
    projs[std::string(to_string(p))] = json{{"scale", std::vector<double>(w.spec.scale.begin(), w.spec.scale.end())},
                                            {"zero_point", std::vector<std::int32_t>(w.spec.zero_point.begin(),
                                                                                     w.spec.zero_point.end())},
                                            {"w_int", std::move(rows)}};
  }
  json out{{"format", "attnq-quantized"}, {"version", 1},          {"d", q.d},
           {"d_h", q.d_h},               {"n_bits", q.n_bits},     {"projections", std::move(projs)}};
  for (int k = 0; k < 3; ++k)
    if (!q.projections.count(kProjections[k]))
      out[kProjectionNames[k]] = matrix_to_json(base.weight(kProjections[k]));
  return out;
}

QuantizedHead quantized_from_json(const json &j, AttentionHead *fp)
{
  const std::string ctx = "quantized checkpoint";
  if (field(j, "format", ctx) != "attnq-quantized")
    throw DataError("quantized checkpoint: unexpected format tag");
  QuantizedHead q;
  q.d = dim_field(j, "d", ctx);
  q.d_h = dim_field(j, "d_h", ctx);
  q.n_bits = static_cast<int>(dim_field(j, "n_bits", ctx));
  const json &projs = field(j, "projections", ctx);
  if (!projs.is_object())
    throw DataError("quantized checkpoint: field 'projections' must be an object");
  if (fp)
  {
    fp->d = q.d;
    fp->d_h = q.d_h;
  }
  for (int k = 0; k < 3; ++k)
  {
    const std::string name = kProjectionNames[k];
    if (!projs.contains(name))
    {
      if (fp)
      {
        Matrix m = matrix_from_json(field(j, name, ctx), name);
        expect_shape(m, q.d_h, q.d, name);
        fp->weight(kProjections[k]) = std::move(m);
      }
      continue;
    }
    const json &p = projs[name];
    const std::string pctx = ctx + " " + name;
    QuantizedWeight w;
    w.spec.n_bits = q.n_bits;
    const auto scale = vector_field<double>(p, "scale", pctx);
    const auto zero = vector_field<std::int32_t>(p, "zero_point", pctx);
    w.spec.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    w.spec.zero_point = Eigen::Map<const Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>>(
      zero.data(), static_cast<Eigen::Index>(zero.size()));
    const Matrix ints = matrix_from_json(field(p, "w_int", pctx), name + ".w_int");
    expect_shape(ints, q.d_h, q.d, name + ".w_int");
    if (w.spec.scale.size() != q.d_h)
      throw DataError(pctx + ": field 'scale' must have d_h entries");
    try
    {
      w.spec.validate();
    }
    catch (const Error &e)
    {
      throw DataError(pctx + ": " + e.what());
    }
    w.w_int = ints.cast<std::int32_t>();
    if ((w.w_int.array() < 0).any() || (w.w_int.array() > w.spec.grid_max()).any() ||
        !(w.w_int.cast<double>().array() == ints.array()).all())
      throw DataError(pctx + ": field 'w_int' has entries outside the integer grid");
    q.projections.emplace(kProjections[k], std::move(w));
  }
  return q;
}

json read_json_file(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open '" + path.string() + "'");
  try
  {
    return json::parse(in);
  }
  catch (const json::parse_error &e)
  {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path &path, const std::string &contents)
{
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out)
      throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path &path, const json &j) { write_file_atomic(path, j.dump(1) + "\n"); }

void save_checkpoint(const std::filesystem::path &path, const AttentionHead &head)
{
  write_json_file(path, head_to_json(head));
}

AttentionHead load_checkpoint(const std::filesystem::path &path) { return head_from_json(read_json_file(path)); }

void save_calibration(const std::filesystem::path &path, const std::vector<CalibSequence> &seqs)
{
  write_json_file(path, calibration_to_json(seqs));
}

std::vector<CalibSequence> load_calibration(const std::filesystem::path &path)
{
  return calibration_from_json(read_json_file(path));
}

} // namespace attnq
