#include "posecast/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "posecast/errors.hpp"

namespace posecast::nn {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Tensor elementwise(const Tensor& a, const Tensor& b, const char* where, auto fn) {
  require_same_shape(a, b, where);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

Tensor map_values(const Tensor& a, auto fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

}  // namespace

Tensor matmul_values(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  const std::size_t ar = trans_a ? a.cols() : a.rows();
  const std::size_t ac = trans_a ? a.rows() : a.cols();
  const std::size_t br = trans_b ? b.cols() : b.rows();
  const std::size_t bc = trans_b ? b.rows() : b.cols();
  if (ac != br) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + (trans_a ? "^T" : "") +
                         " x " + shape_string(b.shape()) + (trans_b ? "^T" : ""));
  }
  Tensor out = Tensor::matrix(ar, bc);
  if (out.empty()) return out;
  MutMap c(out.data().data(), static_cast<Eigen::Index>(ar), static_cast<Eigen::Index>(bc));
  const auto am = as_matrix(a);
  const auto bm = as_matrix(b);
  if (!trans_a && !trans_b) {
    c.noalias() = am * bm;
  } else if (!trans_a && trans_b) {
    c.noalias() = am * bm.transpose();
  } else if (trans_a && !trans_b) {
    c.noalias() = am.transpose() * bm;
  } else {
    c.noalias() = am.transpose() * bm.transpose();
  }
  return out;
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  Tensor out = matmul_values(a.value(), b.value(), trans_a, trans_b);
  return a.tape().record(std::move(out), {a, b}, [a, b, trans_a, trans_b](const Var& g) -> std::vector<Var> {
    Var ga, gb;
    if (!trans_a && !trans_b) {
      if (a.requires_grad()) ga = matmul(g, b, false, true);
      if (b.requires_grad()) gb = matmul(a, g, true, false);
    } else if (!trans_a && trans_b) {
      if (a.requires_grad()) ga = matmul(g, b, false, false);
      if (b.requires_grad()) gb = matmul(g, a, true, false);
    } else if (trans_a && !trans_b) {
      if (a.requires_grad()) ga = matmul(b, g, false, true);
      if (b.requires_grad()) gb = matmul(a, g, false, false);
    } else {
      if (a.requires_grad()) ga = matmul(b, g, true, true);
      if (b.requires_grad()) gb = matmul(g, a, true, true);
    }
    // rank-1 operands come back as [1, m]
    if (ga.valid() && ga.shape() != a.shape()) ga = reshape(ga, a.shape());
    if (gb.valid() && gb.shape() != b.shape()) gb = reshape(gb, b.shape());
    return {ga, gb};
  });
}

Var add(const Var& a, const Var& b) {
  Tensor out = elementwise(a.value(), b.value(), "add", [](float x, float y) { return x + y; });
  return a.tape().record(std::move(out), {a, b}, [](const Var& g) -> std::vector<Var> { return {g, g}; });
}

Var sub(const Var& a, const Var& b) {
  Tensor out = elementwise(a.value(), b.value(), "sub", [](float x, float y) { return x - y; });
  return a.tape().record(std::move(out), {a, b},
                         [](const Var& g) -> std::vector<Var> { return {g, scale(g, -1.0f)}; });
}

Var mul(const Var& a, const Var& b) {
  Tensor out = elementwise(a.value(), b.value(), "mul", [](float x, float y) { return x * y; });
  return a.tape().record(std::move(out), {a, b}, [a, b](const Var& g) -> std::vector<Var> {
    Var ga, gb;
    if (a.requires_grad()) ga = mul(g, b);
    if (b.requires_grad()) gb = mul(g, a);
    return {ga, gb};
  });
}

Var scale(const Var& a, float s) {
  Tensor out = map_values(a.value(), [s](float x) { return x * s; });
  return a.tape().record(std::move(out), {a}, [s](const Var& g) -> std::vector<Var> { return {scale(g, s)}; });
}

Var add_scalar(const Var& a, float s) {
  Tensor out = map_values(a.value(), [s](float x) { return x + s; });
  return a.tape().record(std::move(out), {a}, [](const Var& g) -> std::vector<Var> { return {g}; });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const Shape original = a.shape();
  return a.tape().record(std::move(out), {a},
                         [original](const Var& g) -> std::vector<Var> { return {reshape(g, original)}; });
}

Var add_row(const Var& x, const Var& row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("add_row: " + shape_string(xv.shape()) + " + row " + shape_string(rv.shape()));
  }
  Tensor out = xv;
  const std::size_t n = xv.rows(), m = xv.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += rv[c];
  const Shape row_shape = rv.shape();
  return x.tape().record(std::move(out), {x, row}, [row_shape](const Var& g) -> std::vector<Var> {
    Var gr = sum_rows(g);
    if (gr.shape() != row_shape) gr = reshape(gr, row_shape);
    return {g, gr};
  });
}

Var sum_rows(const Var& x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  std::vector<double> acc(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) acc[c] += xv[r * m + c];
  Tensor out({m});
  for (std::size_t c = 0; c < m; ++c) out[c] = static_cast<float>(acc[c]);
  return x.tape().record(std::move(out), {x},
                         [n](const Var& g) -> std::vector<Var> { return {broadcast_rows(g, n)}; });
}

Var broadcast_rows(const Var& row, std::size_t n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw DimensionError("broadcast_rows: expected a row, got " + shape_string(rv.shape()));
  const std::size_t m = rv.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t r = 0; r < n; ++r) std::copy(rv.data().begin(), rv.data().end(), out.data().begin() + r * m);
  const Shape row_shape = rv.shape();
  return row.tape().record(std::move(out), {row}, [row_shape](const Var& g) -> std::vector<Var> {
    Var gr = sum_rows(g);
    if (gr.shape() != row_shape) gr = reshape(gr, row_shape);
    return {gr};
  });
}

Var sum_cols(const Var& x) {
  const std::size_t m = x.value().cols();
  Var ones = x.tape().constant(Tensor::matrix(m, 1, 1.0f));
  return matmul(x.value().rank() == 1 ? reshape(x, {1, m}) : x, ones);
}

Var sum_all(const Var& x) {
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  const Shape shape = x.shape();
  return x.tape().record(Tensor::scalar(static_cast<float>(acc)), {x}, [shape](const Var& g) -> std::vector<Var> {
    return {broadcast_scalar(g, shape)};
  });
}

Var mean_all(const Var& x) {
  if (x.value().empty()) throw ContractError("mean_all: empty tensor");
  return scale(sum_all(x), 1.0f / static_cast<float>(x.value().size()));
}

Var broadcast_scalar(const Var& s, Shape shape) {
  const float v = s.value().item();
  return s.tape().record(Tensor(std::move(shape), v), {s},
                         [](const Var& g) -> std::vector<Var> { return {sum_all(g)}; });
}

Var leaky_relu(const Var& x, float slope) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  Tensor mask(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const bool pos = xv[i] > 0.0f;
    out[i] = pos ? xv[i] : slope * xv[i];
    mask[i] = pos ? 1.0f : slope;
  }
  Tape* tape = &x.tape();
  return tape->record(std::move(out), {x}, [tape, mask = std::move(mask)](const Var& g) -> std::vector<Var> {
    return {mul(g, tape->constant(mask))};
  });
}

Var sqrt(const Var& x) {
  Tensor out = map_values(x.value(), [](float v) { return std::sqrt(v); });
  Tensor dydx = map_values(out, [](float y) { return y > 0.0f ? 0.5f / y : 0.0f; });
  Tape* tape = &x.tape();
  return tape->record(std::move(out), {x}, [tape, dydx = std::move(dydx)](const Var& g) -> std::vector<Var> {
    return {mul(g, tape->constant(dydx))};
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != n) {
      throw DimensionError("concat_cols: row count mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(pv.data().begin() + r * widths[k], widths[k], out.data().begin() + r * total + offset);
    offset += widths[k];
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  std::vector<Shape> shapes;
  for (const auto& p : parts) shapes.push_back(p.shape());
  return parts[0].tape().record(std::move(out), parents,
                                [widths, shapes, parents](const Var& g) -> std::vector<Var> {
                                  std::vector<Var> grads;
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < widths.size(); ++k) {
                                    if (parents[k].requires_grad()) {
                                      Var gk = slice_cols(g, off, off + widths[k]);
                                      if (gk.shape() != shapes[k]) gk = reshape(gk, shapes[k]);
                                      grads.push_back(gk);
                                    } else {
                                      grads.emplace_back();
                                    }
                                    off += widths[k];
                                  }
                                  return grads;
                                });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  if (begin > end || end > m) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                         shape_string(xv.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(n, w);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(xv.data().begin() + r * m + begin, w, out.data().begin() + r * w);
  Tape* tape = &x.tape();
  return tape->record(std::move(out), {x}, [tape, n, m, begin, end, shape = xv.shape()](const Var& g) {
    std::vector<Var> pieces;
    if (begin > 0) pieces.push_back(tape->constant(Tensor::matrix(n, begin)));
    pieces.push_back(g);
    if (end < m) pieces.push_back(tape->constant(Tensor::matrix(n, m - end)));
    Var full = pieces.size() == 1 ? g : concat_cols(pieces);
    if (full.shape() != shape) full = reshape(full, shape);
    return std::vector<Var>{full};
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const Tensor& lv = logits.value();
  const std::size_t n = lv.rows(), c = lv.cols();
  if (targets.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(lv.shape()));
  }
  if (n == 0) throw ContractError("softmax_cross_entropy: empty batch");
  Tensor dlogits = Tensor::matrix(n, c);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= c) {
      throw VocabularyError("action target " + std::to_string(targets[r]) + " outside vocabulary of size " +
                            std::to_string(c));
    }
    const float* row = lv.data().data() + r * c;
    const float mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
    const double log_z = std::log(z) + mx;
    total += log_z - row[targets[r]];
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(static_cast<double>(row[k]) - log_z);
      dlogits[r * c + k] = static_cast<float>((p - (k == targets[r] ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  Tape* tape = &logits.tape();
  return tape->record(Tensor::scalar(static_cast<float>(total / static_cast<double>(n))), {logits},
                      [tape, dlogits = std::move(dlogits)](const Var& g) -> std::vector<Var> {
                        return {mul(broadcast_scalar(g, dlogits.shape()), tape->constant(dlogits))};
                      });
}

}  // namespace posecast::nn
