#include "tabplus/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tabplus::ops {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(op, x.shape(), Shape(rank, 0), "expected rank " + std::to_string(rank));
  }
}

// Width of the broadcast row for add_row / mul_row.
std::size_t row_width(const char* op, const Tensor& x, const Tensor& row) {
  if (x.rank() == 0 || row.rank() != 1 || row.dim(0) != x.shape().back()) {
    throw ShapeError(op, x.shape(), row.shape(), "row must be [last axis of x]");
  }
  return row.dim(0);
}

std::vector<double> copy_values(const Tensor& x) {
  auto v = x.values();
  return {v.begin(), v.end()};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  kernels::gemm_nn(m, n, k, a.values(), b.values(), out, false);
  return Tensor::result({m, n}, std::move(out), {a, b},
                        [a, b, m, n, k](std::span<const double> g, std::span<const double>) {
                          if (a.requires_grad()) {
                            kernels::gemm_nt(m, k, n, g, b.values(), a.grad_accumulator(), true);
                          }
                          if (b.requires_grad()) {
                            kernels::gemm_tn(k, n, m, a.values(), g, b.grad_accumulator(), true);
                          }
                        });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw ShapeError("batched_matmul", a.shape(), b.shape());
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(batch * m * n);
  const auto av = a.values();
  const auto bv = b.values();
  const auto count = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * m * n * k > (1u << 16))
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const auto i = static_cast<std::size_t>(t);
    auto ai = av.subspan(i * m * k, m * k);
    auto bi = bv.subspan(i * k * n, k * n);
    auto oi = std::span<double>(out).subspan(i * m * n, m * n);
    if (transpose_b) {
      kernels::serial::gemm_nt(m, n, k, ai, bi, oi, false);
    } else {
      kernels::serial::gemm_nn(m, n, k, ai, bi, oi, false);
    }
  }
  return Tensor::result(
      {batch, m, n}, std::move(out), {a, b},
      [a, b, batch, m, n, k, transpose_b](std::span<const double> g, std::span<const double>) {
        const auto av = a.values();
        const auto bv = b.values();
        std::span<double> da = a.requires_grad() ? a.grad_accumulator() : std::span<double>{};
        std::span<double> db = b.requires_grad() ? b.grad_accumulator() : std::span<double>{};
        const auto count = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * m * n * k > (1u << 15))
        for (std::ptrdiff_t t = 0; t < count; ++t) {
          const auto i = static_cast<std::size_t>(t);
          auto gi = g.subspan(i * m * n, m * n);
          auto ai = av.subspan(i * m * k, m * k);
          auto bi = bv.subspan(i * k * n, k * n);
          if (!da.empty()) {
            auto dai = da.subspan(i * m * k, m * k);
            if (transpose_b) {
              kernels::serial::gemm_nn(m, k, n, gi, bi, dai, true);
            } else {
              kernels::serial::gemm_nt(m, k, n, gi, bi, dai, true);
            }
          }
          if (!db.empty()) {
            auto dbi = db.subspan(i * k * n, k * n);
            if (transpose_b) {
              kernels::serial::gemm_tn(n, k, m, gi, ai, dbi, true);
            } else {
              kernels::serial::gemm_tn(k, n, m, ai, gi, dbi, true);
            }
          }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out = copy_values(a);
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::result(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double> g, std::span<const double>) {
                          for (const Tensor* p : {&a, &b}) {
                            if (!p->requires_grad()) continue;
                            auto d = p->grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out = copy_values(a);
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::result(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double> g, std::span<const double>) {
                          if (a.requires_grad()) {
                            auto d = a.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                          }
                          if (b.requires_grad()) {
                            auto d = b.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out = copy_values(a);
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Tensor::result(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double> g, std::span<const double>) {
                          const auto av = a.values();
                          const auto bv = b.values();
                          if (a.requires_grad()) {
                            auto d = a.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
                          }
                          if (b.requires_grad()) {
                            auto d = b.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
                          }
                        });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t n = row_width("add_row", x, row);
  const std::size_t rows = x.size() / n;
  std::vector<double> out = copy_values(x);
  const auto rv = row.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += rv[j];
  }
  return Tensor::result(x.shape(), std::move(out), {x, row},
                        [x, row, rows, n](std::span<const double> g, std::span<const double>) {
                          if (x.requires_grad()) {
                            auto d = x.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                          }
                          if (row.requires_grad()) {
                            auto d = row.grad_accumulator();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < n; ++j) d[j] += g[r * n + j];
                            }
                          }
                        });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
  const std::size_t n = row_width("mul_row", x, row);
  const std::size_t rows = x.size() / n;
  std::vector<double> out = copy_values(x);
  const auto rv = row.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] *= rv[j];
  }
  return Tensor::result(x.shape(), std::move(out), {x, row},
                        [x, row, rows, n](std::span<const double> g, std::span<const double>) {
                          const auto xv = x.values();
                          const auto rv = row.values();
                          if (x.requires_grad()) {
                            auto d = x.grad_accumulator();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < n; ++j) {
                                d[r * n + j] += g[r * n + j] * rv[j];
                              }
                            }
                          }
                          if (row.requires_grad()) {
                            auto d = row.grad_accumulator();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < n; ++j) {
                                d[j] += g[r * n + j] * xv[r * n + j];
                              }
                            }
                          }
                        });
}

Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("scale", x.shape(), s.shape(), "scale must hold one element");
  const double factor = s.values()[0];
  std::vector<double> out = copy_values(x);
  for (auto& v : out) v *= factor;
  return Tensor::result(x.shape(), std::move(out), {x, s},
                        [x, s](std::span<const double> g, std::span<const double>) {
                          if (x.requires_grad()) {
                            const double f = s.values()[0];
                            auto d = x.grad_accumulator();
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * f;
                          }
                          if (s.requires_grad()) {
                            const auto xv = x.values();
                            double acc = 0.0;
                            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
                            s.grad_accumulator()[0] += acc;
                          }
                        });
}

Tensor affine(const Tensor& x, double a, double c) {
  std::vector<double> out = copy_values(x);
  for (auto& v : out) v = a * v + c;
  return Tensor::result(x.shape(), std::move(out), {x},
                        [x, a](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < g.size(); ++i) d[i] += a * g[i];
                        });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  std::vector<double> out = copy_values(x);
  for (auto& v : out) v = v > 0.0 ? v : negative_slope * v;
  return Tensor::result(x.shape(), std::move(out), {x},
                        [x, negative_slope](std::span<const double> g, std::span<const double>) {
                          const auto xv = x.values();
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            d[i] += xv[i] > 0.0 ? g[i] : negative_slope * g[i];
                          }
                        });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out = copy_values(x);
  for (auto& v : out) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return Tensor::result(x.shape(), std::move(out), {x},
                        [x](std::span<const double> g, std::span<const double> y) {
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
                        });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError("softmax", x.shape(), {}, "empty last axis");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  std::vector<double> out = copy_values(x);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * n;
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return Tensor::result(x.shape(), std::move(out), {x},
                        [x, rows, n](std::span<const double> g, std::span<const double> y) {
                          auto d = x.grad_accumulator();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double* gr = g.data() + r * n;
                            const double* yr = y.data() + r * n;
                            double dot = 0.0;
                            for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                            for (std::size_t j = 0; j < n; ++j) d[r * n + j] += yr[j] * (gr[j] - dot);
                          }
                        });
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  std::vector<double> out = copy_values(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return Tensor::result(x.shape(), std::move(out), {x},
                        [x, mask = std::move(mask)](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * mask[i];
                        });
}

Tensor sum(const Tensor& x) {
  const auto v = x.values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return Tensor::result({1}, {total}, {x}, [x](std::span<const double> g, std::span<const double>) {
    auto d = x.grad_accumulator();
    for (auto& di : d) di += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean", x.shape(), {1}, "empty tensor");
  const auto v = x.values();
  const double n = static_cast<double>(v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return Tensor::result({1}, {total / n}, {x}, [x, n](std::span<const double> g, std::span<const double>) {
    auto d = x.grad_accumulator();
    for (auto& di : d) di += g[0] / n;
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("sum_axis", x.shape(), {axis}, "axis out of range");
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out_shape.push_back(shape[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(outer * inner, 0.0);
  const auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < len; ++a) {
      const double* src = v.data() + (o * len + a) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return Tensor::result(std::move(out_shape), std::move(out), {x},
                        [x, outer, len, inner](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t a = 0; a < len; ++a) {
                              double* dst = d.data() + (o * len + a) * inner;
                              const double* src = g.data() + o * inner;
                              for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat", first, {axis}, "axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat", first, s);
    widths.push_back(s[axis] * inner);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const std::size_t row = total * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * widths[k], widths[k], out.data() + o * row + offset);
    }
    offset += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::result(std::move(out_shape), std::move(out), inputs,
                        [inputs, widths, outer, row](std::span<const double> g, std::span<const double>) {
                          std::size_t off = 0;
                          for (std::size_t k = 0; k < inputs.size(); ++k) {
                            if (inputs[k].requires_grad()) {
                              auto d = inputs[k].grad_accumulator();
                              for (std::size_t o = 0; o < outer; ++o) {
                                const double* src = g.data() + o * row + off;
                                double* dst = d.data() + o * widths[k];
                                for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                              }
                            }
                            off += widths[k];
                          }
                        });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) throw ShapeError("reshape", x.shape(), shape);
  return Tensor::result(std::move(shape), copy_values(x), {x},
                        [x](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                        });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& shape = x.shape();
  if (axis >= shape.size() || start + length > shape[axis]) {
    throw ShapeError("slice", shape, {start, length}, "slice out of range on axis " + std::to_string(axis));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t src_row = shape[axis] * inner;
  const std::size_t dst_row = length * inner;
  const std::size_t skip = start * inner;
  Shape out_shape = shape;
  out_shape[axis] = length;
  std::vector<double> out(outer * dst_row);
  const auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.data() + o * src_row + skip, dst_row, out.data() + o * dst_row);
  }
  return Tensor::result(std::move(out_shape), std::move(out), {x},
                        [x, outer, src_row, dst_row, skip](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t o = 0; o < outer; ++o) {
                            double* dst = d.data() + o * src_row + skip;
                            const double* src = g.data() + o * dst_row;
                            for (std::size_t i = 0; i < dst_row; ++i) dst[i] += src[i];
                          }
                        });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  const auto v = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  }
  return Tensor::result({c, r}, std::move(out), {x},
                        [x, r, c](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
                          }
                        });
}

Tensor batch_mean(const Tensor& x) {
  require_rank("batch_mean", x, 2);
  const std::size_t b = x.dim(0), n = x.dim(1);
  if (b == 0) throw ShapeError("batch_mean", x.shape(), {}, "empty batch");
  std::vector<double> out(n, 0.0);
  const auto v = x.values();
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[j] += v[r * n + j];
  }
  for (auto& m : out) m /= static_cast<double>(b);
  return Tensor::result({n}, std::move(out), {x},
                        [x, b, n](std::span<const double> g, std::span<const double>) {
                          auto d = x.grad_accumulator();
                          const double inv = 1.0 / static_cast<double>(b);
                          for (std::size_t r = 0; r < b; ++r) {
                            for (std::size_t j = 0; j < n; ++j) d[r * n + j] += g[j] * inv;
                          }
                        });
}

Tensor batch_variance(const Tensor& x) {
  require_rank("batch_variance", x, 2);
  const std::size_t b = x.dim(0), n = x.dim(1);
  if (b == 0) throw ShapeError("batch_variance", x.shape(), {}, "empty batch");
  const auto v = x.values();
  std::vector<double> mu(n, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < n; ++j) mu[j] += v[r * n + j];
  }
  for (auto& m : mu) m /= static_cast<double>(b);
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dlt = v[r * n + j] - mu[j];
      out[j] += dlt * dlt;
    }
  }
  for (auto& s : out) s /= static_cast<double>(b);
  return Tensor::result({n}, std::move(out), {x},
                        [x, b, n, mu = std::move(mu)](std::span<const double> g, std::span<const double>) {
                          const auto v = x.values();
                          auto d = x.grad_accumulator();
                          const double scale = 2.0 / static_cast<double>(b);
                          for (std::size_t r = 0; r < b; ++r) {
                            for (std::size_t j = 0; j < n; ++j) {
                              d[r * n + j] += g[j] * scale * (v[r * n + j] - mu[j]);
                            }
                          }
                        });
}

GhostNormResult ghost_normalize(const Tensor& x, std::span<const kernels::Segment> segments,
                                double eps) {
  require_rank("ghost_normalize", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::size_t covered = 0;
  for (const auto& s : segments) {
    if (s.begin != covered || s.size == 0) {
      throw ShapeError("ghost_normalize", x.shape(), {s.begin, s.size}, "segments must tile the rows");
    }
    covered += s.size;
  }
  if (covered != rows) throw ShapeError("ghost_normalize", x.shape(), {covered}, "segments must tile the rows");

  GhostNormResult result;
  std::vector<double> y(rows * cols);
  result.mean.assign(segments.size() * cols, 0.0);
  std::vector<double> inv_std(segments.size() * cols, 0.0);
  kernels::ghost_norm_forward(cols, segments, x.values(), eps, y, result.mean, inv_std);
  result.variance.resize(inv_std.size());
  for (std::size_t i = 0; i < inv_std.size(); ++i) {
    result.variance[i] = std::max(0.0, 1.0 / (inv_std[i] * inv_std[i]) - eps);
  }
  std::vector<kernels::Segment> segs(segments.begin(), segments.end());
  result.normalized = Tensor::result(
      x.shape(), std::move(y), {x},
      [x, cols, segs = std::move(segs), inv_std = std::move(inv_std)](std::span<const double> g,
                                                                       std::span<const double> y) {
        kernels::ghost_norm_backward(cols, segs, y, inv_std, g, x.grad_accumulator());
      });
  return result;
}

Tensor pairwise_inner(const Tensor& e) {
  if (e.rank() != 3 || e.dim(1) < 2) {
    throw ShapeError("pairwise_inner", e.shape(), {}, "expected [batch, fields >= 2, dim]");
  }
  const std::size_t batch = e.dim(0), fields = e.dim(1), dim = e.dim(2);
  const std::size_t pairs = fields * (fields - 1) / 2;
  std::vector<double> out(batch * pairs);
  kernels::pairwise_inner(batch, fields, dim, e.values(), out);
  return Tensor::result(
      {batch, pairs}, std::move(out), {e},
      [e, batch, fields, dim, pairs](std::span<const double> g, std::span<const double>) {
        const auto ev = e.values();
        auto d = e.grad_accumulator();
        const auto count = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * pairs * dim > (1u << 16))
        for (std::ptrdiff_t t = 0; t < count; ++t) {
          const auto b = static_cast<std::size_t>(t);
          const double* eb = ev.data() + b * fields * dim;
          double* db = d.data() + b * fields * dim;
          const double* gb = g.data() + b * pairs;
          std::size_t p = 0;
          for (std::size_t i = 0; i < fields; ++i) {
            for (std::size_t j = i + 1; j < fields; ++j, ++p) {
              const double gp = gb[p];
              for (std::size_t k = 0; k < dim; ++k) {
                db[i * dim + k] += gp * eb[j * dim + k];
                db[j * dim + k] += gp * eb[i * dim + k];
              }
            }
          }
        }
      });
}

Tensor outer_self(const Tensor& s) {
  require_rank("outer_self", s, 2);
  const std::size_t batch = s.dim(0), m = s.dim(1);
  std::vector<double> out(batch * m * m);
  const auto v = s.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* sb = v.data() + b * m;
    double* ob = out.data() + b * m * m;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) ob[i * m + j] = sb[i] * sb[j];
    }
  }
  return Tensor::result({batch, m * m}, std::move(out), {s},
                        [s, batch, m](std::span<const double> g, std::span<const double>) {
                          const auto v = s.values();
                          auto d = s.grad_accumulator();
                          for (std::size_t b = 0; b < batch; ++b) {
                            const double* sb = v.data() + b * m;
                            const double* gb = g.data() + b * m * m;
                            double* db = d.data() + b * m;
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < m; ++j) {
                                db[i] += gb[i * m + j] * sb[j];
                                db[j] += gb[i * m + j] * sb[i];
                              }
                            }
                          }
                        });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (batch == 0 || labels.size() != batch) {
    throw ShapeError("cross_entropy", logits.shape(), {labels.size()}, "one label per row required");
  }
  const auto v = logits.values();
  std::vector<double> probs(batch * classes);
  std::vector<int> targets(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " at row " +
                              std::to_string(r) + " outside [0, " + std::to_string(classes) + ")");
    }
    const double* row = v.data() + r * classes;
    const double peak = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - peak);
    const double log_z = peak + std::log(z);
    total += log_z - row[label];
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - log_z);
  }
  const double n = static_cast<double>(batch);
  return Tensor::result(
      {1}, {total / n}, {logits},
      [logits, classes, n, probs = std::move(probs), targets = std::move(targets)](
          std::span<const double> g, std::span<const double>) {
        auto d = logits.grad_accumulator();
        const double scale = g[0] / n;
        for (std::size_t r = 0; r < targets.size(); ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<std::size_t>(targets[r]) == c ? 1.0 : 0.0;
            d[r * classes + c] += scale * (probs[r * classes + c] - onehot);
          }
        }
      });
}

bool all_finite(const Tensor& x) {
  const auto v = x.values();
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

}  // namespace tabplus::ops
