#include "tcplan/tensorlab/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tcplan/error.hpp"

namespace tcplan::tensorlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

MatMap emap(Tensor& t) { return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }
CMatMap emap(const Tensor& t) {
  return CMatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Graph& graph_of(Var a) {
  if (!a.valid()) throw DimensionError("op on invalid variable");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  Graph& g = graph_of(a);
  if (b.graph != &g) throw DimensionError("op mixes variables from different graphs");
  return g;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Elementwise unary op with derivative expressed through input and output.
template <typename F, typename DF>
Var unary(const char* name, Var x, F f, DF df) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const int xi = x.id;
  return g.record(name, std::move(out), {xi}, [xi, df](Graph& gr, int self) {
    if (!gr.requires_grad(xi)) return;
    const Tensor& dy = gr.grad(self);
    const Tensor& xv2 = gr.value(xi);
    const Tensor& yv = gr.value(self);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * df(xv2[i], yv[i]);
  });
}

// Masked, optionally causal, row softmax written into probs; returns false
// for rows with no valid key (left as zeros).
void masked_softmax_into(const double* logits, double* probs, std::size_t rows, std::size_t cols,
                         const KeyMask& mask, bool causal) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* l = logits + i * cols;
    double* p = probs + i * cols;
    const std::size_t limit = causal ? std::min(cols, i + 1) : cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < limit; ++j) {
      if (!mask.empty() && mask[j] == 0) continue;
      mx = std::max(mx, l[j]);
    }
    for (std::size_t j = 0; j < cols; ++j) p[j] = 0.0;
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
      if (!mask.empty() && mask[j] == 0) continue;
      p[j] = std::exp(l[j] - mx);
      total += p[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < limit; ++j) p[j] *= inv;
  }
}

// dL = P * (dP - rowsum(dP * P)), in place over dP.
void softmax_backward_inplace(const double* probs, double* dprobs, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* p = probs + i * cols;
    double* d = dprobs + i * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += d[j] * p[j];
    for (std::size_t j = 0; j < cols; ++j) d[j] = p[j] * (d[j] - dot);
  }
}

}  // namespace

// ---------------------------------------------------------------- algebra

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor out(av.rows(), bv.cols());
  if (av.cols() > 0) emap(out).noalias() = emap(av) * emap(bv);
  const int ai = a.id, bi = b.id;
  return g.record("matmul", std::move(out), {ai, bi}, [ai, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(ai)) emap(gr.grad_ref(ai)).noalias() += emap(dy) * emap(gr.value(bi)).transpose();
    if (gr.requires_grad(bi)) emap(gr.grad_ref(bi)).noalias() += emap(gr.value(ai)).transpose() * emap(dy);
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  Tensor out(av.rows(), bv.rows());
  if (av.cols() > 0) emap(out).noalias() = emap(av) * emap(bv).transpose();
  const int ai = a.id, bi = b.id;
  return g.record("matmul_nt", std::move(out), {ai, bi}, [ai, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(ai)) emap(gr.grad_ref(ai)).noalias() += emap(dy) * emap(gr.value(bi));
    if (gr.requires_grad(bi)) emap(gr.grad_ref(bi)).noalias() += emap(dy).transpose() * emap(gr.value(ai));
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& av = g.value(a);
  Tensor out(av.cols(), av.rows());
  emap(out) = emap(av).transpose();
  const int ai = a.id;
  return g.record("transpose", std::move(out), {ai}, [ai](Graph& gr, int self) {
    emap(gr.grad_ref(ai)) += emap(gr.grad(self)).transpose();
  });
}

Var linear(Var x, Var weight, Var bias) {
  Graph& g = graph_of(x, weight);
  graph_of(x, bias);
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(weight);
  const Tensor& bv = g.value(bias);
  if (xv.cols() != wv.rows()) shape_error("linear", xv, wv);
  if (bv.rows() != 1 || bv.cols() != wv.cols()) shape_error("linear(bias)", wv, bv);
  Tensor out(xv.rows(), wv.cols());
  if (xv.rows() > 0) {
    emap(out).noalias() = emap(xv) * emap(wv);
    emap(out).rowwise() += emap(bv).row(0);
  }
  const int xi = x.id, wi = weight.id, bi = bias.id;
  return g.record("linear", std::move(out), {xi, wi, bi}, [xi, wi, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (dy.rows() == 0) return;
    if (gr.requires_grad(xi)) emap(gr.grad_ref(xi)).noalias() += emap(dy) * emap(gr.value(wi)).transpose();
    if (gr.requires_grad(wi)) emap(gr.grad_ref(wi)).noalias() += emap(gr.value(xi)).transpose() * emap(dy);
    if (gr.requires_grad(bi)) emap(gr.grad_ref(bi)).row(0) += emap(dy).colwise().sum();
  });
}

// ------------------------------------------------------------ elementwise

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (!av.same_shape(bv)) shape_error("add", av, bv);
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const int ai = a.id, bi = b.id;
  return g.record("add", std::move(out), {ai, bi}, [ai, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(ai)) accumulate(gr.grad_ref(ai), dy);
    if (gr.requires_grad(bi)) accumulate(gr.grad_ref(bi), dy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (!av.same_shape(bv)) shape_error("sub", av, bv);
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const int ai = a.id, bi = b.id;
  return g.record("sub", std::move(out), {ai, bi}, [ai, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(ai)) accumulate(gr.grad_ref(ai), dy);
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (!av.same_shape(bv)) shape_error("mul", av, bv);
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const int ai = a.id, bi = b.id;
  return g.record("mul", std::move(out), {ai, bi}, [ai, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& a2 = gr.value(ai);
    const Tensor& b2 = gr.value(bi);
    if (gr.requires_grad(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b2[i];
    }
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a2[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var add_bias(Var x, Var bias) {
  Graph& g = graph_of(x, bias);
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_error("add_bias", xv, bv);
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  const int xi = x.id, bi = bias.id;
  return g.record("add_bias", std::move(out), {xi, bi}, [xi, bi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(xi)) accumulate(gr.grad_ref(xi), dy);
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) db[c] += dy(r, c);
    }
  });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        // Clamped so the output stays strictly inside (0, 1) after rounding.
        const double y = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        return std::clamp(y, std::numeric_limits<double>::denorm_min(), 1.0 - 0x1.0p-53);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var gelu(Var x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + c * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(k * (v + c * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v);
      });
}

Var relu(Var x) {
  return unary("relu", x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

// ------------------------------------------------------------------ shape

Var concat(Var a, Var b, Axis axis) {
  Graph& g = graph_of(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  const int ai = a.id, bi = b.id;
  if (axis == Axis::Rows) {
    if (av.cols() != bv.cols()) shape_error("concat(rows)", av, bv);
    std::vector<double> data(av.values());
    data.insert(data.end(), bv.values().begin(), bv.values().end());
    Tensor out(av.rows() + bv.rows(), av.cols(), std::move(data));
    const std::size_t split = av.size();
    return g.record("concat", std::move(out), {ai, bi}, [ai, bi, split](Graph& gr, int self) {
      const Tensor& dy = gr.grad(self);
      if (gr.requires_grad(ai)) {
        Tensor& da = gr.grad_ref(ai);
        for (std::size_t i = 0; i < split; ++i) da[i] += dy[i];
      }
      if (gr.requires_grad(bi)) {
        Tensor& db = gr.grad_ref(bi);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[split + i];
      }
    });
  }
  if (av.rows() != bv.rows()) shape_error("concat(cols)", av, bv);
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return g.record("concat", std::move(out), {ai, bi}, [ai, bi, ca, cb](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    const std::size_t rows = dy.rows();
    if (gr.requires_grad(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) da(r, c) += dy(r, c);
    }
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) db(r, c) += dy(r, ca + c);
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  if (begin + count > xv.rows()) throw IndexError("slice_rows: [" + std::to_string(begin) + ", +" +
                                                  std::to_string(count) + ") out of " + xv.shape_string());
  const std::size_t c = xv.cols();
  std::vector<double> data(xv.data() + begin * c, xv.data() + (begin + count) * c);
  const int xi = x.id;
  return g.record("slice_rows", Tensor(count, c, std::move(data)), {xi}, [xi, begin](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad_ref(xi);
    const std::size_t off = begin * dx.cols();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[off + i] += dy[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  if (begin + count > xv.cols()) throw IndexError("slice_cols: [" + std::to_string(begin) + ", +" +
                                                  std::to_string(count) + ") out of " + xv.shape_string());
  Tensor out(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r) std::copy_n(xv.data() + r * xv.cols() + begin, count, out.data() + r * count);
  const int xi = x.id;
  return g.record("slice_cols", std::move(out), {xi}, [xi, begin](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t r = 0; r < dy.rows(); ++r)
      for (std::size_t c = 0; c < dy.cols(); ++c) dx(r, begin + c) += dy(r, c);
  });
}

// ------------------------------------------------------------- reductions

Var sum(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  double total = 0.0;
  for (double v : xv.values()) total += v;
  const int xi = x.id;
  return g.record("sum", Tensor::scalar(total), {xi}, [xi](Graph& gr, int self) {
    const double dy = gr.grad(self)[0];
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy;
  });
}

Var mean_pool(Var x, Axis axis) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  const int xi = x.id;
  if (axis == Axis::Rows) {
    Tensor out(1, xv.cols());
    const double n = static_cast<double>(xv.rows());
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < xv.rows(); ++r) acc += xv(r, c);
      out[c] = xv.rows() == 0 ? 0.0 : acc / n;
    }
    return g.record("mean_pool", std::move(out), {xi}, [xi](Graph& gr, int self) {
      const Tensor& dy = gr.grad(self);
      Tensor& dx = gr.grad_ref(xi);
      if (dx.rows() == 0) return;
      const double inv = 1.0 / static_cast<double>(dx.rows());
      for (std::size_t r = 0; r < dx.rows(); ++r)
        for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy[c] * inv;
    });
  }
  Tensor out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) acc += xv(r, c);
    out[r] = xv.cols() == 0 ? 0.0 : acc / static_cast<double>(xv.cols());
  }
  return g.record("mean_pool", std::move(out), {xi}, [xi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad_ref(xi);
    if (dx.cols() == 0) return;
    const double inv = 1.0 / static_cast<double>(dx.cols());
    for (std::size_t r = 0; r < dx.rows(); ++r)
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy[r] * inv;
  });
}

Var masked_mean_rows(Var x, const KeyMask& mask) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  if (!mask.empty() && mask.size() != xv.rows()) throw DimensionError("masked_mean_rows: mask length");
  std::size_t valid = 0;
  for (std::size_t r = 0; r < xv.rows(); ++r) valid += (mask.empty() || mask[r]) ? 1 : 0;
  Tensor out(1, xv.cols());
  if (valid > 0) {
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < xv.rows(); ++r)
        if (mask.empty() || mask[r]) acc += xv(r, c);
      out[c] = acc / static_cast<double>(valid);
    }
  }
  const int xi = x.id;
  return g.record("masked_mean_rows", std::move(out), {xi}, [xi, mask, valid](Graph& gr, int self) {
    if (valid == 0) return;
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad_ref(xi);
    const double inv = 1.0 / static_cast<double>(valid);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      if (!mask.empty() && !mask[r]) continue;
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy[c] * inv;
    }
  });
}

// ------------------------------------------------ softmax / normalization

Var softmax_rows(Var x) { return masked_softmax_rows(x, {}, false); }

Var masked_softmax_rows(Var x, const KeyMask& key_mask, bool causal) {
  Graph& g = graph_of(x);
  const Tensor& xv = g.value(x);
  if (!key_mask.empty() && key_mask.size() != xv.cols()) throw DimensionError("masked_softmax_rows: mask length");
  Tensor out(xv.rows(), xv.cols());
  masked_softmax_into(xv.data(), out.data(), xv.rows(), xv.cols(), key_mask, causal);
  const int xi = x.id;
  return g.record("softmax_rows", std::move(out), {xi}, [xi](Graph& gr, int self) {
    const Tensor& p = gr.value(self);
    Tensor d = gr.grad(self);
    softmax_backward_inplace(p.data(), d.data(), p.rows(), p.cols());
    accumulate(gr.grad_ref(xi), d);
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of(x, gain);
  graph_of(x, bias);
  const Tensor& xv = g.value(x);
  const Tensor& gv = g.value(gain);
  const Tensor& bv = g.value(bias);
  const std::size_t n = xv.cols();
  if (gv.size() != n || bv.size() != n) shape_error("layer_norm", xv, gv);
  Tensor out(xv.rows(), n);
  auto xhat = std::make_shared<Tensor>(xv.rows(), n);
  auto inv_std = std::make_shared<std::vector<double>>(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double* row = xv.data() + r * n;
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (row[c] - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = h * gv[c] + bv[c];
    }
  }
  const int xi = x.id, gi = gain.id, bi = bias.id;
  return g.record("layer_norm", std::move(out), {xi, gi, bi}, [xi, gi, bi, xhat, inv_std](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& gv2 = gr.value(gi);
    const std::size_t rows = dy.rows(), cols = dy.cols();
    if (gr.requires_grad(gi)) {
      Tensor& dg = gr.grad_ref(gi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dg[c] += dy(r, c) * (*xhat)(r, c);
    }
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) db[c] += dy(r, c);
    }
    if (gr.requires_grad(xi)) {
      Tensor& dx = gr.grad_ref(xi);
      std::vector<double> dh(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dh[c] = dy(r, c) * gv2[c];
          mean_dh += dh[c];
          mean_dh_h += dh[c] * (*xhat)(r, c);
        }
        mean_dh /= static_cast<double>(cols);
        mean_dh_h /= static_cast<double>(cols);
        const double is = (*inv_std)[r];
        for (std::size_t c = 0; c < cols; ++c) dx(r, c) += is * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
      }
    }
  });
}

// ---------------------------------------------------------- lookup / loss

Var embed(Var table, std::span<const int> ids) {
  Graph& g = graph_of(table);
  const Tensor& tv = g.value(table);
  const std::size_t d = tv.cols();
  Tensor out(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw IndexError("embed: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(tv.rows()));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  const int ti = table.id;
  std::vector<int> saved(ids.begin(), ids.end());
  return g.record("embed", std::move(out), {ti}, [ti, saved = std::move(saved)](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dt = gr.grad_ref(ti);
    const std::size_t d2 = dt.cols();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      double* row = dt.data() + static_cast<std::size_t>(saved[i]) * d2;
      for (std::size_t c = 0; c < d2; ++c) row[c] += dy(i, c);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels, int ignore_index) {
  Graph& g = graph_of(logits);
  const Tensor& lv = g.value(logits);
  if (labels.size() != lv.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + lv.shape_string());
  }
  const std::size_t v = lv.cols();
  auto probs = std::make_shared<Tensor>(lv.rows(), v);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    if (labels[i] == ignore_index && ignore_index != kNoIgnore) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= v) {
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " outside vocabulary of " +
                       std::to_string(v));
    }
    const double* row = lv.data() + i * v;
    double mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[labels[i]];
    for (std::size_t j = 0; j < v; ++j) (*probs)(i, j) = std::exp(row[j] - lse);
    ++count;
  }
  const double loss = count == 0 ? 0.0 : total / static_cast<double>(count);
  const int li = logits.id;
  std::vector<int> saved(labels.begin(), labels.end());
  return g.record("cross_entropy", Tensor::scalar(loss), {li},
                  [li, probs, count, ignore_index, saved = std::move(saved)](Graph& gr, int self) {
                    if (count == 0) return;
                    const double scale_factor = gr.grad(self)[0] / static_cast<double>(count);
                    Tensor& dl = gr.grad_ref(li);
                    const std::size_t v2 = dl.cols();
                    for (std::size_t i = 0; i < saved.size(); ++i) {
                      if (saved[i] == ignore_index && ignore_index != kNoIgnore) continue;
                      for (std::size_t j = 0; j < v2; ++j) dl(i, j) += scale_factor * (*probs)(i, j);
                      dl(i, static_cast<std::size_t>(saved[i])) -= scale_factor;
                    }
                  });
}

// ----------------------------------------------------------------- gating

Var scale_cols(Var x, Var col_weight) {
  Graph& g = graph_of(x, col_weight);
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(col_weight);
  if (wv.size() != xv.cols()) shape_error("scale_cols", xv, wv);
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) * wv[c];
  const int xi = x.id, wi = col_weight.id;
  return g.record("scale_cols", std::move(out), {xi, wi}, [xi, wi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(xi)) {
      const Tensor& w = gr.value(wi);
      Tensor& dx = gr.grad_ref(xi);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) dx(r, c) += dy(r, c) * w[c];
    }
    if (gr.requires_grad(wi)) {
      const Tensor& xv2 = gr.value(xi);
      Tensor& dw = gr.grad_ref(wi);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) dw[c] += dy(r, c) * xv2(r, c);
    }
  });
}

Var mul_col(Var x, Var gate) {
  Graph& g = graph_of(x, gate);
  const Tensor& xv = g.value(x);
  const Tensor& gv = g.value(gate);
  if (gv.size() != xv.rows()) shape_error("mul_col", xv, gv);
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) * gv[r];
  const int xi = x.id, gi = gate.id;
  return g.record("mul_col", std::move(out), {xi, gi}, [xi, gi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& xv2 = gr.value(xi);
    const Tensor& gv2 = gr.value(gi);
    if (gr.requires_grad(xi)) {
      Tensor& dx = gr.grad_ref(xi);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) dx(r, c) += dy(r, c) * gv2[r];
    }
    if (gr.requires_grad(gi)) {
      Tensor& dg = gr.grad_ref(gi);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) dg[r] += dy(r, c) * xv2(r, c);
    }
  });
}

Var gate_mix(Var a, Var b, Var gate) {
  Graph& g = graph_of(a, b);
  graph_of(a, gate);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  const Tensor& gv = g.value(gate);
  if (!av.same_shape(bv)) shape_error("gate_mix", av, bv);
  if (gv.size() != av.rows()) shape_error("gate_mix(gate)", av, gv);
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) {
      // Rounding could step outside the segment; clamp back onto it.
      const double lo = std::min(av(r, c), bv(r, c)), hi = std::max(av(r, c), bv(r, c));
      out(r, c) = std::clamp(gv[r] * av(r, c) + (1.0 - gv[r]) * bv(r, c), lo, hi);
    }
  const int ai = a.id, bi = b.id, gi = gate.id;
  return g.record("gate_mix", std::move(out), {ai, bi, gi}, [ai, bi, gi](Graph& gr, int self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& a2 = gr.value(ai);
    const Tensor& b2 = gr.value(bi);
    const Tensor& g2 = gr.value(gi);
    const std::size_t rows = dy.rows(), cols = dy.cols();
    if (gr.requires_grad(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) da(r, c) += dy(r, c) * g2[r];
    }
    if (gr.requires_grad(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) db(r, c) += dy(r, c) * (1.0 - g2[r]);
    }
    if (gr.requires_grad(gi)) {
      Tensor& dg = gr.grad_ref(gi);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += dy(r, c) * (a2(r, c) - b2(r, c));
        dg[r] += acc;
      }
    }
  });
}

// -------------------------------------------------------------- attention

Var attention(Var q, Var k, Var v, const AttentionSpec& spec, std::optional<Var> col_weight, Tensor* probs_out) {
  Graph& g = graph_of(q, k);
  graph_of(q, v);
  if (col_weight) graph_of(q, *col_weight);
  const Tensor& qv = g.value(q);
  const Tensor& kv = g.value(k);
  const Tensor& vv = g.value(v);
  const std::size_t heads = spec.heads;
  if (heads == 0 || qv.cols() % heads != 0 || vv.cols() % heads != 0) {
    throw DimensionError("attention: width not divisible by " + std::to_string(heads) + " heads");
  }
  if (qv.cols() != kv.cols()) shape_error("attention(q,k)", qv, kv);
  if (kv.rows() != vv.rows()) shape_error("attention(k,v)", kv, vv);
  const std::size_t p = qv.rows(), nk = kv.rows();
  if (!spec.key_mask.empty() && spec.key_mask.size() != nk) throw DimensionError("attention: key mask length");
  const Tensor* wv = col_weight ? &g.value(*col_weight) : nullptr;
  if (wv != nullptr && wv->size() != nk) shape_error("attention(weight)", kv, *wv);

  const std::size_t dq = qv.cols() / heads, dv = vv.cols() / heads;
  Tensor out(p, vv.cols());
  // Per-head probabilities (p x nk each) and, when weighted, raw scores.
  auto probs = std::make_shared<std::vector<RowMat>>(heads);
  auto scores = std::make_shared<std::vector<RowMat>>(wv != nullptr ? heads : 0);
  const CMatMap Q = emap(qv), K = emap(kv), V = emap(vv);
  MatMap O = emap(out);
  RowMat logits(p, nk);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto hq = static_cast<Eigen::Index>(h * dq), hv = static_cast<Eigen::Index>(h * dv);
    const auto edq = static_cast<Eigen::Index>(dq), edv = static_cast<Eigen::Index>(dv);
    RowMat s(p, nk);
    if (p > 0 && nk > 0) s.noalias() = spec.scale * (Q.middleCols(hq, edq) * K.middleCols(hq, edq).transpose());
    if (wv != nullptr) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < nk; ++j) logits(i, j) = s(i, j) * (*wv)[j];
      (*scores)[h] = std::move(s);
    } else {
      logits = std::move(s);
    }
    RowMat& ph = (*probs)[h];
    ph.resize(p, nk);
    masked_softmax_into(logits.data(), ph.data(), p, nk, spec.key_mask, spec.causal);
    if (p > 0 && nk > 0) O.middleCols(hv, edv).noalias() = ph * V.middleCols(hv, edv);
  }
  if (probs_out != nullptr) {
    *probs_out = Tensor(p, nk);
    if (heads > 0) std::copy_n((*probs)[0].data(), p * nk, probs_out->data());
  }

  const int qi = q.id, ki = k.id, vi = v.id;
  const int wi = col_weight ? col_weight->id : -1;
  std::vector<int> inputs{qi, ki, vi};
  if (wi >= 0) inputs.push_back(wi);
  const double sc = spec.scale;
  return g.record(
      wi >= 0 ? "mutual_attention" : "attention", std::move(out), std::move(inputs),
      [qi, ki, vi, wi, heads, dq, dv, sc, probs, scores](Graph& gr, int self) {
        const Tensor& dy = gr.grad(self);
        const std::size_t p2 = dy.rows();
        const Tensor& qv2 = gr.value(qi);
        const Tensor& kv2 = gr.value(ki);
        const Tensor& vv2 = gr.value(vi);
        const std::size_t nk2 = kv2.rows();
        if (p2 == 0 || nk2 == 0) return;
        const CMatMap Q2 = emap(qv2), K2 = emap(kv2), V2 = emap(vv2), dO = emap(dy);
        const Tensor* w = wi >= 0 ? &gr.value(wi) : nullptr;
        const bool need_q = gr.requires_grad(qi), need_k = gr.requires_grad(ki), need_v = gr.requires_grad(vi);
        const bool need_w = wi >= 0 && gr.requires_grad(wi);
        RowMat dP(p2, nk2);
        for (std::size_t h = 0; h < heads; ++h) {
          const auto hq = static_cast<Eigen::Index>(h * dq), hv = static_cast<Eigen::Index>(h * dv);
          const auto edq = static_cast<Eigen::Index>(dq), edv = static_cast<Eigen::Index>(dv);
          const RowMat& ph = (*probs)[h];
          if (need_v) emap(gr.grad_ref(vi)).middleCols(hv, edv).noalias() += ph.transpose() * dO.middleCols(hv, edv);
          dP.noalias() = dO.middleCols(hv, edv) * V2.middleCols(hv, edv).transpose();
          softmax_backward_inplace(ph.data(), dP.data(), p2, nk2);
          if (w != nullptr) {
            const RowMat& sh = (*scores)[h];
            if (need_w) {
              Tensor& dw = gr.grad_ref(wi);
              for (std::size_t i = 0; i < p2; ++i)
                for (std::size_t j = 0; j < nk2; ++j) dw[j] += dP(i, j) * sh(i, j);
            }
            for (std::size_t i = 0; i < p2; ++i)
              for (std::size_t j = 0; j < nk2; ++j) dP(i, j) *= (*w)[j];
          }
          if (need_q) emap(gr.grad_ref(qi)).middleCols(hq, edq).noalias() += sc * (dP * K2.middleCols(hq, edq));
          if (need_k) emap(gr.grad_ref(ki)).middleCols(hq, edq).noalias() += sc * (dP.transpose() * Q2.middleCols(hq, edq));
        }
      });
}

}  // namespace tcplan::tensorlab
