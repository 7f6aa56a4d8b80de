#pragma once

// Plain-loop reference computations, written without tensorlab, used as
// oracles for the planner.

#include <cmath>
#include <cstddef>
#include <vector>

#include "tcplan/tensorlab/tensor.hpp"

namespace ref {

using Mat = std::vector<std::vector<double>>;

inline Mat from(const tcplan::tensorlab::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t p = a.size(), q = b.size(), r = b.empty() ? 0 : b[0].size();
  Mat out(p, std::vector<double>(r, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

inline Mat add_row(Mat a, const Mat& bias) {
  for (auto& row : a)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[0][j];
  return a;
}

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

inline Mat linear(const Mat& x, const Mat& w, const Mat& b) { return add_row(matmul(x, w), b); }

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, double eps = 1e-5) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j)
      out[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain[0][j] + bias[0][j];
  }
  return out;
}

inline double gelu(double v) {
  return 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Multi-head attention over column-split heads; weight (may be empty)
// multiplies logits column-wise.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, std::size_t heads, double scale, bool causal,
                     const std::vector<double>& weight = {}) {
  const std::size_t p = q.size(), n = k.size(), d = q.empty() ? 0 : q[0].size(), dh = d / heads;
  Mat out(p, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> logit(n, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        if (causal && j > i) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
        s *= scale;
        if (!weight.empty()) s *= weight[j];
        logit[j] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      std::vector<double> prob(n, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (logit[j] != -INFINITY) z += (prob[j] = std::exp(logit[j] - mx));
      for (std::size_t j = 0; j < n; ++j) {
        prob[j] /= z;
        for (std::size_t c = 0; c < dh; ++c) out[i][h * dh + c] += prob[j] * v[j][h * dh + c];
      }
    }
  }
  return out;
}

}  // namespace ref
