#include "overlay/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace overlay::num {

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
  Mat m;
  m.rows = rs.size();
  m.cols = rs.size() ? rs.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rs) {
    if (r.size() != m.cols) {
      throw std::invalid_argument("from_rows: ragged rows");
    }
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Mat Mat::col_vec(const Vec& v) {
  Mat m(v.size(), 1);
  m.data = v;
  return m;
}

Mat Mat::row_vec(const Vec& v) {
  Mat m(1, v.size());
  m.data = v;
  return m;
}

Vec Mat::row(std::size_t r) const {
  return Vec(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
             data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
}

Vec Mat::to_vec() const {
  if (!is_vector()) {
    throw std::invalid_argument("to_vec: matrix is not vector shaped");
  }
  return data;
}

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

bool all_finite(const Mat& m) { return all_finite(m.data); }

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

Vec matvec(const Mat& w, const Vec& x) {
  if (w.cols != x.size()) {
    throw std::invalid_argument("matvec: dimension mismatch");
  }
  Vec out(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += w.at(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

double dot(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

double sigmoid(double x) {
  // Split on sign to avoid overflow in exp for large |x|.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

Vec silu(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = silu(v[i]);
  return out;
}

Vec softmax(const Vec& v) {
  if (v.empty()) {
    throw std::invalid_argument("softmax: empty vector");
  }
  const double m = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

std::optional<double> cosine(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: length mismatch");
  }
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return std::nullopt;
  // Identical and negated inputs hit the bounds exactly; sqrt rounding would
  // otherwise leave them one ulp short.
  bool same = true;
  bool negated = true;
  for (std::size_t i = 0; i < u.size(); ++i) {
    same = same && u[i] == v[i];
    negated = negated && u[i] == -v[i];
  }
  if (same) return 1.0;
  if (negated) return -1.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

AttnResult cross_attention(const Vec& query, const Mat& keys,
                           const Mat& values) {
  if (keys.rows != values.rows) {
    throw std::invalid_argument("cross_attention: key/value row mismatch");
  }
  if (keys.cols != query.size()) {
    throw std::invalid_argument("cross_attention: query width mismatch");
  }
  if (keys.rows == 0) {
    throw std::invalid_argument("cross_attention: no keys");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(keys.cols));
  Vec scores(keys.rows);
  for (std::size_t i = 0; i < keys.rows; ++i) {
    scores[i] = dot(keys.row(i), query) * scale;
  }
  AttnResult r;
  r.weights = softmax(scores);
  r.output.assign(values.cols, 0.0);
  for (std::size_t i = 0; i < values.rows; ++i) {
    for (std::size_t j = 0; j < values.cols; ++j) {
      r.output[j] += r.weights[i] * values.at(i, j);
    }
  }
  return r;
}

Vec swiglu(const Vec& x, const Mat& w_gate, const Mat& w_up,
           const Mat& w_down) {
  if (w_gate.rows != w_up.rows || w_down.cols != w_gate.rows ||
      w_gate.cols != x.size() || w_up.cols != x.size()) {
    throw std::invalid_argument("swiglu: shapes do not compose");
  }
  const Vec g = silu(matvec(w_gate, x));
  const Vec u = matvec(w_up, x);
  Vec h(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) h[i] = g[i] * u[i];
  return matvec(w_down, h);
}

double kl_divergence(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

std::optional<double> pearson(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("pearson: length mismatch");
  }
  const std::size_t n = x.size();
  if (n < 2) {
    throw std::invalid_argument("pearson: need at least 2 points");
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double t_statistic(double r, std::size_t n) {
  if (n < 3) {
    throw std::invalid_argument("t_statistic: need n >= 3");
  }
  if (std::abs(r) > 1.0) {
    throw std::invalid_argument("t_statistic: |r| > 1");
  }
  if (std::abs(r) == 1.0) {
    return std::copysign(std::numeric_limits<double>::infinity(), r);
  }
  return r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
}

}  // namespace overlay::num
