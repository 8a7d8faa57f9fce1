#include "overlay/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "overlay/numerics/ops.hpp"

namespace overlay::num {

namespace {

// BLAS-style product with transpose flags; out(i,j) += lhs(i,:) . rhs(:,j).
Mat mm(const Mat& a, bool ta, const Mat& b, bool tb) {
  const std::size_t m = ta ? a.cols : a.rows;
  const std::size_t ka = ta ? a.rows : a.cols;
  const std::size_t kb = tb ? b.cols : b.rows;
  const std::size_t n = tb ? b.rows : b.cols;
  if (ka != kb) {
    throw std::invalid_argument("tape matmul: inner dimensions differ");
  }
  Mat out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < ka; ++k) {
      const double av = ta ? a.at(k, i) : a.at(i, k);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        out.at(i, j) += av * (tb ? b.at(j, k) : b.at(k, j));
      }
    }
  }
  return out;
}

void add_into(Mat& dst, const Mat& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

bool is_scalar(const Mat& m) { return m.rows == 1 && m.cols == 1; }

}  // namespace

Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  const std::size_t i = nodes_.size() - 1;
  if (nodes_[i].op != Op::leaf && nodes_[i].op != Op::constant) compute(i);
  nodes_[i].grad = Mat(nodes_[i].value.rows, nodes_[i].value.cols);
  return Id{i};
}

Id Tape::leaf(Mat value, std::string name) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Id Tape::constant(Mat value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Id Tape::scalar(double v) { return constant(Mat(1, 1, v)); }

Id Tape::matmul(Id a, Id b, bool trans_a, bool trans_b) {
  Node n;
  n.op = Op::matmul;
  n.inputs = {a.idx, b.idx};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return push(std::move(n));
}

Id Tape::add(Id a, Id b) {
  if (val(a.idx).rows != val(b.idx).rows ||
      val(a.idx).cols != val(b.idx).cols) {
    throw std::invalid_argument("tape add: shape mismatch");
  }
  Node n;
  n.op = Op::add;
  n.inputs = {a.idx, b.idx};
  return push(std::move(n));
}

Id Tape::mul(Id a, Id b) {
  const Mat& va = val(a.idx);
  const Mat& vb = val(b.idx);
  const bool same = va.rows == vb.rows && va.cols == vb.cols;
  if (!same && !is_scalar(va) && !is_scalar(vb)) {
    throw std::invalid_argument("tape mul: shape mismatch");
  }
  Node n;
  n.op = Op::mul;
  n.inputs = {a.idx, b.idx};
  return push(std::move(n));
}

Id Tape::sigmoid(Id a) {
  Node n;
  n.op = Op::sigmoid;
  n.inputs = {a.idx};
  return push(std::move(n));
}

Id Tape::silu(Id a) {
  Node n;
  n.op = Op::silu;
  n.inputs = {a.idx};
  return push(std::move(n));
}

Id Tape::softmax(Id a) { return softmax_masked(a, {}); }

Id Tape::softmax_masked(Id a, std::vector<std::uint8_t> mask) {
  if (!val(a.idx).is_vector()) {
    throw std::invalid_argument("tape softmax: input not vector shaped");
  }
  if (!mask.empty() && mask.size() != val(a.idx).size()) {
    throw std::invalid_argument("tape softmax: mask length mismatch");
  }
  if (!mask.empty() &&
      std::count(mask.begin(), mask.end(), std::uint8_t{1}) == 0) {
    throw std::invalid_argument("tape softmax: all entries masked");
  }
  Node n;
  n.op = Op::softmax;
  n.inputs = {a.idx};
  n.mask = std::move(mask);
  return push(std::move(n));
}

Id Tape::softmax_of(const std::vector<Id>& scores) {
  if (scores.empty()) {
    throw std::invalid_argument("tape softmax_of: no scores");
  }
  Node n;
  n.op = Op::softmax_of;
  for (Id s : scores) {
    if (!is_scalar(val(s.idx))) {
      throw std::invalid_argument("tape softmax_of: inputs must be 1x1");
    }
    n.inputs.push_back(s.idx);
  }
  return push(std::move(n));
}

Id Tape::cosine(Id u, Id v) {
  if (val(u.idx).size() != val(v.idx).size()) {
    throw std::invalid_argument("tape cosine: length mismatch");
  }
  Node n;
  n.op = Op::cosine;
  n.inputs = {u.idx, v.idx};
  return push(std::move(n));
}

Id Tape::mean_of(const std::vector<Id>& xs) {
  if (xs.empty()) {
    throw std::invalid_argument("tape mean_of: no inputs");
  }
  Node n;
  n.op = Op::mean_of;
  for (Id x : xs) {
    if (val(x.idx).rows != val(xs[0].idx).rows ||
        val(x.idx).cols != val(xs[0].idx).cols) {
      throw std::invalid_argument("tape mean_of: shape mismatch");
    }
    n.inputs.push_back(x.idx);
  }
  return push(std::move(n));
}

Id Tape::cross_entropy(Id logits, std::size_t target) {
  if (!val(logits.idx).is_vector() || target >= val(logits.idx).size()) {
    throw std::invalid_argument("tape cross_entropy: bad logits or target");
  }
  Node n;
  n.op = Op::cross_entropy;
  n.inputs = {logits.idx};
  n.target = target;
  return push(std::move(n));
}

Id Tape::kl_div(Id p, Id q) {
  if (val(p.idx).size() != val(q.idx).size()) {
    throw std::invalid_argument("tape kl_div: length mismatch");
  }
  Node n;
  n.op = Op::kl_div;
  n.inputs = {p.idx, q.idx};
  return push(std::move(n));
}

Id Tape::stack_rows(const std::vector<Id>& rows) {
  if (rows.empty()) {
    throw std::invalid_argument("tape stack_rows: no rows");
  }
  Node n;
  n.op = Op::stack_rows;
  for (Id r : rows) {
    if (!val(r.idx).is_vector() ||
        val(r.idx).size() != val(rows[0].idx).size()) {
      throw std::invalid_argument("tape stack_rows: rows must be equal-length"
                                  " vectors");
    }
    n.inputs.push_back(r.idx);
  }
  return push(std::move(n));
}

void Tape::compute(std::size_t i) {
  Node& n = nodes_[i];
  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      break;
    case Op::matmul:
      n.value = mm(val(n.inputs[0]), n.trans_a, val(n.inputs[1]), n.trans_b);
      break;
    case Op::add: {
      n.value = val(n.inputs[0]);
      add_into(n.value, val(n.inputs[1]));
      break;
    }
    case Op::mul: {
      const Mat& a = val(n.inputs[0]);
      const Mat& b = val(n.inputs[1]);
      if (a.rows == b.rows && a.cols == b.cols) {
        n.value = a;
        for (std::size_t k = 0; k < b.data.size(); ++k) {
          n.value.data[k] *= b.data[k];
        }
      } else if (is_scalar(b)) {
        n.value = a;
        for (double& x : n.value.data) x *= b.data[0];
      } else {
        n.value = b;
        for (double& x : n.value.data) x *= a.data[0];
      }
      break;
    }
    case Op::sigmoid: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.data) x = num::sigmoid(x);
      break;
    }
    case Op::silu: {
      n.value = val(n.inputs[0]);
      for (double& x : n.value.data) x = num::silu(x);
      break;
    }
    case Op::softmax: {
      const Mat& in = val(n.inputs[0]);
      n.value = Mat(in.rows, in.cols);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < in.data.size(); ++k) {
        if ((n.mask.empty() || n.mask[k]) && in.data[k] > mx) mx = in.data[k];
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < in.data.size(); ++k) {
        if (n.mask.empty() || n.mask[k]) {
          n.value.data[k] = std::exp(in.data[k] - mx);
          sum += n.value.data[k];
        }
      }
      for (double& x : n.value.data) x /= sum;
      break;
    }
    case Op::softmax_of: {
      Vec scores(n.inputs.size());
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        scores[k] = val(n.inputs[k]).data[0];
      }
      const Vec s = num::softmax(scores);
      n.value = Mat::col_vec(s);
      break;
    }
    case Op::cosine: {
      const auto c = num::cosine(val(n.inputs[0]).data, val(n.inputs[1]).data);
      n.value = Mat(1, 1, c.value_or(1.0));
      break;
    }
    case Op::mean_of: {
      const Mat& first = val(n.inputs[0]);
      n.value = Mat(first.rows, first.cols);
      for (std::size_t k : n.inputs) add_into(n.value, val(k));
      const double inv = 1.0 / static_cast<double>(n.inputs.size());
      for (double& x : n.value.data) x *= inv;
      break;
    }
    case Op::cross_entropy: {
      const Vec& z = val(n.inputs[0]).data;
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double x : z) sum += std::exp(x - mx);
      n.value = Mat(1, 1, std::log(sum) + mx - z[n.target]);
      break;
    }
    case Op::kl_div: {
      n.value =
          Mat(1, 1, kl_divergence(val(n.inputs[0]).data, val(n.inputs[1]).data));
      break;
    }
    case Op::stack_rows: {
      const std::size_t d = val(n.inputs[0]).size();
      n.value = Mat(n.inputs.size(), d);
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        const Mat& row = val(n.inputs[r]);
        std::copy(row.data.begin(), row.data.end(),
                  n.value.data.begin() + static_cast<std::ptrdiff_t>(r * d));
      }
      break;
    }
  }
}

void Tape::propagate(std::size_t i) {
  Node& n = nodes_[i];
  const Mat& g = n.grad;
  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      break;
    case Op::matmul: {
      const Mat& a = val(n.inputs[0]);
      const Mat& b = val(n.inputs[1]);
      Mat da;
      Mat db;
      if (!n.trans_a && !n.trans_b) {
        da = mm(g, false, b, true);
        db = mm(a, true, g, false);
      } else if (n.trans_a && !n.trans_b) {
        da = mm(b, false, g, true);
        db = mm(a, false, g, false);
      } else if (!n.trans_a && n.trans_b) {
        da = mm(g, false, b, false);
        db = mm(g, true, a, false);
      } else {
        da = mm(b, true, g, true);
        db = mm(g, true, a, true);
      }
      add_into(grd(n.inputs[0]), da);
      add_into(grd(n.inputs[1]), db);
      break;
    }
    case Op::add:
      add_into(grd(n.inputs[0]), g);
      add_into(grd(n.inputs[1]), g);
      break;
    case Op::mul: {
      const Mat& a = val(n.inputs[0]);
      const Mat& b = val(n.inputs[1]);
      Mat& da = grd(n.inputs[0]);
      Mat& db = grd(n.inputs[1]);
      if (a.rows == b.rows && a.cols == b.cols) {
        for (std::size_t k = 0; k < g.data.size(); ++k) {
          da.data[k] += g.data[k] * b.data[k];
          db.data[k] += g.data[k] * a.data[k];
        }
      } else if (is_scalar(b)) {
        for (std::size_t k = 0; k < g.data.size(); ++k) {
          da.data[k] += g.data[k] * b.data[0];
          db.data[0] += g.data[k] * a.data[k];
        }
      } else {
        for (std::size_t k = 0; k < g.data.size(); ++k) {
          db.data[k] += g.data[k] * a.data[0];
          da.data[0] += g.data[k] * b.data[k];
        }
      }
      break;
    }
    case Op::sigmoid: {
      Mat& dx = grd(n.inputs[0]);
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        const double y = n.value.data[k];
        dx.data[k] += g.data[k] * y * (1.0 - y);
      }
      break;
    }
    case Op::silu: {
      const Mat& x = val(n.inputs[0]);
      Mat& dx = grd(n.inputs[0]);
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        const double s = num::sigmoid(x.data[k]);
        dx.data[k] += g.data[k] * s * (1.0 + x.data[k] * (1.0 - s));
      }
      break;
    }
    case Op::softmax: {
      Mat& dx = grd(n.inputs[0]);
      double inner = 0.0;
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        inner += g.data[k] * n.value.data[k];
      }
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        if (!n.mask.empty() && !n.mask[k]) continue;
        dx.data[k] += n.value.data[k] * (g.data[k] - inner);
      }
      break;
    }
    case Op::softmax_of: {
      double inner = 0.0;
      for (std::size_t k = 0; k < g.data.size(); ++k) {
        inner += g.data[k] * n.value.data[k];
      }
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        grd(n.inputs[k]).data[0] +=
            n.value.data[k] * (g.data[k] - inner);
      }
      break;
    }
    case Op::cosine: {
      const Vec& u = val(n.inputs[0]).data;
      const Vec& v = val(n.inputs[1]).data;
      const double nu = norm(u);
      const double nv = norm(v);
      if (nu == 0.0 || nv == 0.0) break;  // degenerate: constant 1
      const double c = n.value.data[0];
      const double gs = g.data[0];
      Mat& du = grd(n.inputs[0]);
      Mat& dv = grd(n.inputs[1]);
      for (std::size_t k = 0; k < u.size(); ++k) {
        du.data[k] += gs * (v[k] / (nu * nv) - c * u[k] / (nu * nu));
        dv.data[k] += gs * (u[k] / (nu * nv) - c * v[k] / (nv * nv));
      }
      break;
    }
    case Op::mean_of: {
      const double inv = 1.0 / static_cast<double>(n.inputs.size());
      for (std::size_t k : n.inputs) {
        Mat& dx = grd(k);
        for (std::size_t j = 0; j < g.data.size(); ++j) {
          dx.data[j] += g.data[j] * inv;
        }
      }
      break;
    }
    case Op::cross_entropy: {
      const Vec probs = num::softmax(val(n.inputs[0]).data);
      Mat& dx = grd(n.inputs[0]);
      const double gs = g.data[0];
      for (std::size_t k = 0; k < probs.size(); ++k) {
        dx.data[k] += gs * (probs[k] - (k == n.target ? 1.0 : 0.0));
      }
      break;
    }
    case Op::kl_div: {
      if (!std::isfinite(n.value.data[0])) break;
      const Vec& p = val(n.inputs[0]).data;
      const Vec& q = val(n.inputs[1]).data;
      Mat& dp = grd(n.inputs[0]);
      Mat& dq = grd(n.inputs[1]);
      const double gs = g.data[0];
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] <= 0.0) continue;
        dp.data[k] += gs * (std::log(p[k] / q[k]) + 1.0);
        dq.data[k] += gs * (-p[k] / q[k]);
      }
      break;
    }
    case Op::stack_rows: {
      const std::size_t d = val(n.inputs[0]).size();
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        Mat& dx = grd(n.inputs[r]);
        for (std::size_t j = 0; j < d; ++j) {
          dx.data[j] += g.data[r * d + j];
        }
      }
      break;
    }
  }
}

void Tape::forward() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) compute(i);
}

void Tape::backward(Id output) {
  const Mat& out = nodes_[output.idx].value;
  if (out.rows != 1 || out.cols != 1) {
    throw std::invalid_argument("tape backward: output is not scalar");
  }
  for (Node& n : nodes_) {
    std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
  }
  nodes_[output.idx].grad.data[0] = 1.0;
  for (std::size_t i = output.idx + 1; i-- > 0;) propagate(i);
  // The gradient of a constant is zero by contract, even when upstream terms
  // accumulated into its buffer.
  for (Node& n : nodes_) {
    if (n.op == Op::constant) {
      std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }
  }
}

void Tape::set_leaf(Id id, const Mat& value) {
  Node& n = nodes_[id.idx];
  if (n.op != Op::leaf) {
    throw std::invalid_argument("set_leaf: node is not a leaf");
  }
  if (n.value.rows != value.rows || n.value.cols != value.cols) {
    throw std::invalid_argument("set_leaf: shape mismatch");
  }
  n.value = value;
}

std::vector<Id> Tape::leaves() const {
  std::vector<Id> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::leaf) out.push_back(Id{i});
  }
  return out;
}

}  // namespace overlay::num
