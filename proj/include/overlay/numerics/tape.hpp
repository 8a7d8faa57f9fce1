#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "overlay/numerics/mat.hpp"

namespace overlay::num {

// Node handle; valid only for the tape that produced it.
struct Id {
  std::size_t idx = 0;
};

enum class Op : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  mul,
  sigmoid,
  silu,
  softmax,
  softmax_of,
  cosine,
  mean_of,
  cross_entropy,
  kl_div,
  stack_rows,
};

// Reverse-mode tape over a fixed op set. Values are computed eagerly as the
// graph is recorded; forward() re-evaluates the recorded graph against the
// current leaf values (the structure, including any data-dependent choices
// made by the caller while recording, stays frozen).
class Tape {
 public:
  Id leaf(Mat value, std::string name);
  Id constant(Mat value);
  Id scalar(double v);  // 1x1 constant

  // c = (ta ? a^T : a) . (tb ? b^T : b); transpose flags avoid a transpose op.
  Id matmul(Id a, Id b, bool trans_a = false, bool trans_b = false);

  Id add(Id a, Id b);  // same shape
  Id mul(Id a, Id b);  // same shape, or either operand 1x1 (scalar broadcast)
  Id sigmoid(Id a);
  Id silu(Id a);

  // Vector-shaped input. With a mask, entries where mask == 0 get weight
  // exactly 0 and the normalization runs over unmasked entries only.
  Id softmax(Id a);
  Id softmax_masked(Id a, std::vector<std::uint8_t> mask);

  // Softmax over a list of 1x1 scores; result is n x 1.
  Id softmax_of(const std::vector<Id>& scores);

  // 1x1; zero input vector evaluates to 1 with zero gradient (degenerate
  // inputs route as fully consistent downstream).
  Id cosine(Id u, Id v);

  // Elementwise mean of same-shape nodes.
  Id mean_of(const std::vector<Id>& xs);

  // -ln softmax(logits)[target]; logits vector-shaped.
  Id cross_entropy(Id logits, std::size_t target);

  // sum p ln(p/q), inputs vector-shaped; support violations evaluate to +inf
  // with zero gradient.
  Id kl_div(Id p, Id q);

  // Data movement only: vectors of length d stacked into n x d.
  Id stack_rows(const std::vector<Id>& rows);

  // Re-evaluates every recorded node from the current leaf values.
  void forward();

  // Gradient of a scalar output with respect to every node; accumulates
  // nothing across calls (grads reset each time).
  void backward(Id output);

  [[nodiscard]] const Mat& value(Id id) const { return nodes_[id.idx].value; }
  [[nodiscard]] const Mat& grad(Id id) const { return nodes_[id.idx].grad; }
  [[nodiscard]] const std::string& name(Id id) const {
    return nodes_[id.idx].name;
  }
  void set_leaf(Id id, const Mat& value);

  [[nodiscard]] std::vector<Id> leaves() const;
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Mat value;
    Mat grad;
    bool trans_a = false;
    bool trans_b = false;
    std::vector<std::uint8_t> mask;  // softmax_masked
    std::size_t target = 0;          // cross_entropy
    std::string name;                // leaves
  };

  std::vector<Node> nodes_;

  Id push(Node n);
  void compute(std::size_t i);
  void propagate(std::size_t i);
  const Mat& val(std::size_t i) const { return nodes_[i].value; }
  Mat& grd(std::size_t i) { return nodes_[i].grad; }
};

}  // namespace overlay::num
