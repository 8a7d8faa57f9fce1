#pragma once

#include <cstddef>
#include <optional>

#include "overlay/numerics/mat.hpp"

namespace overlay::num {

// Throws std::invalid_argument on any precondition violation.

Mat matmul(const Mat& a, const Mat& b);

// w (out x in) applied to x (in), returns length-out vector.
Vec matvec(const Mat& w, const Vec& x);

double dot(const Vec& u, const Vec& v);
double norm(const Vec& v);

double sigmoid(double x);
double silu(double x);
Vec silu(const Vec& v);

// Entries proportional to exp(v_i - max v); sums to 1.
Vec softmax(const Vec& v);

// u.v / (|u||v|), clamped to [-1,1] against rounding.
// nullopt when either vector is zero: the caller decides the fallback.
std::optional<double> cosine(const Vec& u, const Vec& v);

struct AttnResult {
  Vec weights;  // simplex over key rows
  Vec output;   // weighted sum of value rows
};

// Single-head scaled dot product: weights = softmax(keys.query / sqrt(d)).
AttnResult cross_attention(const Vec& query, const Mat& keys,
                           const Mat& values);

// w_down . ( silu(w_gate.x) * (w_up.x) ), elementwise product in the middle.
Vec swiglu(const Vec& x, const Mat& w_gate, const Mat& w_up,
           const Mat& w_down);

// Sum p_i ln(p_i/q_i) with 0 ln(0/q) = 0. Support violation (q_i = 0 where
// p_i > 0) returns +infinity rather than throwing.
double kl_divergence(const Vec& p, const Vec& q);

// Sample correlation; nullopt when either variance is zero (undefined, not 0).
std::optional<double> pearson(const Vec& x, const Vec& y);

// r sqrt((n-2)/(1-r^2)); returns +-infinity at |r| = 1. Requires n >= 3.
double t_statistic(double r, std::size_t n);

}  // namespace overlay::num
