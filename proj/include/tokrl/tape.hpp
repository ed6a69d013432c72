#pragma once

#include <vector>

#include "tokrl/tensor.hpp"

namespace tokrl {

// Reverse-mode tape over activation vectors.  Parameters are not nodes: each
// op binds the parameter tensors it reads plus optional gradient sinks, and
// backward() accumulates into those sinks directly.  Node ids increase in
// creation order, so a reverse sweep is a valid topological backward pass.
class Tape {
 public:
  // Leaf with no backward rule (e.g. the zero initial hidden state).
  int constant(std::vector<double> v);

  // Row `row` of `table`; backward adds into the same row of `gtable`.
  int embed(const Tensor& table, Tensor* gtable, int row);

  // tanh(W1 x1 + W2 x2 + b); pass w2 = nullptr / x2 = -1 for a single-input cell.
  int rnn_cell(const Tensor& w1, Tensor* g1, int x1, const Tensor* w2, Tensor* g2, int x2,
               const Tensor& b, Tensor* gb);

  // W x + b.
  int affine(const Tensor& w, Tensor* gw, int x, const Tensor& b, Tensor* gb);

  // Scalar w . x + b[0]; w is a column vector.
  int dot_scalar(const Tensor& w, Tensor* gw, int x, const Tensor& b, Tensor* gb);

  int concat2(int x, int y);

  // Additive attention with per-episode precomputed keys.  Scores are
  // v . tanh(Wq q + k_i) over nodes k_i = first_key..first_key+n-1; the value
  // is the softmax-weighted sum of encoder nodes first_enc..first_enc+n-1.
  int attention(const Tensor& wq, Tensor* gwq, const Tensor& v, Tensor* gv, int q, int first_key,
                int first_enc, int n);

  // Scalar log softmax(logits)[index].
  int log_softmax_pick(int logits, int index);

  // Clipped importance-ratio surrogate for one token, as a value to maximize:
  // min(rho * adv, clamp(rho, 1-eps, 1+eps) * adv) with rho = exp(logp - old).
  int ppo_token(int logp, double old_logp, double advantage, double clip_eps);

  // 0.5 * (x - target)^2 on a scalar node.
  int mse_half(int x, double target);

  // Scalar sum of coeffs[i] * value(ids[i]) over scalar nodes.
  int weighted_sum(std::vector<int> ids, std::vector<double> coeffs);

  double value(int id) const { return nodes_[id].val[0]; }
  const std::vector<double>& vec(int id) const { return nodes_[id].val; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output)/d(output) = 1 on scalar node `id`, then sweeps backward
  // accumulating into node grads and the bound parameter gradient sinks.
  void backward(int id);

 private:
  enum class Op {
    constant,
    embed,
    rnn_cell,
    affine,
    dot_scalar,
    concat2,
    attention,
    log_softmax_pick,
    ppo_token,
    mse_half,
    weighted_sum,
  };

  struct Node {
    Op op;
    std::vector<double> val;
    std::vector<double> grad;
    int a = -1;
    int b = -1;
    int first = -1;
    int n = 0;
    int index = -1;
    const Tensor* w1 = nullptr;
    Tensor* g1 = nullptr;
    const Tensor* w2 = nullptr;
    Tensor* g2 = nullptr;
    const Tensor* bias = nullptr;
    Tensor* gbias = nullptr;
    std::vector<double> aux;
    std::vector<int> ids;
    std::vector<double> coeffs;
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
  };

  int push(Node&& node);
  std::vector<Node> nodes_;
};

}  // namespace tokrl
