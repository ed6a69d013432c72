#include "tokrl/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tokrl/errors.hpp"

namespace tokrl {

int Tape::push(Node&& node) {
  node.grad.assign(node.val.size(), 0.0);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(std::vector<double> v) {
  Node n;
  n.op = Op::constant;
  n.val = std::move(v);
  return push(std::move(n));
}

int Tape::embed(const Tensor& table, Tensor* gtable, int row) {
  require(row >= 0 && row < table.rows, "embedding row out of range");
  Node n;
  n.op = Op::embed;
  n.val.assign(table.row(row), table.row(row) + table.cols);
  n.w1 = &table;
  n.g1 = gtable;
  n.index = row;
  return push(std::move(n));
}

int Tape::rnn_cell(const Tensor& w1, Tensor* g1, int x1, const Tensor* w2, Tensor* g2, int x2,
                   const Tensor& b, Tensor* gb) {
  Node n;
  n.op = Op::rnn_cell;
  n.val.assign(b.v.begin(), b.v.end());
  matvec_acc(w1, nodes_[x1].val.data(), n.val.data());
  if (w2 != nullptr) matvec_acc(*w2, nodes_[x2].val.data(), n.val.data());
  for (double& x : n.val) x = std::tanh(x);
  n.a = x1;
  n.b = w2 != nullptr ? x2 : -1;
  n.w1 = &w1;
  n.g1 = g1;
  n.w2 = w2;
  n.g2 = g2;
  n.bias = &b;
  n.gbias = gb;
  return push(std::move(n));
}

int Tape::affine(const Tensor& w, Tensor* gw, int x, const Tensor& b, Tensor* gb) {
  Node n;
  n.op = Op::affine;
  n.val.assign(b.v.begin(), b.v.end());
  matvec_acc(w, nodes_[x].val.data(), n.val.data());
  n.a = x;
  n.w1 = &w;
  n.g1 = gw;
  n.bias = &b;
  n.gbias = gb;
  return push(std::move(n));
}

int Tape::dot_scalar(const Tensor& w, Tensor* gw, int x, const Tensor& b, Tensor* gb) {
  Node n;
  n.op = Op::dot_scalar;
  double s = b.v[0];
  const auto& xv = nodes_[x].val;
  for (int i = 0; i < w.rows; ++i) s += w.v[i] * xv[i];
  n.val = {s};
  n.a = x;
  n.w1 = &w;
  n.g1 = gw;
  n.bias = &b;
  n.gbias = gb;
  return push(std::move(n));
}

int Tape::concat2(int x, int y) {
  Node n;
  n.op = Op::concat2;
  n.val = nodes_[x].val;
  n.val.insert(n.val.end(), nodes_[y].val.begin(), nodes_[y].val.end());
  n.a = x;
  n.b = y;
  return push(std::move(n));
}

int Tape::attention(const Tensor& wq, Tensor* gwq, const Tensor& v, Tensor* gv, int q,
                    int first_key, int first_enc, int n_states) {
  require(n_states > 0, "attention needs at least one encoder state");
  int h = wq.rows;
  Node n;
  n.op = Op::attention;
  n.a = q;
  n.b = first_key;
  n.first = first_enc;
  n.n = n_states;
  n.w1 = &wq;
  n.g1 = gwq;
  n.w2 = &v;
  n.g2 = gv;

  std::vector<double> wq_q(h, 0.0);
  matvec_acc(wq, nodes_[q].val.data(), wq_q.data());
  // aux = [tanh activations a_i (n*h), alpha (n)]
  n.aux.assign(static_cast<std::size_t>(n_states) * h + n_states, 0.0);
  std::vector<double> scores(n_states);
  for (int i = 0; i < n_states; ++i) {
    const auto& key = nodes_[first_key + i].val;
    double* ai = n.aux.data() + static_cast<std::size_t>(i) * h;
    double z = 0.0;
    for (int j = 0; j < h; ++j) {
      ai[j] = std::tanh(wq_q[j] + key[j]);
      z += v.v[j] * ai[j];
    }
    scores[i] = z;
  }
  double zmax = *std::max_element(scores.begin(), scores.end());
  double zsum = 0.0;
  double* alpha = n.aux.data() + static_cast<std::size_t>(n_states) * h;
  for (int i = 0; i < n_states; ++i) {
    alpha[i] = std::exp(scores[i] - zmax);
    zsum += alpha[i];
  }
  n.val.assign(h, 0.0);
  for (int i = 0; i < n_states; ++i) {
    alpha[i] /= zsum;
    const auto& enc = nodes_[first_enc + i].val;
    for (int j = 0; j < h; ++j) n.val[j] += alpha[i] * enc[j];
  }
  return push(std::move(n));
}

int Tape::log_softmax_pick(int logits, int index) {
  const auto& z = nodes_[logits].val;
  require(index >= 0 && index < static_cast<int>(z.size()), "picked index out of range");
  Node n;
  n.op = Op::log_softmax_pick;
  n.a = logits;
  n.index = index;
  double zmax = *std::max_element(z.begin(), z.end());
  double zsum = 0.0;
  n.aux.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    n.aux[i] = std::exp(z[i] - zmax);
    zsum += n.aux[i];
  }
  for (double& p : n.aux) p /= zsum;
  n.val = {z[index] - zmax - std::log(zsum)};
  return push(std::move(n));
}

int Tape::ppo_token(int logp, double old_logp, double advantage, double clip_eps) {
  Node n;
  n.op = Op::ppo_token;
  n.a = logp;
  n.c0 = old_logp;
  n.c1 = advantage;
  n.c2 = clip_eps;
  double rho = std::exp(nodes_[logp].val[0] - old_logp);
  double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
  double unclipped_term = rho * advantage;
  double clipped_term = clipped * advantage;
  n.val = {std::min(unclipped_term, clipped_term)};
  // d(val)/d(logp): rho * adv when the unclipped branch is active, else 0.
  n.aux = {unclipped_term <= clipped_term ? rho * advantage : 0.0};
  return push(std::move(n));
}

int Tape::mse_half(int x, double target) {
  Node n;
  n.op = Op::mse_half;
  n.a = x;
  n.c0 = target;
  double d = nodes_[x].val[0] - target;
  n.val = {0.5 * d * d};
  return push(std::move(n));
}

int Tape::weighted_sum(std::vector<int> ids, std::vector<double> coeffs) {
  require(ids.size() == coeffs.size(), "weighted_sum: ids and coeffs disagree");
  Node n;
  n.op = Op::weighted_sum;
  double s = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) s += coeffs[i] * nodes_[ids[i]].val[0];
  n.val = {s};
  n.ids = std::move(ids);
  n.coeffs = std::move(coeffs);
  return push(std::move(n));
}

void Tape::backward(int id) {
  require(id >= 0 && id < static_cast<int>(nodes_.size()) && nodes_[id].val.size() == 1,
          "backward seed must be a scalar node");
  nodes_[id].grad[0] = 1.0;
  for (int cur = id; cur >= 0; --cur) {
    Node& node = nodes_[cur];
    bool live = false;
    for (double g : node.grad)
      if (g != 0.0) { live = true; break; }
    if (!live) continue;
    const double* g = node.grad.data();
    switch (node.op) {
      case Op::constant:
        break;
      case Op::embed: {
        if (node.g1 != nullptr) {
          double* row = node.g1->row(node.index);
          for (std::size_t i = 0; i < node.val.size(); ++i) row[i] += g[i];
        }
        break;
      }
      case Op::rnn_cell: {
        std::vector<double> gpre(node.val.size());
        for (std::size_t i = 0; i < node.val.size(); ++i)
          gpre[i] = g[i] * (1.0 - node.val[i] * node.val[i]);
        if (node.g1 != nullptr) outer_acc(*node.g1, gpre.data(), nodes_[node.a].val.data());
        matvec_t_acc(*node.w1, gpre.data(), nodes_[node.a].grad.data());
        if (node.b >= 0) {
          if (node.g2 != nullptr) outer_acc(*node.g2, gpre.data(), nodes_[node.b].val.data());
          matvec_t_acc(*node.w2, gpre.data(), nodes_[node.b].grad.data());
        }
        if (node.gbias != nullptr)
          for (std::size_t i = 0; i < gpre.size(); ++i) node.gbias->v[i] += gpre[i];
        break;
      }
      case Op::affine: {
        if (node.g1 != nullptr) outer_acc(*node.g1, g, nodes_[node.a].val.data());
        matvec_t_acc(*node.w1, g, nodes_[node.a].grad.data());
        if (node.gbias != nullptr)
          for (std::size_t i = 0; i < node.val.size(); ++i) node.gbias->v[i] += g[i];
        break;
      }
      case Op::dot_scalar: {
        double gs = g[0];
        auto& xg = nodes_[node.a].grad;
        const auto& xv = nodes_[node.a].val;
        for (int i = 0; i < node.w1->rows; ++i) {
          if (node.g1 != nullptr) node.g1->v[i] += gs * xv[i];
          xg[i] += gs * node.w1->v[i];
        }
        if (node.gbias != nullptr) node.gbias->v[0] += gs;
        break;
      }
      case Op::concat2: {
        auto& xg = nodes_[node.a].grad;
        auto& yg = nodes_[node.b].grad;
        for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g[i];
        for (std::size_t i = 0; i < yg.size(); ++i) yg[i] += g[xg.size() + i];
        break;
      }
      case Op::attention: {
        int h = node.w1->rows;
        const double* alpha = node.aux.data() + static_cast<std::size_t>(node.n) * h;
        // dL/dalpha_i and the softmax backward.
        std::vector<double> dalpha(node.n), dz(node.n);
        double s = 0.0;
        for (int i = 0; i < node.n; ++i) {
          const auto& enc = nodes_[node.first + i].val;
          double d = 0.0;
          for (int j = 0; j < h; ++j) d += g[j] * enc[j];
          dalpha[i] = d;
          s += alpha[i] * d;
        }
        std::vector<double> du_sum(h, 0.0);
        for (int i = 0; i < node.n; ++i) {
          dz[i] = alpha[i] * (dalpha[i] - s);
          const double* ai = node.aux.data() + static_cast<std::size_t>(i) * h;
          auto& key_grad = nodes_[node.b + i].grad;
          auto& enc_grad = nodes_[node.first + i].grad;
          const auto& enc = nodes_[node.first + i].val;
          (void)enc;
          for (int j = 0; j < h; ++j) {
            if (node.g2 != nullptr) node.g2->v[j] += dz[i] * ai[j];
            double du = dz[i] * node.w2->v[j] * (1.0 - ai[j] * ai[j]);
            key_grad[j] += du;
            du_sum[j] += du;
            enc_grad[j] += alpha[i] * g[j];
          }
        }
        // Wq q is shared by every score, so its backward folds into one outer.
        if (node.g1 != nullptr) outer_acc(*node.g1, du_sum.data(), nodes_[node.a].val.data());
        matvec_t_acc(*node.w1, du_sum.data(), nodes_[node.a].grad.data());
        break;
      }
      case Op::log_softmax_pick: {
        double gs = g[0];
        auto& zg = nodes_[node.a].grad;
        for (std::size_t i = 0; i < zg.size(); ++i)
          zg[i] += gs * ((static_cast<int>(i) == node.index ? 1.0 : 0.0) - node.aux[i]);
        break;
      }
      case Op::ppo_token:
        nodes_[node.a].grad[0] += g[0] * node.aux[0];
        break;
      case Op::mse_half:
        nodes_[node.a].grad[0] += g[0] * (nodes_[node.a].val[0] - node.c0);
        break;
      case Op::weighted_sum:
        for (std::size_t i = 0; i < node.ids.size(); ++i)
          nodes_[node.ids[i]].grad[0] += g[0] * node.coeffs[i];
        break;
    }
  }
}

}  // namespace tokrl
