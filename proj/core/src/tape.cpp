#include "vaproto/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vaproto {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw UsageError(msg);
}

}  // namespace

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  grads_valid_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw UsageError("tape: node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

NodeId Tape::leaf(Vector value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::leaf_matrix(const Matrix& m) {
  Node n;
  n.op = Op::Leaf;
  n.value = m.data;
  n.rows = m.rows;
  n.cols = m.cols;
  return push(std::move(n));
}

NodeId Tape::matvec(NodeId w, std::size_t rows, std::size_t cols, NodeId x) {
  const auto& wv = node(w).value;
  const auto& xv = node(x).value;
  require(wv.size() == rows * cols, "tape matvec: weight size mismatch");
  require(xv.size() == cols, "tape matvec: input dimension mismatch");
  Node n;
  n.op = Op::MatVec;
  n.in = {w, x};
  n.rows = rows;
  n.cols = cols;
  n.value.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = wv.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xv[c];
    n.value[r] = acc;
  }
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.size() == bv.size(), "tape add: dimension mismatch");
  Node n;
  n.op = Op::Add;
  n.in = {a, b};
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] + bv[i];
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  const auto& av = node(a).value;
  Node n;
  n.op = Op::Scale;
  n.in = {a};
  n.c = c;
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = c * av[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.size() == bv.size(), "tape mul: dimension mismatch");
  Node n;
  n.op = Op::Mul;
  n.in = {a, b};
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] * bv[i];
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  const auto& av = node(a).value;
  Node n;
  n.op = Op::Relu;
  n.in = {a};
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    n.value[i] = av[i] > 0.0 ? av[i] : 0.0;
  }
  return push(std::move(n));
}

NodeId Tape::dropout(NodeId a, Vector keep_mask) {
  const auto& av = node(a).value;
  require(av.size() == keep_mask.size(), "tape dropout: mask size mismatch");
  Node n;
  n.op = Op::Dropout;
  n.in = {a};
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] * keep_mask[i];
  n.aux = std::move(keep_mask);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  const auto& av = node(a).value;
  double acc = 0.0;
  for (double x : av) acc += x;
  Node n;
  n.op = Op::Sum;
  n.in = {a};
  n.value = {acc};
  return push(std::move(n));
}

NodeId Tape::mean_of(const std::vector<NodeId>& xs) {
  require(!xs.empty(), "tape mean_of: no inputs");
  const std::size_t dim = node(xs[0]).value.size();
  Node n;
  n.op = Op::Mean;
  n.in = xs;
  n.value.assign(dim, 0.0);
  for (NodeId id : xs) {
    const auto& v = node(id).value;
    require(v.size() == dim, "tape mean_of: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) n.value[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& x : n.value) x *= inv;
  return push(std::move(n));
}

NodeId Tape::variance_of(const std::vector<NodeId>& xs) {
  require(!xs.empty(), "tape variance_of: no inputs");
  const std::size_t dim = node(xs[0]).value.size();
  const std::size_t m = xs.size();
  Node n;
  n.op = Op::Variance;
  n.in = xs;
  n.value.assign(dim, 0.0);
  n.aux.assign(dim, 0.0);  // mean, saved for backward
  for (NodeId id : xs) {
    const auto& v = node(id).value;
    require(v.size() == dim, "tape variance_of: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) n.aux[i] += v[i];
  }
  for (double& x : n.aux) x /= static_cast<double>(m);
  if (m >= 2) {
    for (NodeId id : xs) {
      const auto& v = node(id).value;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = v[i] - n.aux[i];
        n.value[i] += d * d;
      }
    }
    const double inv = 1.0 / static_cast<double>(m - 1);
    for (double& x : n.value) x *= inv;
  }
  return push(std::move(n));
}

NodeId Tape::isotropize(NodeId var) {
  const auto& v = node(var).value;
  require(!v.empty(), "tape isotropize: empty input");
  double avg = 0.0;
  for (double x : v) avg += x;
  avg /= static_cast<double>(v.size());
  Node n;
  n.op = Op::Isotropize;
  n.in = {var};
  n.value.assign(v.size(), avg);
  return push(std::move(n));
}

NodeId Tape::l2_norm(NodeId a) {
  const auto& av = node(a).value;
  double acc = 0.0;
  for (double x : av) acc += x * x;
  Node n;
  n.op = Op::L2Norm;
  n.in = {a};
  n.value = {std::sqrt(acc)};
  return push(std::move(n));
}

NodeId Tape::pack(const std::vector<NodeId>& scalars) {
  require(!scalars.empty(), "tape pack: no inputs");
  Node n;
  n.op = Op::Pack;
  n.in = scalars;
  n.value.resize(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const auto& v = node(scalars[i]).value;
    require(v.size() == 1, "tape pack: inputs must be scalar");
    n.value[i] = v[0];
  }
  return push(std::move(n));
}

NodeId Tape::gauss_point_logit(NodeId point, NodeId mean, NodeId var) {
  const auto& p = node(point).value;
  const auto& m = node(mean).value;
  const auto& v = node(var).value;
  require(p.size() == m.size() && p.size() == v.size(),
          "tape gauss_point_logit: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - m[i];
    d2 += d * d;
  }
  double tr = 0.0;
  for (double x : v) tr += x;
  Node n;
  n.op = Op::GaussPointLogit;
  n.in = {point, mean, var};
  n.value = {-(d2 + tr)};
  return push(std::move(n));
}

NodeId Tape::softmax_xent(NodeId logits, std::size_t target) {
  const auto& lv = node(logits).value;
  require(!lv.empty(), "tape softmax_xent: empty logits");
  require(target < lv.size(), "tape softmax_xent: target out of range");
  const double hi = *std::max_element(lv.begin(), lv.end());
  Vector probs(lv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    probs[i] = std::exp(lv[i] - hi);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  Node n;
  n.op = Op::SoftmaxXent;
  n.in = {logits};
  n.target = target;
  n.value = {-std::log(std::max(probs[target], kLogClamp))};
  n.aux = std::move(probs);
  return push(std::move(n));
}

const Vector& Tape::value(NodeId id) const { return node(id).value; }

const Vector& Tape::grad(NodeId id) const {
  if (!grads_valid_) throw UsageError("tape: grad read before backward");
  node(id);  // range check
  return grads_[static_cast<std::size_t>(id)];
}

void Tape::backward(NodeId output) {
  const Node& out = node(output);
  if (out.value.size() != 1) {
    throw UsageError("tape backward: output must be scalar");
  }
  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].assign(nodes_[i].value.size(), 0.0);
  }
  grads_[static_cast<std::size_t>(output)][0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& n = nodes_[idx];
    const Vector& g = grads_[idx];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatVec: {
        Vector& gw = grads_[static_cast<std::size_t>(n.in[0])];
        Vector& gx = grads_[static_cast<std::size_t>(n.in[1])];
        const Vector& w = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const Vector& x = nodes_[static_cast<std::size_t>(n.in[1])].value;
        for (std::size_t r = 0; r < n.rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* gwr = gw.data() + r * n.cols;
          const double* wr = w.data() + r * n.cols;
          for (std::size_t c = 0; c < n.cols; ++c) {
            gwr[c] += gr * x[c];
            gx[c] += gr * wr[c];
          }
        }
        break;
      }
      case Op::Add: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        Vector& gb = grads_[static_cast<std::size_t>(n.in[1])];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Scale: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c * g[i];
        break;
      }
      case Op::Mul: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        Vector& gb = grads_[static_cast<std::size_t>(n.in[1])];
        const Vector& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const Vector& b = nodes_[static_cast<std::size_t>(n.in[1])].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::Relu: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        const Vector& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > 0.0) ga[i] += g[i];
        }
        break;
      }
      case Op::Dropout: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[i];
        break;
      }
      case Op::Sum: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        for (double& x : ga) x += g[0];
        break;
      }
      case Op::Mean: {
        const double inv = 1.0 / static_cast<double>(n.in.size());
        for (NodeId id : n.in) {
          Vector& gi = grads_[static_cast<std::size_t>(id)];
          for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * inv;
        }
        break;
      }
      case Op::Variance: {
        const std::size_t m = n.in.size();
        if (m < 2) break;
        const double scale = 2.0 / static_cast<double>(m - 1);
        for (NodeId id : n.in) {
          Vector& gi = grads_[static_cast<std::size_t>(id)];
          const Vector& xi = nodes_[static_cast<std::size_t>(id)].value;
          for (std::size_t i = 0; i < g.size(); ++i) {
            gi[i] += g[i] * scale * (xi[i] - n.aux[i]);
          }
        }
        break;
      }
      case Op::Isotropize: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        double total = 0.0;
        for (double x : g) total += x;
        const double per = total / static_cast<double>(g.size());
        for (double& x : ga) x += per;
        break;
      }
      case Op::L2Norm: {
        Vector& ga = grads_[static_cast<std::size_t>(n.in[0])];
        const Vector& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const double norm = n.value[0];
        if (norm > 0.0) {
          for (std::size_t i = 0; i < a.size(); ++i) {
            ga[i] += g[0] * a[i] / norm;
          }
        }
        break;
      }
      case Op::Pack: {
        for (std::size_t i = 0; i < n.in.size(); ++i) {
          grads_[static_cast<std::size_t>(n.in[i])][0] += g[i];
        }
        break;
      }
      case Op::GaussPointLogit: {
        Vector& gp = grads_[static_cast<std::size_t>(n.in[0])];
        Vector& gm = grads_[static_cast<std::size_t>(n.in[1])];
        Vector& gv = grads_[static_cast<std::size_t>(n.in[2])];
        const Vector& p = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const Vector& m = nodes_[static_cast<std::size_t>(n.in[1])].value;
        const double g0 = g[0];
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = p[i] - m[i];
          gp[i] += g0 * -2.0 * d;
          gm[i] += g0 * 2.0 * d;
          gv[i] -= g0;
        }
        break;
      }
      case Op::SoftmaxXent: {
        // The forward value is -log(max(p, kLogClamp)); inside the clamp
        // the objective is locally constant, so the gradient is zero.
        if (n.aux[n.target] <= kLogClamp) break;
        Vector& gl = grads_[static_cast<std::size_t>(n.in[0])];
        const double g0 = g[0];
        for (std::size_t i = 0; i < n.aux.size(); ++i) {
          const double indicator = i == n.target ? 1.0 : 0.0;
          gl[i] += g0 * (n.aux[i] - indicator);
        }
        break;
      }
    }
  }
  grads_valid_ = true;
}

}  // namespace vaproto
