#include "hiker/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hiker {

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor2 v, bool needs_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = needs_grad;
  n.val = std::move(v);
  return push(std::move(n));
}

static void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.val = hiker::add(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::add_rowvec(int a, int bias) {
  const Tensor2& x = nodes_[a].val;
  const Tensor2& bv = nodes_[bias].val;
  require(bv.rows == 1 && bv.cols == x.cols, "add_rowvec: bias must be [1 x cols]");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = a;
  n.b = bias;
  n.needs_grad = nodes_[a].needs_grad || nodes_[bias].needs_grad;
  n.val = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) n.val.at(i, j) += bv.at(0, j);
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.scalar = s;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = hiker::scale(nodes_[a].val, s);
  return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
  Node n;
  n.op = Op::kHadamard;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.val = hiker::hadamard(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.val = hiker::matmul(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
  Node n;
  n.op = Op::kMatMulNT;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.val = hiker::matmul_nt(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::matmul_tn(int a, int b) {
  Node n;
  n.op = Op::kMatMulTN;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.val = hiker::matmul_tn(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::transpose(int a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = hiker::transpose(nodes_[a].val);
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = nodes_[a].val;
  for (double& v : n.val.data) v = std::max(0.0, v);
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = nodes_[a].val;
  for (double& v : n.val.data) v = hiker::sigmoid(v);
  return push(std::move(n));
}

int Tape::tanh(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = nodes_[a].val;
  for (double& v : n.val.data) v = std::tanh(v);
  return push(std::move(n));
}

static void softmax_span(const double* in, double* out, const int* cols, int count) {
  double mx = in[cols[0]];
  for (int k = 1; k < count; ++k) mx = std::max(mx, in[cols[k]]);
  double sum = 0.0;
  for (int k = 0; k < count; ++k) {
    out[cols[k]] = std::exp(in[cols[k]] - mx);
    sum += out[cols[k]];
  }
  for (int k = 0; k < count; ++k) out[cols[k]] /= sum;
}

int Tape::row_softmax(int a) {
  const Tensor2& x = nodes_[a].val;
  require(x.cols > 0, "row_softmax: zero columns");
  Node n;
  n.op = Op::kRowSoftmax;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = Tensor2(x.rows, x.cols);
  std::vector<int> all(x.cols);
  for (int j = 0; j < x.cols; ++j) all[j] = j;
  for (int i = 0; i < x.rows; ++i)
    softmax_span(&x.data[static_cast<size_t>(i) * x.cols],
                 &n.val.data[static_cast<size_t>(i) * x.cols], all.data(), x.cols);
  return push(std::move(n));
}

int Tape::grouped_row_softmax(int a, std::vector<int> group_of_col) {
  const Tensor2& x = nodes_[a].val;
  require(static_cast<int>(group_of_col.size()) == x.cols,
          "grouped_row_softmax: group map length != cols");
  int ngroups = 0;
  for (int g : group_of_col) {
    require(g >= 0, "grouped_row_softmax: negative group id");
    ngroups = std::max(ngroups, g + 1);
  }
  std::vector<std::vector<int>> members(ngroups);
  for (int j = 0; j < x.cols; ++j) members[group_of_col[j]].push_back(j);
  for (const auto& m : members)
    require(!m.empty(), "grouped_row_softmax: empty column group");

  Node n;
  n.op = Op::kGroupedRowSoftmax;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.idx = std::move(group_of_col);
  n.val = Tensor2(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (const auto& m : members)
      softmax_span(&x.data[static_cast<size_t>(i) * x.cols],
                   &n.val.data[static_cast<size_t>(i) * x.cols], m.data(),
                   static_cast<int>(m.size()));
  return push(std::move(n));
}

int Tape::gather_rows(int a, std::vector<int> idx) {
  const Tensor2& x = nodes_[a].val;
  for (int i : idx) require(i >= 0 && i < x.rows, "gather_rows: index out of range");
  Node n;
  n.op = Op::kGatherRows;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = Tensor2(static_cast<int>(idx.size()), x.cols);
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < x.cols; ++j) n.val.at(static_cast<int>(i), j) = x.at(idx[i], j);
  n.idx = std::move(idx);
  return push(std::move(n));
}

int Tape::gather_cols(int a, std::vector<int> idx) {
  const Tensor2& x = nodes_[a].val;
  for (int j : idx) require(j >= 0 && j < x.cols, "gather_cols: index out of range");
  Node n;
  n.op = Op::kGatherCols;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = Tensor2(x.rows, static_cast<int>(idx.size()));
  for (int i = 0; i < x.rows; ++i)
    for (size_t j = 0; j < idx.size(); ++j) n.val.at(i, static_cast<int>(j)) = x.at(i, idx[j]);
  n.idx = std::move(idx);
  return push(std::move(n));
}

int Tape::clamp_min(int a, double c) {
  Node n;
  n.op = Op::kClampMin;
  n.a = a;
  n.scalar = c;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = nodes_[a].val;
  for (double& v : n.val.data) v = std::max(c, v);
  return push(std::move(n));
}

int Tape::log(int a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.val = nodes_[a].val;
  for (double& v : n.val.data) v = std::log(v);
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  double s = 0.0;
  for (double v : nodes_[a].val.data) s += v;
  n.val = Tensor2(1, 1, s);
  return push(std::move(n));
}

int Tape::linear(int x, int w, int b) { return add_rowvec(matmul_nt(x, w), b); }

int Tape::mlp3(int x, const std::array<int, 6>& wb) {
  int h = relu(linear(x, wb[0], wb[1]));
  h = relu(linear(h, wb[2], wb[3]));
  return linear(h, wb[4], wb[5]);
}

int Tape::gru(int h, int m, const std::array<int, 9>& p) {
  const int wz = p[0], uz = p[1], bz = p[2];
  const int wr = p[3], ur = p[4], br = p[5];
  const int wc = p[6], uc = p[7], bc = p[8];
  int z = sigmoid(add_rowvec(add(matmul_nt(m, wz), matmul_nt(h, uz)), bz));
  int r = sigmoid(add_rowvec(add(matmul_nt(m, wr), matmul_nt(h, ur)), br));
  int cand = tanh(add_rowvec(add(matmul_nt(m, wc), matmul_nt(hadamard(r, h), uc)), bc));
  // h' = h + z .* (cand - h)
  int delta = add(cand, scale(h, -1.0));
  return add(h, hadamard(z, delta));
}

const Tensor2& Tape::grad(int id) const {
  const Node& n = nodes_[id];
  if (!n.needs_grad) throw std::logic_error("Tape::grad on a node without gradient");
  return n.grad;
}

void Tape::accumulate(int target, const Tensor2& g) {
  Node& t = nodes_[target];
  if (!t.needs_grad) return;
  if (t.grad.rows == 0) t.grad = Tensor2(t.val.rows, t.val.cols);
  for (size_t i = 0; i < g.data.size(); ++i) t.grad.data[i] += g.data[i];
}

void Tape::backward(int loss) {
  require(loss >= 0 && loss < static_cast<int>(nodes_.size()), "backward: bad node id");
  require(nodes_[loss].val.rows == 1 && nodes_[loss].val.cols == 1,
          "backward: loss must be scalar [1x1]");
  // Reset and seed.
  for (Node& n : nodes_)
    if (n.needs_grad) n.grad = Tensor2(n.val.rows, n.val.cols);
  if (!nodes_[loss].needs_grad) return;  // constant loss: all gradients zero
  nodes_[loss].grad.at(0, 0) = 1.0;

  for (int id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.op == Op::kLeaf) continue;
    const Tensor2& g = n.grad;
    bool any = false;
    for (double v : g.data)
      if (v != 0.0) {
        any = true;
        break;
      }
    if (!any) continue;

    switch (n.op) {
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kAddRowVec: {
        accumulate(n.a, g);
        if (nodes_[n.b].needs_grad) {
          Tensor2 gb(1, g.cols);
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
          accumulate(n.b, gb);
        }
        break;
      }
      case Op::kScale:
        accumulate(n.a, hiker::scale(g, n.scalar));
        break;
      case Op::kHadamard:
        if (nodes_[n.a].needs_grad) accumulate(n.a, hiker::hadamard(g, nodes_[n.b].val));
        if (nodes_[n.b].needs_grad) accumulate(n.b, hiker::hadamard(g, nodes_[n.a].val));
        break;
      case Op::kMatMul:
        if (nodes_[n.a].needs_grad) accumulate(n.a, hiker::matmul_nt(g, nodes_[n.b].val));
        if (nodes_[n.b].needs_grad) accumulate(n.b, hiker::matmul_tn(nodes_[n.a].val, g));
        break;
      case Op::kMatMulNT:
        if (nodes_[n.a].needs_grad) accumulate(n.a, hiker::matmul(g, nodes_[n.b].val));
        if (nodes_[n.b].needs_grad) accumulate(n.b, hiker::matmul_tn(g, nodes_[n.a].val));
        break;
      case Op::kMatMulTN:
        if (nodes_[n.a].needs_grad) accumulate(n.a, hiker::matmul_nt(nodes_[n.b].val, g));
        if (nodes_[n.b].needs_grad) accumulate(n.b, hiker::matmul(nodes_[n.a].val, g));
        break;
      case Op::kTranspose:
        accumulate(n.a, hiker::transpose(g));
        break;
      case Op::kRelu: {
        Tensor2 ga = g;
        const Tensor2& x = nodes_[n.a].val;
        for (size_t i = 0; i < ga.data.size(); ++i)
          if (x.data[i] <= 0.0) ga.data[i] = 0.0;
        accumulate(n.a, ga);
        break;
      }
      case Op::kSigmoid: {
        Tensor2 ga = g;
        for (size_t i = 0; i < ga.data.size(); ++i) {
          const double y = n.val.data[i];
          ga.data[i] *= y * (1.0 - y);
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::kTanh: {
        Tensor2 ga = g;
        for (size_t i = 0; i < ga.data.size(); ++i) {
          const double y = n.val.data[i];
          ga.data[i] *= 1.0 - y * y;
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::kRowSoftmax: {
        Tensor2 ga(g.rows, g.cols);
        for (int i = 0; i < g.rows; ++i) {
          double inner = 0.0;
          for (int j = 0; j < g.cols; ++j) inner += g.at(i, j) * n.val.at(i, j);
          for (int j = 0; j < g.cols; ++j)
            ga.at(i, j) = n.val.at(i, j) * (g.at(i, j) - inner);
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::kGroupedRowSoftmax: {
        int ngroups = 0;
        for (int gi : n.idx) ngroups = std::max(ngroups, gi + 1);
        Tensor2 ga(g.rows, g.cols);
        std::vector<double> inner(ngroups);
        for (int i = 0; i < g.rows; ++i) {
          std::fill(inner.begin(), inner.end(), 0.0);
          for (int j = 0; j < g.cols; ++j) inner[n.idx[j]] += g.at(i, j) * n.val.at(i, j);
          for (int j = 0; j < g.cols; ++j)
            ga.at(i, j) = n.val.at(i, j) * (g.at(i, j) - inner[n.idx[j]]);
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::kGatherRows: {
        Tensor2 ga(nodes_[n.a].val.rows, nodes_[n.a].val.cols);
        for (size_t i = 0; i < n.idx.size(); ++i)
          for (int j = 0; j < g.cols; ++j)
            ga.at(n.idx[i], j) += g.at(static_cast<int>(i), j);
        accumulate(n.a, ga);
        break;
      }
      case Op::kGatherCols: {
        Tensor2 ga(nodes_[n.a].val.rows, nodes_[n.a].val.cols);
        for (int i = 0; i < g.rows; ++i)
          for (size_t j = 0; j < n.idx.size(); ++j)
            ga.at(i, n.idx[j]) += g.at(i, static_cast<int>(j));
        accumulate(n.a, ga);
        break;
      }
      case Op::kClampMin: {
        Tensor2 ga = g;
        const Tensor2& x = nodes_[n.a].val;
        for (size_t i = 0; i < ga.data.size(); ++i)
          if (x.data[i] <= n.scalar) ga.data[i] = 0.0;
        accumulate(n.a, ga);
        break;
      }
      case Op::kLog: {
        Tensor2 ga = g;
        const Tensor2& x = nodes_[n.a].val;
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] /= x.data[i];
        accumulate(n.a, ga);
        break;
      }
      case Op::kSumAll: {
        Tensor2 ga(nodes_[n.a].val.rows, nodes_[n.a].val.cols, g.at(0, 0));
        accumulate(n.a, ga);
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

}  // namespace hiker
