// Reverse-mode tape over Tensor2 values. Not a general autodiff framework:
// just the op set the propagation/inference composition needs, recorded
// dynamically and differentiated by a single backward sweep.
#pragma once

#include <array>
#include <vector>

#include "hiker/kernels.hpp"
#include "hiker/tensor.hpp"

namespace hiker {

class Tape {
 public:
  enum class Op {
    kLeaf,
    kAdd,
    kAddRowVec,
    kScale,
    kHadamard,
    kMatMul,     // A(m,k) * B(k,n)
    kMatMulNT,   // A(m,k) * B(n,k)^T
    kMatMulTN,   // A(k,m)^T * B(k,n)
    kTranspose,
    kRelu,
    kSigmoid,
    kTanh,
    kRowSoftmax,
    kGroupedRowSoftmax,  // softmax within column groups, per row
    kGatherRows,
    kGatherCols,
    kClampMin,
    kLog,
    kSumAll,
  };

  int leaf(Tensor2 v, bool needs_grad = false);

  int add(int a, int b);
  int add_rowvec(int a, int bias);  // broadcast a [1 x d] bias over rows
  int scale(int a, double s);
  int hadamard(int a, int b);
  int matmul(int a, int b);
  int matmul_nt(int a, int b);
  int matmul_tn(int a, int b);
  int transpose(int a);
  int relu(int a);
  int sigmoid(int a);
  int tanh(int a);
  int row_softmax(int a);
  int grouped_row_softmax(int a, std::vector<int> group_of_col);
  int gather_rows(int a, std::vector<int> idx);
  int gather_cols(int a, std::vector<int> idx);
  int clamp_min(int a, double c);
  int log(int a);
  int sum_all(int a);  // -> [1 x 1]

  // Convenience compositions (recorded as primitive ops above).
  int linear(int x, int w, int b);           // x * w^T + b
  int mlp3(int x, const std::array<int, 6>& wb);  // w1,b1,w2,b2,w3,b3
  int gru(int h, int m, const std::array<int, 9>& p);  // wz,uz,bz, wr,ur,br, wc,uc,bc

  const Tensor2& val(int id) const { return nodes_[id].val; }
  const Tensor2& grad(int id) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps once; loss must be [1 x 1].
  void backward(int loss);

 private:
  struct Node {
    Op op;
    int a = -1, b = -1;
    bool needs_grad = false;
    double scalar = 0.0;
    std::vector<int> idx;  // gather indices or column-group ids
    Tensor2 val;
    Tensor2 grad;
  };

  int push(Node n);
  void accumulate(int target, const Tensor2& g);
  const Node& node(int id) const { return nodes_[id]; }

  std::vector<Node> nodes_;
};

}  // namespace hiker
