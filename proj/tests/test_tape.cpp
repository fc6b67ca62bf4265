#include <array>
#include <functional>
#include <vector>

#include "doctest.h"
#include "hiker/gradcheck.hpp"
#include "hiker/kernels.hpp"
#include "hiker/rng.hpp"
#include "hiker/tape.hpp"

using namespace hiker;

namespace {

std::vector<double> flatten(const std::vector<Tensor2>& ts) {
  std::vector<double> out;
  for (const auto& t : ts) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

std::vector<Tensor2> unflatten_like(const std::vector<Tensor2>& shapes,
                                    const std::vector<double>& x) {
  std::vector<Tensor2> out = shapes;
  size_t pos = 0;
  for (auto& t : out) {
    std::copy(x.begin() + pos, x.begin() + pos + t.size(), t.data.begin());
    pos += t.size();
  }
  return out;
}

// Differentiate a scalar tape program w.r.t. all leaf inputs and compare
// against central differences.
void check_grad(const std::vector<Tensor2>& inputs,
                const std::function<int(Tape&, const std::vector<int>&)>& build,
                double eps = 1e-6, double tol = 1e-4) {
  Tape t;
  std::vector<int> ids;
  for (const auto& in : inputs) ids.push_back(t.leaf(in, true));
  const int loss = build(t, ids);
  t.backward(loss);
  std::vector<double> analytic;
  for (int id : ids) {
    const Tensor2& g = t.grad(id);
    analytic.insert(analytic.end(), g.data.begin(), g.data.end());
  }
  auto f = [&](const std::vector<double>& x) {
    auto in2 = unflatten_like(inputs, x);
    Tape t2;
    std::vector<int> ids2;
    for (const auto& in : in2) ids2.push_back(t2.leaf(in, true));
    return t2.val(build(t2, ids2)).at(0, 0);
  };
  auto rep = grad_check(f, flatten(inputs), analytic, eps);
  CHECK(rep.max_rel_err < tol);
}

Tensor2 rand_t(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so relu/clamp kinks stay out of FD reach.
Tensor2 rand_away_from_zero(Rng& rng, int r, int c) {
  Tensor2 t(r, c);
  for (double& v : t.data) {
    const double m = rng.uniform(0.1, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("tape");

TEST_CASE("elementwise and matmul op gradients") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor2 a = rand_t(rng, 3, 4), b = rand_t(rng, 3, 4);
    Tensor2 w = rand_t(rng, 3, 4);
    check_grad({a, b}, [&](Tape& t, const std::vector<int>& ids) {
      int sum = t.add(ids[0], ids[1]);
      int had = t.hadamard(sum, t.scale(ids[0], 0.5));
      return t.sum_all(t.hadamard(had, t.leaf(w)));
    });

    Tensor2 m1 = rand_t(rng, 2, 3), m2 = rand_t(rng, 3, 4);
    Tensor2 w2 = rand_t(rng, 2, 4);
    check_grad({m1, m2}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.matmul(ids[0], ids[1]), t.leaf(w2)));
    });

    Tensor2 q1 = rand_t(rng, 2, 3), q2 = rand_t(rng, 4, 3);
    Tensor2 w3 = rand_t(rng, 2, 4);
    check_grad({q1, q2}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.matmul_nt(ids[0], ids[1]), t.leaf(w3)));
    });

    Tensor2 p1 = rand_t(rng, 3, 2), p2 = rand_t(rng, 3, 4);
    Tensor2 w4 = rand_t(rng, 2, 4);
    check_grad({p1, p2}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.matmul_tn(ids[0], ids[1]), t.leaf(w4)));
    });

    Tensor2 x = rand_t(rng, 2, 3);
    Tensor2 bias = rand_t(rng, 1, 3);
    Tensor2 w5 = rand_t(rng, 3, 2);
    check_grad({x, bias}, [&](Tape& t, const std::vector<int>& ids) {
      int y = t.transpose(t.add_rowvec(ids[0], ids[1]));
      return t.sum_all(t.hadamard(y, t.leaf(w5)));
    });
  }
}

TEST_CASE("activation op gradients") {
  Rng rng(202);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor2 x = rand_away_from_zero(rng, 3, 5);
    Tensor2 w = rand_t(rng, 3, 5);
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.relu(ids[0]), t.leaf(w)));
    });
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.sigmoid(ids[0]), t.leaf(w)));
    });
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.tanh(ids[0]), t.leaf(w)));
    });

    Tensor2 pos = rand_t(rng, 2, 4, 0.5, 2.0);
    Tensor2 w2 = rand_t(rng, 2, 4);
    check_grad({pos}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.log(t.clamp_min(ids[0], 1e-12)), t.leaf(w2)));
    });
  }
}

TEST_CASE("softmax, grouped softmax and gather gradients") {
  Rng rng(303);
  const std::vector<int> groups = {0, 0, 1, 1, 2};
  for (int trial = 0; trial < 20; ++trial) {
    Tensor2 x = rand_t(rng, 3, 5, -2.0, 2.0);
    Tensor2 w = rand_t(rng, 3, 5);
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.row_softmax(ids[0]), t.leaf(w)));
    });
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.grouped_row_softmax(ids[0], groups), t.leaf(w)));
    });

    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      int y = t.gather_rows(ids[0], {2, 0, 0});
      return t.sum_all(t.hadamard(y, t.leaf(Tensor2(3, 5, 0.7))));
    });
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      int y = t.gather_cols(ids[0], {4, 1, 1, 0});
      return t.sum_all(t.hadamard(y, t.leaf(Tensor2(3, 4, 0.3))));
    });
  }
}

TEST_CASE("grouped softmax with one group equals row softmax") {
  Rng rng(404);
  Tensor2 x = rand_t(rng, 4, 6, -3.0, 3.0);
  Tape t;
  int id = t.leaf(x);
  int a = t.row_softmax(id);
  int b = t.grouped_row_softmax(id, std::vector<int>(6, 0));
  for (size_t i = 0; i < t.val(a).size(); ++i)
    CHECK(t.val(a).data[i] == doctest::Approx(t.val(b).data[i]).epsilon(1e-15));
}

TEST_CASE("tape mlp matches plain mlp_forward") {
  Rng rng(505);
  MlpParams p = mlp_random(4, 5, 5, 3, rng);
  std::vector<double> x = {0.3, -0.8, 1.2, 0.05};
  auto y = mlp_forward(p, x);

  Tape t;
  std::array<int, 6> wb = {t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2),
                           t.leaf(p.b2), t.leaf(p.w3), t.leaf(p.b3)};
  int out = t.mlp3(t.leaf(Tensor2::row(x)), wb);
  for (int j = 0; j < 3; ++j) CHECK(t.val(out).at(0, j) == doctest::Approx(y[j]).epsilon(1e-14));
}

TEST_CASE("tape gru matches plain gru_step") {
  Rng rng(606);
  const int d = 5;
  GruParams p = gru_random(d, rng);
  std::vector<double> h(d), m(d);
  for (double& v : h) v = rng.uniform(-1, 1);
  for (double& v : m) v = rng.uniform(-1, 1);
  auto hn = gru_step(p, h, m);

  Tape t;
  std::array<int, 9> ids = {t.leaf(p.wz), t.leaf(p.uz), t.leaf(p.bz),
                            t.leaf(p.wr), t.leaf(p.ur), t.leaf(p.br),
                            t.leaf(p.wc), t.leaf(p.uc), t.leaf(p.bc)};
  int out = t.gru(t.leaf(Tensor2::row(h)), t.leaf(Tensor2::row(m)), ids);
  for (int j = 0; j < d; ++j) CHECK(t.val(out).at(0, j) == doctest::Approx(hn[j]).epsilon(1e-14));
}

// The per-kernel gradient sweep: linear, rectifier, softmax+NLL, GRU cell,
// each at 100 random points (cosine is covered in the numerics suite).
TEST_CASE("kernel gradient sweep at 100 random points each") {
  Rng rng(707);

  for (int trial = 0; trial < 100; ++trial) {
    Tensor2 x = rand_t(rng, 2, 3), w = rand_t(rng, 4, 3), b = rand_t(rng, 1, 4);
    Tensor2 lw = rand_t(rng, 2, 4);
    check_grad({x, w, b}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.linear(ids[0], ids[1], ids[2]), t.leaf(lw)));
    });
  }

  for (int trial = 0; trial < 100; ++trial) {
    Tensor2 x = rand_away_from_zero(rng, 3, 4);
    Tensor2 lw = rand_t(rng, 3, 4);
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      return t.sum_all(t.hadamard(t.relu(ids[0]), t.leaf(lw)));
    });
  }

  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.index(6);
    Tensor2 x = rand_t(rng, 1, n, -3.0, 3.0);
    Tensor2 onehot(1, n);
    onehot.at(0, rng.index(n)) = 1.0;
    check_grad({x}, [&](Tape& t, const std::vector<int>& ids) {
      int p = t.row_softmax(ids[0]);
      int picked = t.sum_all(t.hadamard(t.log(t.clamp_min(p, 1e-12)), t.leaf(onehot)));
      return t.scale(picked, -1.0);
    });
  }

  const int d = 4;
  for (int trial = 0; trial < 100; ++trial) {
    GruParams p = gru_random(d, rng);
    Tensor2 h = rand_t(rng, 2, d), m = rand_t(rng, 2, d);
    Tensor2 lw = rand_t(rng, 2, d);
    std::vector<Tensor2> inputs = {h,    m,    p.wz, p.uz, p.bz, p.wr,
                                   p.ur, p.br, p.wc, p.uc, p.bc};
    check_grad(inputs, [&](Tape& t, const std::vector<int>& ids) {
      std::array<int, 9> gp = {ids[2], ids[3], ids[4], ids[5], ids[6],
                               ids[7], ids[8], ids[9], ids[10]};
      return t.sum_all(t.hadamard(t.gru(ids[0], ids[1], gp), t.leaf(lw)));
    });
  }
}

TEST_CASE("backward through constant loss leaves zero gradients") {
  Tape t;
  int x = t.leaf(Tensor2(2, 2, 1.0), true);
  int c = t.leaf(Tensor2(2, 2, 3.0));
  int loss = t.sum_all(c);
  t.backward(loss);
  for (double v : t.grad(x).data) CHECK(v == 0.0);
}

TEST_SUITE_END();
