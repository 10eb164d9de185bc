// Copyright 2026 The ecss-desk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ad/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "util/error.hpp"

namespace ecss::ad {
namespace {

bool rg(Var v) { return v.tape()->requires_grad(v.id()); }

Tape& tape_of(Var a) { return *a.tape(); }

void check_same_tape(Var a, Var b) {
  require(a.tape() == b.tape(), ErrorKind::kRuntime,
          "operands recorded on different tapes");
}

void check_shape(bool ok, const char* op, const Mat& a, const Mat& b) {
  if (!ok) {
    fail(ErrorKind::kRuntime,
         std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
             "x" + std::to_string(a.cols()) + " vs " +
             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

template <typename F>
Mat unary(const Mat& x, F f) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) y.data()[i] = f(x.data()[i]);
  return y;
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const Mat& av = a.value();
  const Mat& bv = b.value();
  check_shape(av.cols() == bv.rows(), "matmul", av, bv);
  Mat y = av * bv;
  const bool need = rg(a) || rg(b);
  return tape_of(a).push(std::move(y), need, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id()))
      t.grad(a.id()).noalias() += g * t.value(b.id()).transpose();
    if (t.requires_grad(b.id()))
      t.grad(b.id()).noalias() += t.value(a.id()).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  const Mat& av = a.value();
  const Mat& bv = b.value();
  check_shape(av.cols() == bv.cols(), "matmul_nt", av, bv);
  Mat y = av * bv.transpose();
  const bool need = rg(a) || rg(b);
  return tape_of(a).push(std::move(y), need, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).noalias() += g * t.value(b.id());
    if (t.requires_grad(b.id()))
      t.grad(b.id()).noalias() += g.transpose() * t.value(a.id());
  });
}

Var transpose(Var a) {
  Mat y = a.value().transpose();
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    t.grad(a.id()) += t.grad_or_empty(self).transpose();
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(),
              b.value());
  Mat y = a.value() + b.value();
  return tape_of(a).push(std::move(y), rg(a) || rg(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g;
    if (t.requires_grad(b.id())) t.grad(b.id()) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(),
              b.value());
  Mat y = a.value() - b.value();
  return tape_of(a).push(std::move(y), rg(a) || rg(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g;
    if (t.requires_grad(b.id())) t.grad(b.id()) -= g;
  });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.value(),
              row.value());
  Mat y = a.value();
  y.rowwise() += row.value().row(0);
  return tape_of(a).push(std::move(y), rg(a) || rg(row),
                         [a, row](Tape& t, int self) {
                           const Mat& g = t.grad_or_empty(self);
                           if (t.requires_grad(a.id())) t.grad(a.id()) += g;
                           if (t.requires_grad(row.id()))
                             t.grad(row.id()) += g.colwise().sum();
                         });
}

Var add_const(Var a, const Mat& c) {
  check_shape(a.rows() == c.rows() && a.cols() == c.cols(), "add_const",
              a.value(), c);
  Mat y = a.value() + c;
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    t.grad(a.id()) += t.grad_or_empty(self);
  });
}

Var add_n(std::span<const Var> xs) {
  require(!xs.empty(), ErrorKind::kRuntime, "add_n of nothing");
  Mat y = xs[0].value();
  bool need = rg(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    check_same_tape(xs[0], xs[i]);
    check_shape(xs[i].rows() == y.rows() && xs[i].cols() == y.cols(), "add_n",
                y, xs[i].value());
    y += xs[i].value();
    need = need || rg(xs[i]);
  }
  std::vector<Var> in(xs.begin(), xs.end());
  return tape_of(xs[0]).push(std::move(y), need,
                             [in = std::move(in)](Tape& t, int self) {
                               const Mat& g = t.grad_or_empty(self);
                               for (Var v : in)
                                 if (t.requires_grad(v.id())) t.grad(v.id()) += g;
                             });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.value(),
              b.value());
  Mat y = a.value().cwiseProduct(b.value());
  return tape_of(a).push(std::move(y), rg(a) || rg(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id()))
      t.grad(a.id()) += g.cwiseProduct(t.value(b.id()));
    if (t.requires_grad(b.id()))
      t.grad(b.id()) += g.cwiseProduct(t.value(a.id()));
  });
}

Var mul_const(Var a, const Mat& c) {
  check_shape(a.rows() == c.rows() && a.cols() == c.cols(), "mul_const",
              a.value(), c);
  Mat y = a.value().cwiseProduct(c);
  return tape_of(a).push(std::move(y), rg(a), [a, c](Tape& t, int self) {
    t.grad(a.id()) += t.grad_or_empty(self).cwiseProduct(c);
  });
}

Var scale(Var a, double c) {
  Mat y = a.value() * c;
  return tape_of(a).push(std::move(y), rg(a), [a, c](Tape& t, int self) {
    t.grad(a.id()) += t.grad_or_empty(self) * c;
  });
}

Var mul_scalar(Var a, Var s) {
  check_same_tape(a, s);
  check_shape(s.rows() == 1 && s.cols() == 1, "mul_scalar", a.value(),
              s.value());
  Mat y = a.value() * s.scalar();
  return tape_of(a).push(std::move(y), rg(a) || rg(s), [a, s](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g * t.value(s.id())(0, 0);
    if (t.requires_grad(s.id()))
      t.grad(s.id())(0, 0) += g.cwiseProduct(t.value(a.id())).sum();
  });
}

Var mul_rows(Var a, Var col) {
  check_same_tape(a, col);
  check_shape(col.cols() == 1 && col.rows() == a.rows(), "mul_rows", a.value(),
              col.value());
  Mat y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) *= col.value()(i, 0);
  return tape_of(a).push(std::move(y), rg(a) || rg(col),
                         [a, col](Tape& t, int self) {
                           const Mat& g = t.grad_or_empty(self);
                           const Mat& av = t.value(a.id());
                           const Mat& cv = t.value(col.id());
                           if (t.requires_grad(a.id())) {
                             Mat& ga = t.grad(a.id());
                             for (Eigen::Index i = 0; i < g.rows(); ++i)
                               ga.row(i) += g.row(i) * cv(i, 0);
                           }
                           if (t.requires_grad(col.id())) {
                             Mat& gc = t.grad(col.id());
                             for (Eigen::Index i = 0; i < g.rows(); ++i)
                               gc(i, 0) += g.row(i).dot(av.row(i));
                           }
                         });
}

Var gelu(Var a) {
  static const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
  Mat y = unary(a.value(), [](double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  });
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& x = t.value(a.id());
    Mat& ga = t.grad(a.id());
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      ga.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
}

Var relu(Var a) {
  Mat y = a.value().cwiseMax(0.0);
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& x = t.value(a.id());
    Mat& ga = t.grad(a.id());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
  });
}

Var tanh(Var a) {
  Mat y = a.value().array().tanh().matrix();
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& yv = t.value(self);
    t.grad(a.id()) += g.cwiseProduct((1.0 - yv.array().square()).matrix());
  });
}

Var sigmoid(Var a) {
  Mat y = unary(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& yv = t.value(self);
    t.grad(a.id()) +=
        g.cwiseProduct((yv.array() * (1.0 - yv.array())).matrix());
  });
}

Var softmax_rows(Var a) {
  Mat y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& yv = t.value(self);
    Mat& ga = t.grad(a.id());
    for (Eigen::Index i = 0; i < yv.rows(); ++i) {
      const double s = g.row(i).dot(yv.row(i));
      ga.row(i) += (yv.row(i).array() * (g.row(i).array() - s)).matrix();
    }
  });
}

Var gather_rows(Var a, std::vector<int> idx) {
  const Mat& av = a.value();
  Mat y = Mat::Zero(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    require(idx[i] < av.rows(), ErrorKind::kRuntime,
            "gather_rows index out of range");
    y.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  return tape_of(a).push(std::move(y), rg(a),
                         [a, idx = std::move(idx)](Tape& t, int self) {
                           const Mat& g = t.grad_or_empty(self);
                           Mat& ga = t.grad(a.id());
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             if (idx[i] >= 0)
                               ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                         });
}

Var scatter_add_rows(Var a, std::vector<int> idx, int n_rows) {
  const Mat& av = a.value();
  require(static_cast<Eigen::Index>(idx.size()) == av.rows(),
          ErrorKind::kRuntime, "scatter_add_rows index count mismatch");
  Mat y = Mat::Zero(n_rows, av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < n_rows, ErrorKind::kRuntime,
            "scatter_add_rows index out of range");
    y.row(idx[i]) += av.row(static_cast<Eigen::Index>(i));
  }
  return tape_of(a).push(std::move(y), rg(a),
                         [a, idx = std::move(idx)](Tape& t, int self) {
                           const Mat& g = t.grad_or_empty(self);
                           Mat& ga = t.grad(a.id());
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             ga.row(static_cast<Eigen::Index>(i)) += g.row(idx[i]);
                         });
}

Var slice_rows(Var a, int r0, int n) {
  require(r0 >= 0 && n >= 0 && r0 + n <= a.rows(), ErrorKind::kRuntime,
          "slice_rows out of range");
  Mat y = a.value().middleRows(r0, n);
  return tape_of(a).push(std::move(y), rg(a), [a, r0, n](Tape& t, int self) {
    t.grad(a.id()).middleRows(r0, n) += t.grad_or_empty(self);
  });
}

Var slice_cols(Var a, int c0, int n) {
  require(c0 >= 0 && n >= 0 && c0 + n <= a.cols(), ErrorKind::kRuntime,
          "slice_cols out of range");
  Mat y = a.value().middleCols(c0, n);
  return tape_of(a).push(std::move(y), rg(a), [a, c0, n](Tape& t, int self) {
    t.grad(a.id()).middleCols(c0, n) += t.grad_or_empty(self);
  });
}

Var concat_rows(std::span<const Var> xs) {
  require(!xs.empty(), ErrorKind::kRuntime, "concat_rows of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = xs[0].cols();
  bool need = false;
  for (Var v : xs) {
    check_same_tape(xs[0], v);
    require(v.cols() == cols, ErrorKind::kRuntime, "concat_rows width mismatch");
    rows += v.rows();
    need = need || rg(v);
  }
  Mat y(rows, cols);
  Eigen::Index r = 0;
  for (Var v : xs) {
    y.middleRows(r, v.rows()) = v.value();
    r += v.rows();
  }
  std::vector<Var> in(xs.begin(), xs.end());
  return tape_of(xs[0]).push(std::move(y), need,
                             [in = std::move(in)](Tape& t, int self) {
                               const Mat& g = t.grad_or_empty(self);
                               Eigen::Index r0 = 0;
                               for (Var v : in) {
                                 const Eigen::Index n = t.value(v.id()).rows();
                                 if (t.requires_grad(v.id()))
                                   t.grad(v.id()) += g.middleRows(r0, n);
                                 r0 += n;
                               }
                             });
}

Var concat_cols(std::span<const Var> xs) {
  require(!xs.empty(), ErrorKind::kRuntime, "concat_cols of nothing");
  const Eigen::Index rows = xs[0].rows();
  Eigen::Index cols = 0;
  bool need = false;
  for (Var v : xs) {
    check_same_tape(xs[0], v);
    require(v.rows() == rows, ErrorKind::kRuntime, "concat_cols height mismatch");
    cols += v.cols();
    need = need || rg(v);
  }
  Mat y(rows, cols);
  Eigen::Index c = 0;
  for (Var v : xs) {
    y.middleCols(c, v.cols()) = v.value();
    c += v.cols();
  }
  std::vector<Var> in(xs.begin(), xs.end());
  return tape_of(xs[0]).push(std::move(y), need,
                             [in = std::move(in)](Tape& t, int self) {
                               const Mat& g = t.grad_or_empty(self);
                               Eigen::Index c0 = 0;
                               for (Var v : in) {
                                 const Eigen::Index n = t.value(v.id()).cols();
                                 if (t.requires_grad(v.id()))
                                   t.grad(v.id()) += g.middleCols(c0, n);
                                 c0 += n;
                               }
                             });
}

Var rowwise_dot(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "rowwise_dot",
              a.value(), b.value());
  Mat y = a.value().cwiseProduct(b.value()).rowwise().sum();
  return tape_of(a).push(std::move(y), rg(a) || rg(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& av = t.value(a.id());
    const Mat& bv = t.value(b.id());
    if (t.requires_grad(a.id())) {
      Mat& ga = t.grad(a.id());
      for (Eigen::Index i = 0; i < g.rows(); ++i) ga.row(i) += g(i, 0) * bv.row(i);
    }
    if (t.requires_grad(b.id())) {
      Mat& gb = t.grad(b.id());
      for (Eigen::Index i = 0; i < g.rows(); ++i) gb.row(i) += g(i, 0) * av.row(i);
    }
  });
}

Var segment_softmax(Var scores, std::vector<int> seg, int n_segments) {
  const Mat& s = scores.value();
  require(s.cols() == 1 && static_cast<std::size_t>(s.rows()) == seg.size(),
          ErrorKind::kRuntime, "segment_softmax expects an n x 1 column");
  std::vector<double> mx(static_cast<std::size_t>(n_segments),
                         -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < seg.size(); ++i)
    mx[seg[i]] = std::max(mx[seg[i]], s(static_cast<Eigen::Index>(i), 0));
  Mat y(s.rows(), 1);
  std::vector<double> sum(static_cast<std::size_t>(n_segments), 0.0);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const double e = std::exp(s(static_cast<Eigen::Index>(i), 0) - mx[seg[i]]);
    y(static_cast<Eigen::Index>(i), 0) = e;
    sum[seg[i]] += e;
  }
  for (std::size_t i = 0; i < seg.size(); ++i)
    y(static_cast<Eigen::Index>(i), 0) /= sum[seg[i]];
  return tape_of(scores).push(
      std::move(y), rg(scores),
      [scores, seg = std::move(seg), n_segments](Tape& t, int self) {
        const Mat& g = t.grad_or_empty(self);
        const Mat& yv = t.value(self);
        std::vector<double> dot(static_cast<std::size_t>(n_segments), 0.0);
        for (std::size_t i = 0; i < seg.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          dot[seg[i]] += yv(r, 0) * g(r, 0);
        }
        Mat& gs = t.grad(scores.id());
        for (std::size_t i = 0; i < seg.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          gs(r, 0) += yv(r, 0) * (g(r, 0) - dot[seg[i]]);
        }
      });
}

Var sum_all(Var a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return tape_of(a).push(std::move(y), rg(a), [a](Tape& t, int self) {
    t.grad(a.id()).array() += t.grad_or_empty(self)(0, 0);
  });
}

Var mean_all(Var a) {
  const double n = static_cast<double>(a.value().size());
  Mat y(1, 1);
  y(0, 0) = a.value().sum() / n;
  return tape_of(a).push(std::move(y), rg(a), [a, n](Tape& t, int self) {
    t.grad(a.id()).array() += t.grad_or_empty(self)(0, 0) / n;
  });
}

Var mean_rows(Var a) {
  const double n = static_cast<double>(a.rows());
  Mat y = a.value().colwise().sum() / n;
  return tape_of(a).push(std::move(y), rg(a), [a, n](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    t.grad(a.id()).rowwise() += g.row(0) / n;
  });
}

Var dot_const(Var a, const Mat& g) {
  check_shape(a.rows() == g.rows() && a.cols() == g.cols(), "dot_const",
              a.value(), g);
  Mat y(1, 1);
  y(0, 0) = a.value().cwiseProduct(g).sum();
  return tape_of(a).push(std::move(y), rg(a), [a, g](Tape& t, int self) {
    t.grad(a.id()) += g * t.grad_or_empty(self)(0, 0);
  });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  const Mat& x = a.value();
  const Eigen::Index d = x.cols();
  check_shape(gamma.rows() == 1 && gamma.cols() == d, "layer_norm gamma", x,
              gamma.value());
  check_shape(beta.rows() == 1 && beta.cols() == d, "layer_norm beta", x,
              beta.value());
  Mat xhat(x.rows(), d);
  Mat inv_std(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i, 0) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu).matrix() * inv_std(i, 0);
  }
  Mat y = xhat;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    y.row(i) = y.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  const bool need = rg(a) || rg(gamma) || rg(beta);
  return tape_of(a).push(
      std::move(y), need,
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, int self) {
        const Mat& g = t.grad_or_empty(self);
        const Mat& gm = t.value(gamma.id());
        if (t.requires_grad(gamma.id()))
          t.grad(gamma.id()) += g.cwiseProduct(xhat).colwise().sum();
        if (t.requires_grad(beta.id())) t.grad(beta.id()) += g.colwise().sum();
        if (t.requires_grad(a.id())) {
          Mat& ga = t.grad(a.id());
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gm.row(0));
            const double m1 = dxhat.mean();
            const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
            ga.row(i) += inv_std(i, 0) *
                         (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
          }
        }
      });
}

Var l2_normalize_rows(Var a) {
  const Mat& x = a.value();
  Mat y = Mat::Zero(x.rows(), x.cols());
  Mat norms(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    norms(i, 0) = x.row(i).norm();
    if (norms(i, 0) > 0.0) y.row(i) = x.row(i) / norms(i, 0);
  }
  return tape_of(a).push(std::move(y), rg(a),
                         [a, norms = std::move(norms)](Tape& t, int self) {
                           const Mat& g = t.grad_or_empty(self);
                           const Mat& yv = t.value(self);
                           Mat& ga = t.grad(a.id());
                           for (Eigen::Index i = 0; i < g.rows(); ++i) {
                             if (norms(i, 0) <= 0.0) continue;
                             const double proj = g.row(i).dot(yv.row(i));
                             ga.row(i) += (g.row(i) - proj * yv.row(i)) / norms(i, 0);
                           }
                         });
}

Var lstm_cell(Var gates, Var c_prev) {
  check_same_tape(gates, c_prev);
  const Eigen::Index h = c_prev.cols();
  check_shape(gates.rows() == 1 && gates.cols() == 4 * h && c_prev.rows() == 1,
              "lstm_cell", gates.value(), c_prev.value());
  const Mat& z = gates.value();
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  Mat act(1, 4 * h);
  for (Eigen::Index j = 0; j < h; ++j) {
    act(0, j) = sig(z(0, j));
    act(0, h + j) = sig(z(0, h + j));
    act(0, 2 * h + j) = std::tanh(z(0, 2 * h + j));
    act(0, 3 * h + j) = sig(z(0, 3 * h + j));
  }
  Mat out(1, 2 * h);
  Mat tanh_c(1, h);
  for (Eigen::Index j = 0; j < h; ++j) {
    const double c = act(0, h + j) * c_prev.value()(0, j) +
                     act(0, j) * act(0, 2 * h + j);
    tanh_c(0, j) = std::tanh(c);
    out(0, j) = act(0, 3 * h + j) * tanh_c(0, j);
    out(0, h + j) = c;
  }
  const bool need = rg(gates) || rg(c_prev);
  return tape_of(gates).push(
      std::move(out), need,
      [gates, c_prev, h, act = std::move(act), tanh_c = std::move(tanh_c)](
          Tape& t, int self) {
        const Mat& g = t.grad_or_empty(self);
        const Mat& cp = t.value(c_prev.id());
        Mat dz(1, 4 * h);
        Mat dcp(1, h);
        for (Eigen::Index j = 0; j < h; ++j) {
          const double i = act(0, j), f = act(0, h + j), gg = act(0, 2 * h + j),
                       o = act(0, 3 * h + j);
          const double dh = g(0, j);
          const double dc = g(0, h + j) + dh * o * (1.0 - tanh_c(0, j) * tanh_c(0, j));
          dz(0, j) = dc * gg * i * (1.0 - i);
          dz(0, h + j) = dc * cp(0, j) * f * (1.0 - f);
          dz(0, 2 * h + j) = dc * i * (1.0 - gg * gg);
          dz(0, 3 * h + j) = dh * tanh_c(0, j) * o * (1.0 - o);
          dcp(0, j) = dc * f;
        }
        if (t.requires_grad(gates.id())) t.grad(gates.id()) += dz;
        if (t.requires_grad(c_prev.id())) t.grad(c_prev.id()) += dcp;
      });
}

Var mean_abs_error(Var pred, const Mat& target) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(),
              "mean_abs_error", pred.value(), target);
  const double n = static_cast<double>(target.size());
  Mat diff = pred.value() - target;
  Mat y(1, 1);
  y(0, 0) = diff.cwiseAbs().sum() / n;
  return tape_of(pred).push(std::move(y), rg(pred),
                            [pred, n, diff = std::move(diff)](Tape& t, int self) {
                              const double g = t.grad_or_empty(self)(0, 0) / n;
                              Mat& gp = t.grad(pred.id());
                              for (Eigen::Index i = 0; i < diff.size(); ++i) {
                                const double d = diff.data()[i];
                                gp.data()[i] += d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
                              }
                            });
}

Var mean_squared_error(Var pred, const Mat& target) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(),
              "mean_squared_error", pred.value(), target);
  const double n = static_cast<double>(target.size());
  Mat diff = pred.value() - target;
  Mat y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return tape_of(pred).push(std::move(y), rg(pred),
                            [pred, n, diff = std::move(diff)](Tape& t, int self) {
                              t.grad(pred.id()) +=
                                  diff * (2.0 * t.grad_or_empty(self)(0, 0) / n);
                            });
}

Var mean_squared_error(Var pred, Var target) {
  check_same_tape(pred, target);
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(),
              "mean_squared_error", pred.value(), target.value());
  const double n = static_cast<double>(pred.value().size());
  Mat diff = pred.value() - target.value();
  Mat y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return tape_of(pred).push(
      std::move(y), rg(pred) || rg(target),
      [pred, target, n, diff = std::move(diff)](Tape& t, int self) {
        const double s = 2.0 * t.grad_or_empty(self)(0, 0) / n;
        if (t.requires_grad(pred.id())) t.grad(pred.id()) += diff * s;
        if (t.requires_grad(target.id())) t.grad(target.id()) -= diff * s;
      });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Mat& z = logits.value();
  require(static_cast<std::size_t>(z.rows()) == labels.size(),
          ErrorKind::kRuntime, "softmax_cross_entropy label count mismatch");
  Mat p(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < z.cols(), ErrorKind::kLookup,
            "cross-entropy label out of range");
    const double m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp().matrix();
    const double s = p.row(i).sum();
    p.row(i) /= s;
    loss += -(z(i, y) - m - std::log(s));
  }
  const double n = static_cast<double>(z.rows());
  Mat out(1, 1);
  out(0, 0) = loss / n;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    p(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  return tape_of(logits).push(std::move(out), rg(logits),
                              [logits, n, p = std::move(p)](Tape& t, int self) {
                                t.grad(logits.id()) +=
                                    p * (t.grad_or_empty(self)(0, 0) / n);
                              });
}

Var supcon_from_logits(Var logits, const std::vector<int>& labels,
                       int* contributing_anchors) {
  const Mat& z = logits.value();
  const Eigen::Index k = z.rows();
  require(z.cols() == k && static_cast<std::size_t>(k) == labels.size(),
          ErrorKind::kRuntime, "supcon expects a square K x K logit matrix");
  Mat dz = Mat::Zero(k, k);
  double total = 0.0;
  int anchors = 0;
  for (Eigen::Index a = 0; a < k; ++a) {
    int n_pos = 0;
    for (Eigen::Index d = 0; d < k; ++d)
      if (d != a && labels[d] == labels[a]) ++n_pos;
    if (n_pos == 0) continue;
    ++anchors;
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index d = 0; d < k; ++d)
      if (d != a) m = std::max(m, z(a, d));
    double denom = 0.0;
    for (Eigen::Index d = 0; d < k; ++d)
      if (d != a) denom += std::exp(z(a, d) - m);
    const double lse = m + std::log(denom);
    double pos_mean = 0.0;
    for (Eigen::Index d = 0; d < k; ++d) {
      if (d == a) continue;
      dz(a, d) = std::exp(z(a, d) - lse);
      if (labels[d] == labels[a]) {
        pos_mean += z(a, d) / n_pos;
        dz(a, d) -= 1.0 / n_pos;
      }
    }
    total += lse - pos_mean;
  }
  if (contributing_anchors != nullptr) *contributing_anchors = anchors;
  Mat out(1, 1);
  out(0, 0) = anchors > 0 ? total / anchors : 0.0;
  if (anchors > 0) dz /= static_cast<double>(anchors);
  return tape_of(logits).push(std::move(out), rg(logits) && anchors > 0,
                              [logits, dz = std::move(dz)](Tape& t, int self) {
                                t.grad(logits.id()) +=
                                    dz * t.grad_or_empty(self)(0, 0);
                              });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

}  // namespace ecss::ad
