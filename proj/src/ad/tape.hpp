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

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

namespace ecss::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;
class ParamStore;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order and the backward
// sweep visits them in reverse; nodes whose inputs carry no gradient are
// recorded without a backward closure.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool training = false) : training_(training) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Mat value);
  // A leaf with gradient, e.g. a batch-level input whose gradient is read back
  // after the sweep.
  Var input(Mat value);
  // Leaf that refers to parameter `index` of `store` without copying it. The
  // same parameter requested twice yields the same node.
  Var parameter(const ParamStore& store, std::size_t index);

  Var push(Mat value, bool requires_grad, Backward backward);

  const Mat& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  bool has_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].grad.size() > 0;
  }
  // Gradient buffer, zero-initialised on first access.
  Mat& grad(int id);
  const Mat& grad_or_empty(int id) const {
    return nodes_[static_cast<std::size_t>(id)].grad;
  }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and sweeps backwards.
  void backward(Var root);

  // Gradient per parameter index of the store bound via parameter(); entries
  // for parameters that never entered the tape are empty matrices.
  std::vector<Mat> param_grads(std::size_t n_params) const;

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool training_;
  std::deque<Node> nodes_;
  const ParamStore* store_ = nullptr;
  std::vector<int> param_nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }

}  // namespace ecss::ad
