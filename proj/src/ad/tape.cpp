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

#include "ad/tape.hpp"

#include "ad/params.hpp"
#include "util/error.hpp"

namespace ecss::ad {

Var Tape::constant(Mat value) { return push(std::move(value), false, {}); }

Var Tape::input(Mat value) { return push(std::move(value), true, {}); }

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (store_ == nullptr) {
    store_ = &store;
  } else {
    require(store_ == &store, ErrorKind::kRuntime,
            "a tape can only bind parameters from one store");
  }
  if (param_nodes_.size() < store.size()) param_nodes_.resize(store.size(), -1);
  if (param_nodes_[index] >= 0) return Var(this, param_nodes_[index]);
  Node n;
  n.external = &store.value(index);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[index] = id;
  return Var(this, id);
}

Var Tape::push(Mat value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Mat& v = n.external != nullptr ? *n.external : n.value;
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var root) {
  require(root.tape() == this, ErrorKind::kRuntime,
          "backward root belongs to another tape");
  require(root.rows() == 1 && root.cols() == 1, ErrorKind::kRuntime,
          "backward root must be a scalar");
  if (!requires_grad(root.id())) return;
  grad(root.id())(0, 0) += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

std::vector<Mat> Tape::param_grads(std::size_t n_params) const {
  std::vector<Mat> out(n_params);
  for (std::size_t i = 0; i < param_nodes_.size() && i < n_params; ++i) {
    const int id = param_nodes_[i];
    if (id >= 0 && has_grad(id)) out[i] = nodes_[static_cast<std::size_t>(id)].grad;
  }
  return out;
}

}  // namespace ecss::ad
