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

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ad/tape.hpp"
#include "util/rng.hpp"

namespace ecss::ad {

// Gradient per parameter index; empty matrices stand for "no gradient".
using GradSet = std::vector<Mat>;

// Flat, name-addressed parameter tree. Names are hierarchical by convention
// ("hgt.l0.q.text.w"), which is what checkpoints key on.
class ParamStore {
 public:
  std::size_t add(std::string name, Mat value);
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
  std::size_t add_uniform(std::string name, Eigen::Index rows,
                          Eigen::Index cols, Eigen::Index fan_in, Rng& rng);
  std::size_t add_constant(std::string name, Eigen::Index rows,
                           Eigen::Index cols, double value);

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  const std::string& name(std::size_t i) const { return params_[i].name; }
  const Mat& value(std::size_t i) const { return params_[i].value; }
  Mat& value(std::size_t i) { return params_[i].value; }

  Var on(Tape& tape, std::size_t i) const { return tape.parameter(*this, i); }

 private:
  struct Param {
    std::string name;
    Mat value;
  };
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// dst += src, treating empty matrices as zero.
void accumulate(GradSet& dst, const GradSet& src);

}  // namespace ecss::ad
