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

#include "ad/params.hpp"

#include <cmath>

#include "util/error.hpp"

namespace ecss::ad {

std::size_t ParamStore::add(std::string name, Mat value) {
  require(!by_name_.contains(name), ErrorKind::kConfig,
          "duplicate parameter name '" + name + "'");
  const std::size_t i = params_.size();
  by_name_.emplace(name, i);
  params_.push_back({std::move(name), std::move(value)});
  return i;
}

std::size_t ParamStore::add_uniform(std::string name, Eigen::Index rows,
                                    Eigen::Index cols, Eigen::Index fan_in,
                                    Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(m));
}

std::size_t ParamStore::add_constant(std::string name, Eigen::Index rows,
                                     Eigen::Index cols, double value) {
  return add(std::move(name), Mat::Constant(rows, cols, value));
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParamStore::contains(std::string_view name) const {
  return by_name_.contains(std::string(name));
}

std::size_t ParamStore::index(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  require(it != by_name_.end(), ErrorKind::kLookup,
          "unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void accumulate(GradSet& dst, const GradSet& src) {
  if (dst.size() < src.size()) dst.resize(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].size() == 0) continue;
    if (dst[i].size() == 0)
      dst[i] = src[i];
    else
      dst[i] += src[i];
  }
}

}  // namespace ecss::ad
