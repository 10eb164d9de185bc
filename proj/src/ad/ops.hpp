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

#include <span>
#include <vector>

#include "ad/tape.hpp"

// Differentiable operations over row-major matrices. Every op records a
// closure that accumulates into its inputs' gradients; the gradient-check
// suite covers each of them.
namespace ecss::ad {

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var add_const(Var a, const Mat& c);
Var add_n(std::span<const Var> xs);
Var mul(Var a, Var b);
Var mul_const(Var a, const Mat& c);
Var scale(Var a, double c);
// a * s for a 1x1 s.
Var mul_scalar(Var a, Var s);
// Row i of a scaled by col(i, 0).
Var mul_rows(Var a, Var col);

Var gelu(Var a);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);

// Index -1 produces a zero row (used for same-padded convolutions).
Var gather_rows(Var a, std::vector<int> idx);
Var scatter_add_rows(Var a, std::vector<int> idx, int n_rows);
Var slice_rows(Var a, int r0, int n);
Var slice_cols(Var a, int c0, int n);
Var concat_rows(std::span<const Var> xs);
Var concat_cols(std::span<const Var> xs);

// (n x d, n x d) -> n x 1
Var rowwise_dot(Var a, Var b);
// Softmax of an n x 1 score column within groups given by seg[i].
Var segment_softmax(Var scores, std::vector<int> seg, int n_segments);

Var sum_all(Var a);
Var mean_all(Var a);
// Column means, 1 x d.
Var mean_rows(Var a);
// sum(a .* g) for a constant g, 1 x 1.
Var dot_const(Var a, const Mat& g);

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
// Rows scaled to unit L2 norm; zero rows stay zero.
Var l2_normalize_rows(Var a);

// gates: 1 x 4H in (input, forget, cell, output) order, pre-activation.
// Returns 1 x 2H holding [h, c].
Var lstm_cell(Var gates, Var c_prev);

Var mean_abs_error(Var pred, const Mat& target);
Var mean_squared_error(Var pred, const Mat& target);
Var mean_squared_error(Var pred, Var target);
// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

// Supervised contrastive objective on a K x K matrix of similarity/tau
// logits. Anchors without positives are skipped; returns the mean over the
// remaining anchors (0 when none remain).
Var supcon_from_logits(Var logits, const std::vector<int>& labels,
                       int* contributing_anchors = nullptr);

Var detach(Var a);

}  // namespace ecss::ad
