/* Copyright 2026 The VocabLab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include <Eigen/Core>

#include "vocablab/autodiff.hpp"

namespace vocablab::ad::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

// Builds a result node; inputs and the backward rule are kept only when
// recording is enabled and some input requires a gradient.
Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
               std::function<void(Node&)> backward_fn);
Tensor make_op(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
               std::function<void(Node&)> backward_fn);

}  // namespace vocablab::ad::detail
