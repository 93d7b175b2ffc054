// Copyright 2026 The simulst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Finite-difference checks of every differentiable primitive on one shape,
// shared by the unit tests and the acceptance gate.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "gradcheck.hpp"

namespace simulst::testing {

using GradCheckSink = std::function<void(const char*, const GradCheckReport&)>;

// s is a {m, n} shape with m, n >= 2.
inline void check_primitives(const Shape& s, std::mt19937_64& rng,
                             const GradCheckSink& check) {
  const std::size_t m = s[0], n = s[1];
  check("matmul", gradcheck([](const auto& in) { return matmul(in[0], in[1]); },
                            {random_tensor({m, n}, rng),
                             random_tensor({n, m + 1}, rng)}));
  check("transpose", gradcheck([](const auto& in) { return transpose(in[0]); },
                               {random_tensor(s, rng)}));
  check("add", gradcheck([](const auto& in) { return add(in[0], in[1]); },
                         {random_tensor(s, rng), random_tensor(s, rng)}));
  check("sub", gradcheck([](const auto& in) { return sub(in[0], in[1]); },
                         {random_tensor(s, rng), random_tensor(s, rng)}));
  check("mul", gradcheck([](const auto& in) { return mul(in[0], in[1]); },
                         {random_tensor(s, rng), random_tensor(s, rng)}));
  check("scale", gradcheck([](const auto& in) { return scale(in[0], -1.7); },
                           {random_tensor(s, rng)}));
  check("add_bias",
        gradcheck([](const auto& in) { return add_bias(in[0], in[1]); },
                  {random_tensor(s, rng), random_tensor({n}, rng)}));
  check("add_column",
        gradcheck([](const auto& in) { return add_column(in[0], in[1]); },
                  {random_tensor(s, rng), random_tensor({m}, rng)}));
  check("relu", gradcheck([](const auto& in) { return relu(in[0]); },
                          {random_tensor(s, rng, 0.1, 1.0)}));
  check("relu-neg", gradcheck([](const auto& in) { return relu(in[0]); },
                              {random_tensor(s, rng, -1.0, -0.1)}));
  check("sum", gradcheck([](const auto& in) { return sum(in[0]); },
                         {random_tensor(s, rng)}));
  check("row_dot",
        gradcheck([](const auto& in) { return row_dot(in[0], in[1]); },
                  {random_tensor(s, rng), random_tensor(s, rng)}));
  check("linear",
        gradcheck([](const auto& in) { return linear(in[0], in[1], in[2]); },
                  {random_tensor(s, rng), random_tensor({n, 3}, rng),
                   random_tensor({3}, rng)}));
  check("concat_rows", gradcheck(
                           [](const auto& in) {
                             const Tensor parts[] = {in[0], in[1]};
                             return concat_rows(parts);
                           },
                           {random_tensor(s, rng),
                            random_tensor({m + 1, n}, rng)}));
  check("concat_cols", gradcheck(
                           [](const auto& in) {
                             const Tensor parts[] = {in[0], in[1]};
                             return concat_cols(parts);
                           },
                           {random_tensor(s, rng),
                            random_tensor({m, n + 2}, rng)}));
  check("slice_rows",
        gradcheck([m](const auto& in) { return slice_rows(in[0], 1, m); },
                  {random_tensor(s, rng)}));
  check("slice_cols",
        gradcheck([n](const auto& in) { return slice_cols(in[0], 1, n); },
                  {random_tensor(s, rng)}));
  check("gather_rows", gradcheck(
                           [m](const auto& in) {
                             const std::size_t idx[] = {m - 1, 0, m - 1};
                             return gather_rows(in[0], idx);
                           },
                           {random_tensor(s, rng)}));
  check("zero_rows_from",
        gradcheck([](const auto& in) { return zero_rows_from(in[0], 1); },
                  {random_tensor(s, rng)}));
  check("embedding", gradcheck(
                         [](const auto& in) {
                           const std::uint32_t ids[] = {1, 0, 1, 2};
                           return embedding(in[0], ids);
                         },
                         {random_tensor({3, n}, rng)}));
  check("masked_softmax", gradcheck(
                              [m, n](const auto& in) {
                                Mask mask = Mask::causal(std::max(m, n));
                                Mask cut(m, n, false);
                                for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t j = 0; j < n; ++j)
                                    cut.set(i, j, mask.keep(i, j));
                                return masked_softmax(in[0], cut);
                              },
                              {random_tensor(s, rng, -3, 3)}));
  check("layer_norm",
        gradcheck([](const auto& in) {
                    return layer_norm(in[0], in[1], in[2]);
                  },
                  {random_tensor(s, rng, -2, 2), random_tensor({n}, rng),
                   random_tensor({n}, rng)}));
  check("cross_entropy", gradcheck(
                             [m](const auto& in) {
                               std::vector<std::uint32_t> t(m);
                               for (std::size_t i = 0; i < m; ++i)
                                 t[i] = static_cast<std::uint32_t>(i % 2 + 1);
                               t[0] = 0;  // padding
                               return cross_entropy(in[0], t, 0);
                             },
                             {random_tensor(s, rng, -2, 2)}));
  check("l2_distance_loss",
        gradcheck([](const auto& in) { return l2_distance_loss(in[0], in[1]); },
                  {random_tensor(s, rng), random_tensor(s, rng)}));
  check("masked_cumulative_mean",
        gradcheck([](const auto& in) { return masked_cumulative_mean(in[0]); },
                  {random_tensor(s, rng)}));
  check("ael_expand",
        gradcheck([](const auto& in) { return ael_expand(in[0], in[1]); },
                  {random_tensor(s, rng), random_tensor(s, rng)}));
}

}  // namespace simulst::testing
