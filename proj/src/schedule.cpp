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

#include "simulst/schedule.hpp"

#include <algorithm>
#include <string>

#include "simulst/errors.hpp"

namespace simulst {

WaitKSchedule::WaitKSchedule(std::size_t k, std::size_t src_len)
    : k_(k), src_len_(src_len) {
  if (k == 0) throw ContractError("wait-k needs k >= 1");
  if (src_len == 0) throw ContractError("wait-k needs a nonempty source");
}

std::size_t WaitKSchedule::g(std::size_t t) const {
  if (t < 1) throw ContractError("g(t) is defined for t >= 1");
  return std::min(k_ + t - 1, src_len_);
}

std::vector<std::size_t> WaitKSchedule::visible(std::size_t steps) const {
  std::vector<std::size_t> out(steps);
  for (std::size_t t = 1; t <= steps; ++t) out[t - 1] = g(t);
  return out;
}

WaitKMasks build_masks(const WaitKSchedule& schedule, std::size_t steps) {
  if (steps < 1) throw ContractError("build_masks needs at least one step");
  const std::size_t n = schedule.src_len();
  const auto g = schedule.visible(steps);
  return {Mask::causal(n), Mask::prefix(g, n)};
}

}  // namespace simulst
