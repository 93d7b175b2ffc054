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

#include <cstddef>
#include <vector>

#include "simulst/tensor.hpp"

namespace simulst {

// Wait-k read/write schedule: before emitting target token t (1-based) the
// decoder has read g(t) = min(k + t - 1, n) source tokens.
class WaitKSchedule {
 public:
  WaitKSchedule(std::size_t k, std::size_t src_len);

  std::size_t k() const noexcept { return k_; }
  std::size_t src_len() const noexcept { return src_len_; }

  std::size_t g(std::size_t t) const;
  // g(1), ..., g(steps).
  std::vector<std::size_t> visible(std::size_t steps) const;

 private:
  std::size_t k_;
  std::size_t src_len_;
};

struct WaitKMasks {
  Mask encoder;  // causal n x n source mask
  Mask cross;    // row t keeps source positions [0, g(t+1))
};

WaitKMasks build_masks(const WaitKSchedule& schedule, std::size_t steps);

}  // namespace simulst
