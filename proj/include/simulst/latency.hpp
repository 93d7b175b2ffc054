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

#include "simulst/streaming.hpp"

namespace simulst {

struct Lagging {
  double al = 0.0;
  std::size_t tau = 0;
  // The source was never fully read; tau fell back to the target length.
  bool truncated = false;
};

// Average Lagging in source tokens:
//
//   AL = (1/tau) * sum_{i=1..tau} [ g(i) - (i-1) * |x| / |y| ]
//
// with tau the first step whose g(i) equals |x|. An empty output has no
// lagging to measure and yields AL 0, flagged as truncated.
Lagging average_lagging(const DecodeTrace& trace);

}  // namespace simulst
