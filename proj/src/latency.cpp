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

#include "simulst/latency.hpp"

#include "simulst/errors.hpp"

namespace simulst {

Lagging average_lagging(const DecodeTrace& trace) {
  if (trace.src_len == 0) throw ContractError("trace without a source length");
  if (trace.g.size() != trace.tgt_len) {
    throw ContractError("trace lists " + std::to_string(trace.g.size()) +
                        " g values for " + std::to_string(trace.tgt_len) +
                        " target tokens");
  }
  Lagging out;
  if (trace.tgt_len == 0) {
    out.truncated = true;
    return out;
  }
  out.tau = trace.tgt_len;
  out.truncated = true;
  for (std::size_t i = 0; i < trace.g.size(); ++i) {
    if (trace.g[i] >= trace.src_len) {
      out.tau = i + 1;
      out.truncated = false;
      break;
    }
  }
  const double ratio = static_cast<double>(trace.tgt_len) /
                       static_cast<double>(trace.src_len);
  double sum = 0.0;
  for (std::size_t i = 1; i <= out.tau; ++i) {
    sum += static_cast<double>(trace.g[i - 1]) - static_cast<double>(i - 1) / ratio;
  }
  out.al = sum / static_cast<double>(out.tau);
  return out;
}

}  // namespace simulst
