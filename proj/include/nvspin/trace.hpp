#pragma once

#include <cstdint>
#include <vector>

#include "nvspin/spin_core.hpp"

namespace nvspin {

struct TraceSample {
  double duration = 0.0;  // s
  double signal = 0.0;
};

struct TraceMeta {
  HamiltonianParams params;
  std::uint64_t seed = 0;
  std::uint64_t trace_index = 0;
};

struct TraceSeries {
  std::vector<TraceSample> samples;
  TraceMeta meta;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<double> durations() const;
  std::vector<double> signals() const;
  bool strictly_increasing() const;
};

}  // namespace nvspin
