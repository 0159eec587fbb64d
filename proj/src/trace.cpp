#include "nvspin/trace.hpp"

namespace nvspin {

std::vector<double> TraceSeries::durations() const {
  std::vector<double> d;
  d.reserve(samples.size());
  for (const auto& s : samples) d.push_back(s.duration);
  return d;
}

std::vector<double> TraceSeries::signals() const {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.signal);
  return v;
}

bool TraceSeries::strictly_increasing() const {
  for (std::size_t k = 1; k < samples.size(); ++k)
    if (!(samples[k].duration > samples[k - 1].duration)) return false;
  return true;
}

}  // namespace nvspin
