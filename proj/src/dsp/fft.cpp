#include "mxtts/dsp/fft.hpp"

#include <map>

namespace mxtts::dsp {

template <typename T>
const FftPlan<T>& cached_plan(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<FftPlan<T>>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan<T>>(n);
  return *slot;
}

template const FftPlan<float>& cached_plan<float>(std::size_t);
template const FftPlan<double>& cached_plan<double>(std::size_t);

}  // namespace mxtts::dsp
