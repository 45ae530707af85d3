#include "evogan/ga_engine.hpp"

#include <atomic>

namespace evogan {

namespace {
std::atomic<std::int64_t> g_evolve_calls{0};
} // namespace

std::int64_t evolve_call_count() { return g_evolve_calls.load(); }
void count_evolve_call() { ++g_evolve_calls; }

void GAConfig::validate() const {
  if (generations < 1) {
    throw std::invalid_argument("ga: generations must be >= 1");
  }
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw std::invalid_argument("ga: mutation_rate must lie in [0, 1]");
  }
  if (mutation_rate > 0.0 && !(mutation_scale > 0.0)) {
    throw std::invalid_argument("ga: mutation_scale must be positive");
  }
  if (!(clamp_low < clamp_high)) {
    throw std::invalid_argument("ga: clamp range is empty");
  }
}

int GAConfig::offspring_for(Eigen::Index population_size) const {
  if (offspring_per_generation >= 0) {
    return offspring_per_generation;
  }
  return std::max(1, static_cast<int>(population_size / 2));
}

} // namespace evogan
