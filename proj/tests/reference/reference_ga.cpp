#include <algorithm>
#include <sstream>

#include "reference/reference.hpp"

namespace evogan::reference {

namespace {

void diverge(ReplayReport *report, const std::string &message) {
  if (report != nullptr && report->ok) {
    report->ok = false;
    report->divergence = message;
  }
}

int wheel_pick(const std::vector<float> &fitness, double u) {
  double total = 0.0;
  for (float f : fitness) {
    total += static_cast<double>(f);
  }
  const int n = static_cast<int>(fitness.size());
  if (total <= 0.0) {
    return std::min(n - 1, static_cast<int>(u * n));
  }
  const double target = u * total;
  double running = 0.0;
  for (int i = 0; i < n; ++i) {
    running += static_cast<double>(fitness[static_cast<std::size_t>(i)]);
    if (target < running) {
      return i;
    }
  }
  int last = n - 1;
  while (fitness[static_cast<std::size_t>(last)] <= 0.0f) {
    --last;
  }
  return last;
}

} // namespace

ReplayPopulation reference_ga_step(const ReplayPopulation &initial, const EvolveTrace &trace, bool crossover,
                                   double mutation_rate, double clamp_low, double clamp_high,
                                   ReplayReport *report) {
  ReplayPopulation pop = initial;
  const auto lo = static_cast<float>(clamp_low);
  const auto hi = static_cast<float>(clamp_high);
  for (std::size_t g = 0; g < trace.generations.size(); ++g) {
    const ReplayPopulation parents = pop;
    const auto &children = trace.generations[g].children;
    std::vector<Eigen::RowVectorXf> bred;
    for (std::size_t c = 0; c < children.size(); ++c) {
      const ChildRecord &rec = children[c];
      std::ostringstream where;
      where << "generation " << g + 1 << ", child " << c;
      const std::size_t n_parents = crossover ? 2 : 1;
      if (rec.selection_draws.size() != n_parents || rec.parents.size() != n_parents) {
        diverge(report, where.str() + ": expected " + std::to_string(n_parents) + " selection draws");
        return pop;
      }
      std::vector<int> chosen;
      for (std::size_t k = 0; k < n_parents; ++k) {
        chosen.push_back(wheel_pick(parents.fitness, rec.selection_draws[k]));
        if (chosen.back() != rec.parents[k]) {
          diverge(report, where.str() + ": roulette draw " + std::to_string(rec.selection_draws[k]) + " selects " +
                              std::to_string(chosen.back()) + ", engine recorded " + std::to_string(rec.parents[k]));
        }
      }
      Eigen::RowVectorXf child = parents.chromosomes[static_cast<std::size_t>(chosen[0])];
      if (crossover) {
        if (!rec.alpha) {
          diverge(report, where.str() + ": crossover child without alpha");
          return pop;
        }
        const auto alpha = static_cast<float>(*rec.alpha);
        const auto &pb = parents.chromosomes[static_cast<std::size_t>(chosen[1])];
        for (Eigen::Index i = 0; i < child.size(); ++i) {
          const float left = alpha * child(i);
          const float right = (1.0f - alpha) * pb(i);
          child(i) = left + right;
        }
      }
      if (mutation_rate > 0.0) {
        if (rec.mutation_draws.size() != static_cast<std::size_t>(child.size())) {
          diverge(report, where.str() + ": " + std::to_string(rec.mutation_draws.size()) +
                              " mutation draws for " + std::to_string(child.size()) + " genes");
          return pop;
        }
        std::size_t next_delta = 0;
        for (Eigen::Index i = 0; i < child.size(); ++i) {
          if (rec.mutation_draws[static_cast<std::size_t>(i)] < mutation_rate) {
            if (next_delta >= rec.mutation_deltas.size()) {
              diverge(report, where.str() + ": ran out of mutation deltas at gene " + std::to_string(i));
              return pop;
            }
            const float moved = child(i) + static_cast<float>(rec.mutation_deltas[next_delta++]);
            child(i) = moved < lo ? lo : (moved > hi ? hi : moved);
          }
        }
        if (next_delta != rec.mutation_deltas.size()) {
          diverge(report, where.str() + ": unused mutation deltas");
        }
      }
      bred.push_back(child);
    }
    for (std::size_t c = 0; c < children.size(); ++c) {
      const auto fitness = static_cast<float>(children[c].fitness);
      std::size_t worst = 0;
      for (std::size_t i = 1; i < pop.fitness.size(); ++i) {
        if (pop.fitness[i] < pop.fitness[worst]) {
          worst = i;
        }
      }
      std::optional<std::size_t> replaced;
      if (fitness > pop.fitness[worst]) {
        pop.chromosomes[worst] = bred[c];
        pop.fitness[worst] = fitness;
        replaced = worst;
      }
      if (replaced != children[c].replaced) {
        std::ostringstream os;
        os << "generation " << g + 1 << ", child " << c << ": rule replaces "
           << (replaced ? std::to_string(*replaced) : "nothing") << ", engine replaced "
           << (children[c].replaced ? std::to_string(*children[c].replaced) : "nothing");
        diverge(report, os.str());
      }
    }
  }
  return pop;
}

ReplayPopulation sorted_by_fitness(const ReplayPopulation &pop) {
  std::vector<std::size_t> order(pop.fitness.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&pop](std::size_t a, std::size_t b) { return pop.fitness[a] > pop.fitness[b]; });
  ReplayPopulation out;
  for (std::size_t i : order) {
    out.chromosomes.push_back(pop.chromosomes[i]);
    out.fitness.push_back(pop.fitness[i]);
  }
  return out;
}

ReplayReport compare_with_engine(const ReplayPopulation &replay, const EvolveResult<float> &engine) {
  ReplayReport report;
  if (static_cast<Eigen::Index>(replay.chromosomes.size()) != engine.images.batch()) {
    diverge(&report, "population sizes differ");
    return report;
  }
  for (std::size_t r = 0; r < replay.chromosomes.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    if (replay.fitness[r] != engine.fitness(row)) {
      std::ostringstream os;
      os << "individual " << r << ": fitness " << replay.fitness[r] << " vs engine " << engine.fitness(row);
      diverge(&report, os.str());
      return report;
    }
    for (Eigen::Index g = 0; g < replay.chromosomes[r].size(); ++g) {
      if (replay.chromosomes[r](g) != engine.images.pixels(row, g)) {
        std::ostringstream os;
        os.precision(9);
        os << "individual " << r << ", gene " << g << ": replay " << replay.chromosomes[r](g) << " vs engine "
           << engine.images.pixels(row, g);
        diverge(&report, os.str());
        return report;
      }
    }
  }
  return report;
}

} // namespace evogan::reference
