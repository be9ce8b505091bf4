#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bsamp/core.hpp"
#include "bsamp/evaluator.hpp"
#include "bsamp/rng.hpp"

namespace bsamp {

struct StructNode {
  enum class Kind : std::uint8_t { Atom, Class, Construct };
  Kind kind;
  int label;    // atom index / class index / ExprKind tag for constructs
  int alt = -1; // chosen union alternative on class nodes
  std::vector<std::uint32_t> children;
};

struct Structure {
  std::vector<StructNode> nodes;
  std::uint32_t root = 0;
  std::vector<std::int64_t> composition;  // per-atom occurrence counts

  std::int64_t total_size(const std::vector<int>& atom_sizes) const {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < composition.size(); ++i)
      n += composition[i] * atom_sizes[i];
    return n;
  }

  std::string to_sexpr(const SamplerTables& tables) const;
  std::string to_json(const SamplerTables& tables) const;
};

enum class CountKind { Geom, Pois, Loga };

// Component-count draws via inverse CDF with a running product.
// Geom(a): P(k) = (1-a) a^k, k >= 0.
// Pois(lambda): Poisson (split into additive chunks for large rates).
// Loga(lambda): P(k) = lambda^k / (k log(1/(1-lambda))), k >= 1.
long draw_component_count(CountKind kind, double param, Rng& rng);

struct SampleWindow {
  int atom = -1;  // -1: window over total weighted size
  double lo = 1.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct RawResult {
  std::optional<Structure> structure;  // nullopt = Overflow
  std::int64_t partial_size = 0;       // accumulated size at abort
};

// One Boltzmann draw with anticipated rejection at size_cap (on the
// window quantity).
RawResult sample_raw(const SamplerTables& tables, int cls, Rng& rng,
                     double size_cap, int window_atom = -1);

struct SampleReport {
  std::optional<Structure> structure;
  long attempts = 0;
  std::int64_t cumulative_size = 0;  // generated + rejected (T_n)
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string error;
  bool ok() const { return structure.has_value(); }
};

// Rejection sampling until the window quantity lands in [lo, hi]; one RNG
// stream per attempt.
SampleReport sample(const SamplerTables& tables, int cls,
                    const SampleWindow& window, std::uint64_t seed,
                    long max_attempts = 1000000);

// Interruptible sampling for right-linear (rational) systems: undershoot
// resumes the chain instead of discarding the prefix; overshoot restarts.
// Refuses non-rational systems.
SampleReport sample_interruptible(const SamplerTables& tables,
                                  const CoreSystem& core, int cls,
                                  const SampleWindow& window,
                                  std::uint64_t seed,
                                  long max_attempts = 1000000);

// True when every monomial of every class has at most one class
// reference, at scale 1 and power 1, and no scalar factors.
bool is_right_linear(const CoreSystem& core);

}  // namespace bsamp
