// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace splatjoint {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Base class for all recoverable engine errors. Subclasses carry the
/// contract-level error name so CLI/json layers can report it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

#define SPLATJOINT_DEFINE_ERROR(NAME)                        \
  class NAME : public Error {                                \
   public:                                                   \
    explicit NAME(const std::string& what = "")              \
        : Error(#NAME, what) {}                              \
  }

SPLATJOINT_DEFINE_ERROR(BehindCamera);
SPLATJOINT_DEFINE_ERROR(DimensionMismatch);
SPLATJOINT_DEFINE_ERROR(FormatError);
SPLATJOINT_DEFINE_ERROR(DimensionError);
SPLATJOINT_DEFINE_ERROR(EmptyMask);
SPLATJOINT_DEFINE_ERROR(NoCorrespondences);
SPLATJOINT_DEFINE_ERROR(DegenerateGeometry);
SPLATJOINT_DEFINE_ERROR(NoConsensus);
SPLATJOINT_DEFINE_ERROR(Diverged);
SPLATJOINT_DEFINE_ERROR(IllConditioned);
SPLATJOINT_DEFINE_ERROR(NotRevolute);
SPLATJOINT_DEFINE_ERROR(EmptySet);
SPLATJOINT_DEFINE_ERROR(SpecError);

#undef SPLATJOINT_DEFINE_ERROR

/// Deterministic random stream. Distribution transforms are implemented by
/// hand so that sequences are identical across standard libraries and
/// platforms, which the reproducibility contract requires.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) { return gen_() % n; }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  Vec3 unit_vector() {
    Vec3 v;
    do {
      v = Vec3(normal(), normal(), normal());
    } while (v.norm() < 1e-12);
    return v.normalized();
  }

  /// Independent child stream; `tag` decorrelates streams spawned from the
  /// same parent.
  RandomStream fork(std::uint64_t tag) {
    const std::uint64_t mixed = split_mix(gen_() ^ (tag * 0x9e3779b97f4a7c15ULL));
    return RandomStream(mixed);
  }

 private:
  static std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Process-wide worker cap (CLI --threads). 0 means hardware concurrency.
void set_worker_threads(int n);
int worker_threads();

/// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks whose
/// assignment to threads does not affect results: callers must write only to
/// per-index slots. Falls back to a serial loop for small n.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace splatjoint
