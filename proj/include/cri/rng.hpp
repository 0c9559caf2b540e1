#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cri {

// Every random quantity in the library is drawn from an engine keyed by
// (seed, stream, counter). Streams separate independent consumers so that
// adding draws to one never shifts another.
enum class Stream : std::uint64_t {
  GeneratorWeights = 1,
  ExtractorWeights = 2,
  LatentSamples = 3,
  KMeansInit = 4,
  LocalitySamples = 5,
  HeldOut = 6,
  Targets = 7,
  Probes = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t counter = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ (counter * 0xD1B54A32D192ED03ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t counter = 0) {
  return Engine(derive_seed(seed, stream, counter));
}

inline std::vector<double> normal_vector(Engine& engine, std::size_t n, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(engine);
  return out;
}

}  // namespace cri
