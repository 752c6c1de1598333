#ifndef GROUNDHOG_RNG_H_
#define GROUNDHOG_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace groundhog {

// Stateless 64-bit mix; used to derive per-component and per-sample seeds
// from one master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Named streams, so components never share random draws.
enum class SeedStream : std::uint64_t {
  kInit = 1,
  kSampler = 2,
  kCorpus = 3,
  kHeldOut = 4,
  kTaskSlots = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream s) {
  return derive_seed(master, static_cast<std::uint64_t>(s) << 40);
}

// mt19937_64 with distribution code written out, so draws are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform integer in [lo, hi].
  int range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace groundhog

#endif  // GROUNDHOG_RNG_H_
