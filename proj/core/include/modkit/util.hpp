#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace modkit {

// Platform-independent hashing. Everything seeded in this library goes
// through these so that results are reproducible across runs, compilers
// and machines (std::hash and distribution objects are not portable).

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = kFnvOffset;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits.
inline double unit_from_hash(std::uint64_t hash) {
  return static_cast<double>(hash >> 11) * 0x1.0p-53;
}

// Small counter-based RNG stream; deterministic and seed-isolated.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }

  double next_unit() { return unit_from_hash(next()); }

  // Unbiased bounded draw (rejection on the tail).
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t draw = next();
    while (draw >= limit) draw = next();
    return draw % bound;
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates with the portable stream above.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SeededRng rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Whole-word, case-insensitive (ASCII) containment. "skill" does not
// contain the word "kill".
bool contains_word(std::string_view text, std::string_view word);

std::string to_lower_ascii(std::string_view text);

std::string trim(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

// "{hex16}" of a hash, for compact deterministic identifiers.
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace modkit
