#ifndef STEGPOOL_RNG_HPP
#define STEGPOOL_RNG_HPP

#include <cstdint>
#include <span>

namespace stegpool {

// splitmix64 finalizer (Steele/Lea/Flood mix).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a parent seed and a stream key.
// Chaining calls gives hierarchical streams: bag -> image -> costs/vars.
constexpr std::uint64_t seed_child(std::uint64_t parent, std::uint64_t key) {
    return mix64(parent + 0x9e3779b97f4a7c15ULL + mix64(key ^ 0xd1b54a32d192ed03ULL));
}

// Stream purpose tags, so sibling streams never collide.
namespace seed_tag {
constexpr std::uint64_t costs = 0x636f7374;    // "cost"
constexpr std::uint64_t variances = 0x76617273;// "vars"
constexpr std::uint64_t offset = 0x6f666673;   // "offs"
constexpr std::uint64_t order = 0x6f726472;    // "ordr"
constexpr std::uint64_t select = 0x73656c63;   // "selc"
constexpr std::uint64_t between = 0x6274776e;  // "btwn"
constexpr std::uint64_t within = 0x7769746e;   // "witn"
constexpr std::uint64_t image = 0x696d6167;    // "imag"
constexpr std::uint64_t score = 0x73636f72;    // "scor"
constexpr std::uint64_t cover = 0x636f7672;    // "covr"
constexpr std::uint64_t stego = 0x73746567;    // "steg"
constexpr std::uint64_t train = 0x7472616e;    // "tran"
constexpr std::uint64_t test = 0x74657374;     // "test"
constexpr std::uint64_t svm = 0x73766d5fULL;   // "svm_"
}  // namespace seed_tag

// Minimal counter-based PRNG (splitmix64 sequence). Cheap to seed, no
// warm-up, every (seed) gives an independent-looking stream.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return mix64(state_ += 0x9e3779b97f4a7c15ULL); }

    // Uniform double in [0, 1), 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n), Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n);

  private:
    std::uint64_t state_;
};

// Array fills. One implementation each; everything downstream inherits
// bit-for-bit reproducibility from these.
void fill_uniform01(SplitMix64& rng, std::span<double> out);
// Standard normals by inverse CDF (AS241); one 64-bit draw per element.
void fill_normal(SplitMix64& rng, std::span<double> out);
// exp(mu + sd * z) with z standard normal.
void fill_lognormal(SplitMix64& rng, double mu, double sd, std::span<double> out);

double draw_normal(SplitMix64& rng);

// Fisher-Yates; permutes idx in place.
void shuffle_indices(SplitMix64& rng, std::span<int> idx);

}  // namespace stegpool

#endif
