#ifndef STEGPOOL_SPREADING_HPP
#define STEGPOOL_SPREADING_HPP

#include "stegpool/cover_source.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stegpool {

enum class Strategy { Greedy, Linear, UsesBeta, IMS, DeLS, DiLS };

constexpr Strategy kAllStrategies[] = {Strategy::Greedy, Strategy::Linear, Strategy::UsesBeta,
                                       Strategy::IMS,    Strategy::DeLS,   Strategy::DiLS};

struct StrategyId {
    Strategy kind = Strategy::Linear;
    double beta = 0.5;  // Uses-beta carrier fraction; ignored by the others
};

std::string to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);  // throws ParamError

// Per-image payload in bits for one bag.
struct Allocation {
    std::vector<double> bits_per_image;
    StrategyId strategy;
    double total_bits = 0;
};

// bptc * total coefficient count of the bag.
double total_bits_for(const Bag& bag, double bptc);

// Seed-ordered fill, each visited image up to 1 bit per coefficient.
Allocation spread_greedy(const Bag& bag, double total_bits, std::uint64_t seed);

// Even split across all b images.
Allocation spread_linear(const Bag& bag, double total_bits);

// Even split across ceil(beta*b) randomly selected carriers.
Allocation spread_uses_beta(const Bag& bag, double total_bits, double beta, std::uint64_t seed);

// One multiplier solved over the merged cost map of the whole bag.
Allocation spread_ims(const Bag& bag, double total_bits);

// Every image embeds at the same deflection level d*.
Allocation spread_dels(const Bag& bag, double total_bits);

// Every image embeds at the same distortion level.
Allocation spread_dils(const Bag& bag, double total_bits);

Allocation spread(const Bag& bag, double total_bits, StrategyId strategy, std::uint64_t seed);

// CSV export: bag_id,image_id,bits,strategy
void write_allocations_csv_header(std::ostream& os);
void write_allocation_csv(std::ostream& os, int bag_id, const Allocation& alloc);

}  // namespace stegpool

#endif
