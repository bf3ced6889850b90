#ifndef STEGPOOL_SID_HPP
#define STEGPOOL_SID_HPP

#include "stegpool/cover_source.hpp"
#include "stegpool/spreading.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace stegpool {

// Quantitative single-image detector model: score responds linearly to the
// true embedding rate, with a per-image offset (fixed across payloads) and a
// fresh estimation error, clamped to +-saturation.
struct SidParams {
    double gain = 1.0;
    double bias = 0.0;
    double sigma_between = 0.11;
    double sigma_within = 0.05;
    double saturation = 2.0;

    void validate() const;  // throws ParamError
};

enum class BagLabel { Cover, Stego };

struct ScoredBag {
    int bag_id = 0;
    std::vector<double> scores;
    BagLabel label = BagLabel::Cover;
    std::optional<StrategyId> strategy;  // nullopt for cover bags
    std::vector<double> true_rates;      // bpc, diagnostics

    int size() const { return static_cast<int>(scores.size()); }
};

// Deterministic in (seed, image.id, rate, params). The between-image offset
// depends only on (seed, image.id), so rescoring the same image at another
// payload moves the score by exactly gain * delta_rate when sigma_within = 0.
double score_image(std::uint64_t seed, const ImageModel& image, double rate_bpc,
                   const SidParams& params);

// allocation == nullptr scores the bag as cover (all rates zero).
ScoredBag score_bag(std::uint64_t seed, const Bag& bag, const Allocation* allocation,
                    const SidParams& params);

// CSV schema: bag_id,image_id,score,label,strategy,rate_bpc
void write_scores_csv(std::ostream& os, std::span<const ScoredBag> bags);
std::vector<ScoredBag> load_scores(std::istream& is, const std::string& name);
std::vector<ScoredBag> load_scores(const std::filesystem::path& path);

}  // namespace stegpool

#endif
