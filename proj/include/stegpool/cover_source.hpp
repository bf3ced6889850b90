#ifndef STEGPOOL_COVER_SOURCE_HPP
#define STEGPOOL_COVER_SOURCE_HPP

#include "stegpool/aligned.hpp"

#include <cstdint>
#include <vector>

namespace stegpool {

// Parameters of the synthetic cover law. Costs and residual variances are
// log-normal; heterogeneity shifts each image's cost scale by a uniform
// per-image offset, so some images are much cheaper to embed in than others.
struct CoverParams {
    int n_coeffs = 4096;
    double cost_log_mean = 0.0;
    double cost_log_sd = 1.0;
    double var_log_mean = 0.0;
    double var_log_sd = 0.5;
    double heterogeneity = 0.5;

    void validate() const;  // throws ParamError
};

// A synthetic image: per-coefficient embedding cost rho_i and cover-model
// residual variance sigma_i^2.
struct ImageModel {
    int id = 0;
    int n_coeffs = 0;
    AlignedVec costs;
    AlignedVec variances;
};

struct Bag {
    int bag_id = 0;
    std::vector<ImageModel> images;

    int size() const { return static_cast<int>(images.size()); }
    long long total_coeffs() const;
};

// Deterministic in (seed, id, params); sibling streams (costs, variances,
// per-image offset) are derived independently from the pair (seed, id).
ImageModel gen_image(std::uint64_t seed, int id, const CoverParams& params);

// b images with ids 0..b-1, each from child seed (seed, bag_id, index).
// Order-stable: any image can be regenerated without the others.
Bag gen_bag(std::uint64_t seed, int bag_id, int b, const CoverParams& params);

}  // namespace stegpool

#endif
