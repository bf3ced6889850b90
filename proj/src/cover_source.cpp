#include "stegpool/cover_source.hpp"

#include "stegpool/errors.hpp"
#include "stegpool/rng.hpp"

#include <cmath>
#include <string>

namespace stegpool {

void CoverParams::validate() const {
    if (n_coeffs < 1) throw ParamError("CoverParams: n_coeffs must be >= 1");
    if (cost_log_sd < 0) throw ParamError("CoverParams: cost_log_sd must be >= 0");
    if (var_log_sd < 0) throw ParamError("CoverParams: var_log_sd must be >= 0");
    if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0))
        throw ParamError("CoverParams: heterogeneity must be in [0,1]");
    if (!std::isfinite(cost_log_mean) || !std::isfinite(var_log_mean))
        throw ParamError("CoverParams: log means must be finite");
}

long long Bag::total_coeffs() const {
    long long total = 0;
    for (const auto& img : images) total += img.n_coeffs;
    return total;
}

ImageModel gen_image(std::uint64_t seed, int id, const CoverParams& params) {
    params.validate();
    if (id < 0) throw ParamError("gen_image: id must be >= 0");

    const std::uint64_t img_seed = seed_child(seed, static_cast<std::uint64_t>(id));

    SplitMix64 rng_offset(seed_child(img_seed, seed_tag::offset));
    const double h = params.heterogeneity;
    const double s_img = -h + 2.0 * h * rng_offset.uniform01();

    ImageModel img;
    img.id = id;
    img.n_coeffs = params.n_coeffs;
    img.costs.resize(static_cast<std::size_t>(params.n_coeffs));
    img.variances.resize(static_cast<std::size_t>(params.n_coeffs));

    SplitMix64 rng_costs(seed_child(img_seed, seed_tag::costs));
    fill_lognormal(rng_costs, params.cost_log_mean + s_img, params.cost_log_sd, img.costs);

    SplitMix64 rng_vars(seed_child(img_seed, seed_tag::variances));
    fill_lognormal(rng_vars, params.var_log_mean, params.var_log_sd, img.variances);

    return img;
}

Bag gen_bag(std::uint64_t seed, int bag_id, int b, const CoverParams& params) {
    if (b < 1) throw ParamError("gen_bag: b must be >= 1, got " + std::to_string(b));
    params.validate();

    const std::uint64_t bag_seed = seed_child(seed, static_cast<std::uint64_t>(bag_id));
    Bag bag;
    bag.bag_id = bag_id;
    bag.images.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i)
        bag.images.push_back(gen_image(bag_seed, i, params));
    return bag;
}

}  // namespace stegpool
