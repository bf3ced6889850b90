#include "stegpool/spreading.hpp"

#include "stegpool/embed_sim.hpp"
#include "stegpool/errors.hpp"
#include "stegpool/rng.hpp"
#include "stegpool/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace stegpool {

namespace {

constexpr double kLog2Of3 = 1.5849625007211562;
constexpr double kGreedyCapBpc = 1.0;

void check_total(double total_bits) {
    if (!(total_bits >= 0) || !std::isfinite(total_bits))
        throw ParamError("spread: total_bits must be finite and >= 0");
}

Allocation make_allocation(const Bag& bag, StrategyId id, double total_bits) {
    Allocation a;
    a.bits_per_image.assign(static_cast<std::size_t>(bag.size()), 0.0);
    a.strategy = id;
    a.total_bits = total_bits;
    return a;
}

// Common outer loop of DeLS and DiLS: find the per-image level d* of the
// given functional at which the per-image payloads sum to total_bits.
// Sum of payloads is strictly increasing in d, so a bracketed secant
// (Illinois) search is safe; inner solves are warm-started per image.
Allocation spread_equalized(const Bag& bag, double total_bits, SolveTarget target,
                            StrategyId id) {
    check_total(total_bits);
    Allocation alloc = make_allocation(bag, id, total_bits);
    if (total_bits == 0) return alloc;

    const std::size_t b = static_cast<std::size_t>(bag.size());
    std::vector<EmbedProblem> problems;
    problems.reserve(b);
    for (const auto& img : bag.images)
        problems.emplace_back(img.costs, img.variances);

    // d can be no larger than the smallest per-image supremum.
    double d_max = problems[0].sup(target);
    for (std::size_t i = 1; i < b; ++i) d_max = std::min(d_max, problems[i].sup(target));

    // Inner solves are warm-started by extrapolating each image's multiplier
    // across levels: lambda(d) is close to a power law, so two previous
    // (level, lambda) pairs predict the next solution within a few percent.
    std::vector<double> lam_prev(b, 0.0), lev_prev(b, 0.0);
    std::vector<double> lam_cur(b, 0.0), lev_cur(b, 0.0);
    auto payload_sum_at = [&](double d) {
        double sum = 0;
        for (std::size_t i = 0; i < b; ++i) {
            double hint = lam_cur[i];
            if (lam_prev[i] > 0 && lam_cur[i] > 0 && lev_prev[i] != lev_cur[i] &&
                lev_cur[i] > 0) {
                const double e = std::log(lam_cur[i] / lam_prev[i]) /
                                 std::log(lev_cur[i] / lev_prev[i]);
                const double guess = lam_cur[i] * std::exp(e * std::log(d / lev_cur[i]));
                if (std::isfinite(guess) && guess > 0) hint = guess;
            }
            const double lambda = problems[i].solve(target, d, hint);
            lam_prev[i] = lam_cur[i];
            lev_prev[i] = lev_cur[i];
            lam_cur[i] = lambda;
            lev_cur[i] = d;
            alloc.bits_per_image[i] = problems[i].eval(SolveTarget::Payload, lambda);
            sum += alloc.bits_per_image[i];
        }
        return sum;
    };

    const double cap = payload_sum_at(d_max);
    if (total_bits > cap * (1.0 + EmbedProblem::kRelTol))
        throw InfeasibleError("spread " + to_string(id.kind) + ": total " +
                              fmt_double(total_bits) + " bits exceeds equal-" +
                              std::string(to_string(target)) + " capacity " + fmt_double(cap));

    const double tol = std::max(EmbedProblem::kRelTol * total_bits, EmbedProblem::kAbsTol);
    if (std::abs(cap - total_bits) <= tol) return alloc;  // exactly at capacity

    // T(d) is increasing and close to a power law, so secant iteration in
    // (log d, log T) converges in a handful of steps. A bracket in log d is
    // maintained and the secant step clamped into it.
    const double target_log = std::log(total_bits);
    double x_hi = std::log(d_max), y_hi = std::log(cap) - target_log;  // y_hi >= 0
    double x_lo = -std::numeric_limits<double>::infinity(), y_lo = 0;
    bool have_lo = false;
    // first probe from the power-law extrapolation through (d_max, cap)
    double x = x_hi - 1.4 * (std::log(cap) - target_log);
    double x_prev = x_hi, y_prev = y_hi;
    for (int iter = 0; iter < 200; ++iter) {
        const double sum = payload_sum_at(std::exp(x));
        if (std::abs(sum - total_bits) <= tol) return alloc;
        const double y = std::log(sum) - target_log;
        if (y < 0) {
            x_lo = x;
            y_lo = y;
            have_lo = true;
        } else {
            x_hi = x;
            y_hi = y;
        }
        double x_next;
        if (y != y_prev && std::isfinite(y)) {
            x_next = x - y * (x - x_prev) / (y - y_prev);
        } else {
            x_next = x - 1.0;
        }
        if (!have_lo) {
            // still above the target everywhere probed: jump further down
            x_next = std::min(x_next, x_hi - std::max(1.0, 2.0 * std::abs(x - x_prev)));
        } else if (!(x_next > x_lo && x_next < x_hi)) {
            x_next = 0.5 * (x_lo + x_hi);
        }
        x_prev = x;
        y_prev = y;
        if (x_next == x) break;  // resolution limit
        x = x_next;
    }
    const double sum = payload_sum_at(std::exp(x));
    if (std::abs(sum - total_bits) <= 1e3 * tol) return alloc;
    throw InfeasibleError("spread " + to_string(id.kind) + ": level search did not converge");
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Greedy: return "greedy";
        case Strategy::Linear: return "linear";
        case Strategy::UsesBeta: return "usesbeta";
        case Strategy::IMS: return "ims";
        case Strategy::DeLS: return "dels";
        case Strategy::DiLS: return "dils";
    }
    return "?";
}

Strategy strategy_from_string(std::string_view name) {
    for (Strategy s : kAllStrategies)
        if (to_string(s) == name) return s;
    throw ParamError("unknown strategy: " + std::string(name));
}

double total_bits_for(const Bag& bag, double bptc) {
    if (!(bptc >= 0)) throw ParamError("total_bits_for: bptc must be >= 0");
    return bptc * static_cast<double>(bag.total_coeffs());
}

Allocation spread_greedy(const Bag& bag, double total_bits, std::uint64_t seed) {
    check_total(total_bits);
    double capacity = 0;
    for (const auto& img : bag.images) capacity += kGreedyCapBpc * img.n_coeffs;
    if (total_bits > capacity * (1.0 + 1e-12))
        throw InfeasibleError("spread greedy: total " + fmt_double(total_bits) +
                              " bits exceeds 1 bpc capacity " + fmt_double(capacity));

    Allocation alloc = make_allocation(bag, {Strategy::Greedy, 0.5}, total_bits);
    std::vector<int> order(static_cast<std::size_t>(bag.size()));
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed_child(seed, seed_tag::order));
    shuffle_indices(rng, order);

    double remaining = total_bits;
    for (int idx : order) {
        if (remaining <= 0) break;
        const double cap = kGreedyCapBpc * bag.images[static_cast<std::size_t>(idx)].n_coeffs;
        const double take = std::min(remaining, cap);
        alloc.bits_per_image[static_cast<std::size_t>(idx)] = take;
        remaining -= take;
    }
    return alloc;
}

Allocation spread_linear(const Bag& bag, double total_bits) {
    check_total(total_bits);
    const double share = total_bits / bag.size();
    for (const auto& img : bag.images)
        if (share > kLog2Of3 * img.n_coeffs * (1.0 + 1e-12))
            throw InfeasibleError("spread linear: share " + fmt_double(share) +
                                  " bits exceeds ternary capacity of image " +
                                  std::to_string(img.id));
    Allocation alloc = make_allocation(bag, {Strategy::Linear, 0.5}, total_bits);
    for (double& bits : alloc.bits_per_image) bits = share;
    return alloc;
}

Allocation spread_uses_beta(const Bag& bag, double total_bits, double beta, std::uint64_t seed) {
    check_total(total_bits);
    if (!(beta > 0.0 && beta <= 1.0)) throw ParamError("spread usesbeta: beta must be in (0,1]");
    const int b = bag.size();
    const int k = static_cast<int>(std::ceil(beta * b));

    std::vector<int> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed_child(seed, seed_tag::select));
    shuffle_indices(rng, order);

    const double share = total_bits / k;
    Allocation alloc = make_allocation(bag, {Strategy::UsesBeta, beta}, total_bits);
    for (int j = 0; j < k; ++j) {
        const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(j)]);
        const auto& img = bag.images[idx];
        if (share > kLog2Of3 * img.n_coeffs * (1.0 + 1e-12))
            throw InfeasibleError("spread usesbeta: share " + fmt_double(share) +
                                  " bits exceeds ternary capacity of image " +
                                  std::to_string(img.id));
        alloc.bits_per_image[idx] = share;
    }
    return alloc;
}

Allocation spread_ims(const Bag& bag, double total_bits) {
    check_total(total_bits);
    Allocation alloc = make_allocation(bag, {Strategy::IMS, 0.5}, total_bits);
    if (total_bits == 0) return alloc;

    AlignedVec merged;
    merged.reserve(static_cast<std::size_t>(bag.total_coeffs()));
    for (const auto& img : bag.images)
        merged.insert(merged.end(), img.costs.begin(), img.costs.end());

    EmbedProblem whole(merged, {});
    // Warm-start the merged solve from a single-image subproblem; images are
    // statistically alike, so its multiplier lands near the merged one.
    double hint = 0;
    if (bag.size() > 1) {
        const auto& first = bag.images.front();
        const double share =
            total_bits * static_cast<double>(first.n_coeffs) /
            static_cast<double>(bag.total_coeffs());
        EmbedProblem one(first.costs, {});
        if (share < one.sup(SolveTarget::Payload)) {
            try {
                hint = one.solve(SolveTarget::Payload, share);
            } catch (const InfeasibleError&) {
                hint = 0;
            }
        }
    }
    double lambda;
    try {
        lambda = whole.solve(SolveTarget::Payload, total_bits, hint);
    } catch (const InfeasibleError&) {
        throw InfeasibleError("spread ims: total " + fmt_double(total_bits) +
                              " bits exceeds ternary capacity " + fmt_double(whole.sup(SolveTarget::Payload)));
    }
    for (std::size_t i = 0; i < bag.images.size(); ++i) {
        EmbedProblem one(bag.images[i].costs, {});
        alloc.bits_per_image[i] = one.eval(SolveTarget::Payload, lambda);
    }
    return alloc;
}

Allocation spread_dels(const Bag& bag, double total_bits) {
    return spread_equalized(bag, total_bits, SolveTarget::Deflection, {Strategy::DeLS, 0.5});
}

Allocation spread_dils(const Bag& bag, double total_bits) {
    return spread_equalized(bag, total_bits, SolveTarget::Distortion, {Strategy::DiLS, 0.5});
}

Allocation spread(const Bag& bag, double total_bits, StrategyId strategy, std::uint64_t seed) {
    switch (strategy.kind) {
        case Strategy::Greedy: return spread_greedy(bag, total_bits, seed);
        case Strategy::Linear: return spread_linear(bag, total_bits);
        case Strategy::UsesBeta: return spread_uses_beta(bag, total_bits, strategy.beta, seed);
        case Strategy::IMS: return spread_ims(bag, total_bits);
        case Strategy::DeLS: return spread_dels(bag, total_bits);
        case Strategy::DiLS: return spread_dils(bag, total_bits);
    }
    throw ParamError("spread: unknown strategy");
}

void write_allocations_csv_header(std::ostream& os) { os << "bag_id,image_id,bits,strategy\n"; }

void write_allocation_csv(std::ostream& os, int bag_id, const Allocation& alloc) {
    for (std::size_t i = 0; i < alloc.bits_per_image.size(); ++i)
        os << bag_id << ',' << i << ',' << fmt_double(alloc.bits_per_image[i]) << ','
           << to_string(alloc.strategy.kind) << '\n';
}

}  // namespace stegpool
