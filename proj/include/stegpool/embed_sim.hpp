#ifndef STEGPOOL_EMBED_SIM_HPP
#define STEGPOOL_EMBED_SIM_HPP

#include "stegpool/cover_source.hpp"

#include <span>
#include <vector>

namespace stegpool {

// Ternary +-1 change rate at Lagrange multiplier lambda and cost rho:
//   beta = e^(-lambda*rho) / (1 + 2 e^(-lambda*rho)),  in (0, 1/3].
double change_rate(double lambda, double cost);

// H3(beta) = -2 beta log2 beta - (1-2 beta) log2(1-2 beta), bits; 0 log 0 = 0.
double ternary_entropy(double beta);

enum class SolveTarget { Payload, Distortion, Deflection };

const char* to_string(SolveTarget t);

// Embedding state of one image at a fixed multiplier.
//   payload_bits = sum_i H3(beta_i)
//   distortion   = sum_i 2 beta_i rho_i
//   deflection   = 2 sum_i beta_i^2 / sigma_i^4
struct EmbedSolution {
    double lambda = 0;
    std::vector<double> change_rates;
    double payload_bits = 0;
    double distortion = 0;
    double deflection = 0;
};

EmbedSolution evaluate(const ImageModel& image, double lambda);

// Value of the targeted functional as lambda -> 0 (its supremum).
double functional_sup(const ImageModel& image, SolveTarget target);

// Finds lambda such that the targeted functional equals value, to relative
// tolerance 1e-9 (absolute 1e-12 near zero). Throws InfeasibleError when the
// value exceeds the supremum.
EmbedSolution solve_lambda(const ImageModel& image, SolveTarget target, double value);

// Non-owning view of one image's cost/variance maps with the solver core.
// Used by the spreading strategies, which solve on the same image many times
// with warm starts. Views the caller's data; not safe to share one instance
// across threads (holds scratch).
class EmbedProblem {
  public:
    EmbedProblem(std::span<const double> costs, std::span<const double> variances);

    std::size_t size() const { return costs_.size(); }
    double sup(SolveTarget target) const;

    // Functional value at lambda; optionally its d/dlambda.
    double eval(SolveTarget target, double lambda, double* deriv = nullptr) const;

    // Root of eval(target, lambda) == value. lambda_hint <= 0 means cold start.
    double solve(SolveTarget target, double value, double lambda_hint = 0) const;

    static constexpr double kLambdaLo = 1e-12;
    static constexpr double kLambdaCap = 1e300;
    static constexpr double kRelTol = 1e-9;
    static constexpr double kAbsTol = 1e-12;

  private:
    std::span<const double> costs_;
    std::span<const double> variances_;
    double max_cost_ = 0;
    mutable AlignedVec inv_var4_;  // filled on first deflection eval
    mutable AlignedVec scratch_;

    void ensure_weights() const;
};

}  // namespace stegpool

#endif
