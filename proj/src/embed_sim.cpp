#include "stegpool/embed_sim.hpp"

#include "stegpool/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>

namespace stegpool {

namespace {

constexpr double kInvLn2 = 1.4426950408889634;  // 1/ln 2
constexpr double kLog2Of3 = 1.5849625007211562;

using ArrayMap = Eigen::Map<const Eigen::ArrayXd>;

ArrayMap as_array(std::span<const double> v) {
    return ArrayMap(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double change_rate(double lambda, double cost) {
    if (!(lambda >= 0)) throw ParamError("change_rate: lambda must be >= 0");
    if (!(cost >= 0)) throw ParamError("change_rate: cost must be >= 0");
    const double u = std::exp(-lambda * cost);
    return u / (1.0 + 2.0 * u);
}

double ternary_entropy(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0 / 3.0 + 1e-12))
        throw ParamError("ternary_entropy: beta must be in [0, 1/3]");
    if (beta <= 0.0) return 0.0;
    const double b = std::min(beta, 1.0 / 3.0);
    const double q = 1.0 - 2.0 * b;
    double h = -2.0 * b * std::log2(b);
    if (q > 0.0) h -= q * std::log2(q);
    return h;
}

const char* to_string(SolveTarget t) {
    switch (t) {
        case SolveTarget::Payload: return "payload";
        case SolveTarget::Distortion: return "distortion";
        case SolveTarget::Deflection: return "deflection";
    }
    return "?";
}

namespace {

// exp(-t) with an exact zero limit: the vectorized exp clamps its argument
// instead of underflowing, so lanes beyond the underflow threshold are
// zeroed. The scalar fixup runs only when the largest t crosses it.
void exp_neg_masked(Eigen::Map<Eigen::ArrayXd>& u, const ArrayMap& rho, double lambda,
                    double max_cost) {
    u = (-lambda * rho).exp();
    if (lambda * max_cost > 708.0)
        for (Eigen::Index i = 0; i < u.size(); ++i)
            if (lambda * rho[i] > 708.0) u[i] = 0.0;
}

}  // namespace

void EmbedProblem::ensure_weights() const {
    if (!inv_var4_.empty() || variances_.empty()) return;
    inv_var4_.resize(variances_.size());
    Eigen::Map<Eigen::ArrayXd> w(inv_var4_.data(), static_cast<Eigen::Index>(inv_var4_.size()));
    auto v = as_array(variances_);
    w = 1.0 / (v * v);  // variances are sigma^2, so this is 1/sigma^4
}

EmbedProblem::EmbedProblem(std::span<const double> costs, std::span<const double> variances)
    : costs_(costs), variances_(variances) {
    if (costs_.empty()) throw ParamError("EmbedProblem: empty cost map");
    if (!variances_.empty() && variances_.size() != costs_.size())
        throw ParamError("EmbedProblem: cost/variance length mismatch");
    max_cost_ = as_array(costs_).maxCoeff();
}

double EmbedProblem::sup(SolveTarget target) const {
    const auto n = static_cast<double>(costs_.size());
    switch (target) {
        case SolveTarget::Payload:
            return n * kLog2Of3;
        case SolveTarget::Distortion:
            return (2.0 / 3.0) * as_array(costs_).sum();
        case SolveTarget::Deflection: {
            if (variances_.empty()) throw ParamError("EmbedProblem: deflection needs variances");
            ensure_weights();
            return (2.0 / 9.0) * as_array(inv_var4_).sum();
        }
    }
    throw ParamError("EmbedProblem: bad target");
}

double EmbedProblem::eval(SolveTarget target, double lambda, double* deriv) const {
    if (!(lambda >= 0)) throw ParamError("EmbedProblem: lambda must be >= 0");
    const auto n = static_cast<Eigen::Index>(costs_.size());
    scratch_.resize(costs_.size());
    Eigen::Map<Eigen::ArrayXd> u(scratch_.data(), n);
    auto rho = as_array(costs_);
    exp_neg_masked(u, rho, lambda, max_cost_);
    // beta = u/(1+2u); 1-2beta = 1/(1+2u); dbeta/dlambda = -rho u/(1+2u)^2
    auto den = 1.0 + 2.0 * u;

    switch (target) {
        case SolveTarget::Payload: {
            // H3(beta(lambda, rho)) == (2 beta lambda rho + ln(1+2u)) / ln 2
            const double value =
                kInvLn2 * ((2.0 * lambda) * (rho * u / den).sum() + (2.0 * u).log1p().sum());
            if (deriv)
                *deriv = -kInvLn2 * 2.0 * lambda * (rho.square() * u / den.square()).sum();
            return value;
        }
        case SolveTarget::Distortion: {
            const double value = 2.0 * (rho * u / den).sum();
            if (deriv) *deriv = -2.0 * (rho.square() * u / den.square()).sum();
            return value;
        }
        case SolveTarget::Deflection: {
            if (variances_.empty()) throw ParamError("EmbedProblem: deflection needs variances");
            ensure_weights();
            auto w = as_array(inv_var4_);
            const double value = 2.0 * (w * (u / den).square()).sum();
            if (deriv) *deriv = -4.0 * (w * rho * u.square() / den.cube()).sum();
            return value;
        }
    }
    throw ParamError("EmbedProblem: bad target");
}

double EmbedProblem::solve(SolveTarget target, double value, double lambda_hint) const {
    if (!(value >= 0) || !std::isfinite(value))
        throw ParamError("solve: target value must be finite and >= 0");
    const double supremum = sup(target);
    const double tol = std::max(kRelTol * value, kAbsTol);
    if (value > supremum * (1.0 + kRelTol) + kAbsTol)
        throw InfeasibleError(std::string("solve: requested ") + to_string(target) + " " +
                              std::to_string(value) + " exceeds supremum " +
                              std::to_string(supremum));

    // Start from the warm hint when given; otherwise check the lambda_lo
    // saturation plateau and grow a bracket by doubling from 1. The Newton
    // loop below keeps tightening [lo, hi] from the sign of each residual,
    // so a hint needs no separate bracketing pass.
    double lo = kLambdaLo, hi = kLambdaCap;
    double lambda;
    if (lambda_hint > kLambdaLo && lambda_hint < kLambdaCap) {
        lambda = lambda_hint;
    } else {
        // At lambda_lo the functional sits within ~1e-12 of the supremum, so
        // any value at or above it is already met there.
        if (eval(target, lo) <= value) return lo;
        hi = 1.0;
        while (eval(target, hi) > value) {
            lo = hi;
            hi *= 2.0;
            if (hi >= kLambdaCap) {
                hi = kLambdaCap;
                const double f_cap = eval(target, hi);
                if (f_cap > value + tol)
                    throw InfeasibleError(std::string("solve: ") + to_string(target) +
                                          " floor " + std::to_string(f_cap) +
                                          " above requested " + std::to_string(value));
                break;
            }
        }
        lambda = std::sqrt(lo * hi);
    }

    // Safeguarded Newton in log(lambda); falls back to the geometric midpoint
    // whenever the Newton step leaves the bracket, so convergence is
    // unconditional on this monotone functional.
    for (int iter = 0; iter < 200; ++iter) {
        double deriv = 0;
        const double f = eval(target, lambda, &deriv);
        const double resid = f - value;
        if (std::abs(resid) <= tol) return lambda;
        if (resid > 0)
            lo = lambda;
        else
            hi = lambda;
        double next = 0;
        const double dlog = lambda * deriv;  // d f / d log(lambda)
        if (dlog != 0 && std::isfinite(dlog)) {
            double step = -resid / dlog;
            step = std::clamp(step, -30.0, 30.0);
            next = lambda * std::exp(step);
        }
        if (!(next > lo && next < hi) || !std::isfinite(next)) {
            if (hi >= kLambdaCap && lo <= kLambdaLo)
                next = 1.0;  // degenerate start, no bracket knowledge yet
            else if (hi >= kLambdaCap)
                next = lo * 4.0;
            else
                next = std::sqrt(std::max(lo, kLambdaLo) * hi);
        }
        if (next <= kLambdaLo && eval(target, kLambdaLo) <= value)
            return kLambdaLo;  // saturation plateau reached from above
        if (next == lambda) {  // bracket exhausted at double resolution
            if (std::abs(resid) <= std::max(16 * kRelTol * std::abs(value), kAbsTol)) return lambda;
            break;
        }
        lambda = next;
    }
    const double f = eval(target, lambda);
    if (std::abs(f - value) <= std::max(16 * kRelTol * std::abs(value), kAbsTol)) return lambda;
    throw InfeasibleError(std::string("solve: no convergence for ") + to_string(target) +
                          " = " + std::to_string(value));
}

EmbedSolution evaluate(const ImageModel& image, double lambda) {
    if (!(lambda >= 0)) throw ParamError("evaluate: lambda must be >= 0");
    if (image.n_coeffs < 1 || image.costs.empty())
        throw ParamError("evaluate: image has no coefficients");

    EmbedSolution sol;
    sol.lambda = lambda;
    const auto n = static_cast<Eigen::Index>(image.costs.size());
    auto rho = as_array(image.costs);
    Eigen::ArrayXd u(n);
    {
        Eigen::Map<Eigen::ArrayXd> umap(u.data(), n);
        exp_neg_masked(umap, rho, lambda, rho.maxCoeff());
    }
    Eigen::ArrayXd beta = u / (1.0 + 2.0 * u);

    sol.payload_bits = kInvLn2 * ((2.0 * lambda) * (rho * beta).sum() + (2.0 * u).log1p().sum());
    sol.distortion = 2.0 * (rho * beta).sum();
    if (!image.variances.empty()) {
        auto v = as_array(image.variances);
        sol.deflection = 2.0 * (beta.square() / v.square()).sum();
    }
    sol.change_rates.assign(beta.data(), beta.data() + n);
    return sol;
}

double functional_sup(const ImageModel& image, SolveTarget target) {
    EmbedProblem prob(image.costs, image.variances);
    return prob.sup(target);
}

EmbedSolution solve_lambda(const ImageModel& image, SolveTarget target, double value) {
    EmbedProblem prob(image.costs, image.variances);
    const double lambda = prob.solve(target, value);
    return evaluate(image, lambda);
}

}  // namespace stegpool
