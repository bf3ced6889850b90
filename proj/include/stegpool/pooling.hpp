#ifndef STEGPOOL_POOLING_HPP
#define STEGPOOL_POOLING_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stegpool {

// Equally spaced kernel centers with Gaussian width gamma.
struct ParzenConfig {
    int p = 100;
    std::vector<double> centers;
    double gamma = 0;

    double spacing() const;
    void validate() const;  // throws ParamError
};

using Histogram = std::vector<double>;

// Centers span [min, max] of the training scores; gamma = 1/(2 spacing^2),
// i.e. kernel sd equal to the center spacing.
ParzenConfig fit_parzen_config(std::span<const double> training_scores, int p);

// h[j] = (1/b) sum_i exp(-gamma (f_i - c_j)^2). Scores are summed in sorted
// order, so permutations of the bag give the bitwise-identical histogram.
Histogram parzen_histogram(std::span<const double> scores, const ParzenConfig& config);

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0;
    double delta = 0;  // decision cut on the margin: stego iff margin > delta
};

struct SvmTrainStats {
    std::vector<double> objective_trace;  // dual objective, one entry per update
    double kkt_violation = 0;
    double duality_gap = 0;
    long long iterations = 0;
};

// Max-margin trainer for min_w 1/2 |w|^2 + C sum max(0, 1 - y (w.h + b)),
// solved in the dual by maximal-violating-pair SMO. Deterministic in the
// example order. labels are +-1.
LinearModel train_linear_svm(const std::vector<Histogram>& features,
                             const std::vector<int>& labels, double C,
                             SvmTrainStats* stats = nullptr);

double svm_margin(const LinearModel& model, const Histogram& h);

enum class PoolKind { Mean, Max };

double scalar_pool(std::span<const double> scores, PoolKind kind);

// Decision rule for scalar pooling; orientation records whether stego sits
// above or below the cut.
struct ThresholdRule {
    double tau = 0;
    bool stego_above = true;
    double pe = 0.5;  // training error at the chosen cut

    bool decide_stego(double value) const { return stego_above ? value > tau : value <= tau; }
};

// Minimizes empirical (P_fa + P_md)/2 over all cuts (midpoints of adjacent
// sorted values plus +-inf) and both orientations; ties go to the smaller
// tau, then to the stego-above orientation.
ThresholdRule optimize_threshold(std::span<const double> neg_stats,
                                 std::span<const double> pos_stats);

enum class PoolDomain { Score, Histogram };

std::string to_string(PoolDomain d);
PoolDomain pool_domain_from_string(std::string_view s);

// Model file schema: {p, centers, gamma, weights, intercept, delta, pool_domain}
nlohmann::ordered_json model_to_json(const LinearModel& model, const ParzenConfig& config,
                                     PoolDomain domain);
void model_from_json(const nlohmann::ordered_json& j, LinearModel& model, ParzenConfig& config,
                     PoolDomain& domain);

}  // namespace stegpool

#endif
