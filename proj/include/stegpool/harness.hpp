#ifndef STEGPOOL_HARNESS_HPP
#define STEGPOOL_HARNESS_HPP

#include "stegpool/config.hpp"
#include "stegpool/pooling.hpp"
#include "stegpool/sid.hpp"
#include "stegpool/spreading.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace stegpool {

enum class Split { Train, Test };

enum class Pooling { Disc, Clair, Mean, Max };

constexpr Pooling kAllPoolings[] = {Pooling::Disc, Pooling::Clair, Pooling::Mean, Pooling::Max};

std::string to_string(Pooling p);
std::string to_string(Split s);

struct SkipStats {
    long long attempted_stego = 0;
    long long skipped_stego = 0;
};

// One cover bag plus one stego bag per enabled strategy for every pair
// index, each built from its own fresh covers. Seed streams are disjoint
// across (run, split, bag size, pair, slot), so worker scheduling cannot
// change the data. Infeasible stego bags are skipped and counted; more than
// 0.1% of them fails the build.
std::vector<ScoredBag> build_dataset(const ExperimentConfig& config, int bag_size, int run_idx,
                                     Split split, int workers, SkipStats* skips = nullptr);

struct TrainedPoolers {
    ParzenConfig parzen;
    PoolDomain domain = PoolDomain::Score;
    LinearModel disc;
    std::vector<std::pair<StrategyId, LinearModel>> clair;  // config strategy order
    ThresholdRule tau_mean;
    ThresholdRule tau_max;
};

// Fits the center grid on all train scores, trains the discriminative and
// per-strategy classifiers, and picks the mean/max cuts on the pooled
// statistics of covers vs all-strategy stegos.
TrainedPoolers train_poolers(const std::vector<ScoredBag>& train_set,
                             const ExperimentConfig& config);

struct PoolingPe {
    double disc = 0.5;
    double clair = 0.5;
    double mean = 0.5;
    double max = 0.5;

    double get(Pooling p) const;
};

// Empirical P_e = (P_fa + P_md)/2 of test covers vs test stegos of one
// strategy, for each pooling rule.
PoolingPe evaluate_pe(const std::vector<ScoredBag>& test_set, const TrainedPoolers& poolers,
                      StrategyId strategy);

struct ReportCell {
    Pooling pooling;
    Strategy strategy;
    int bag_size = 0;
    std::vector<double> pe_runs;
    double pe_mean = 0;
    double pe_var = 0;
};

struct Report {
    ExperimentConfig config;
    std::vector<ReportCell> cells;
    long long attempted_stego = 0;
    long long skipped_stego = 0;

    const ReportCell* find(Pooling pooling, Strategy strategy, int bag_size) const;
};

// Full protocol: per run and bag size, build train/test sets, train the
// poolers, evaluate every (pooling, strategy) cell; then aggregate across
// runs. Deterministic in the config seed, independent of worker count.
Report run_experiment(const ExperimentConfig& config, int workers = 0);

nlohmann::ordered_json report_to_json(const Report& report);
Report report_from_json(const nlohmann::ordered_json& j);
std::string report_to_csv(const Report& report);

// Trained-pooler bundle file: the parzen grid plus one model object per
// pooling function. Loading verifies dimensions agree and names the first
// mismatch otherwise.
nlohmann::ordered_json poolers_to_json(const TrainedPoolers& poolers, double svm_c);
TrainedPoolers poolers_from_json(const nlohmann::ordered_json& j);

// Aligned-text tables, one per pooling function: strategies x bag sizes.
std::string render_report_tables(const Report& report);
// Pivot CSV: pooling,strategy,b<size>,... one row per (pooling, strategy).
std::string render_report_pivot_csv(const Report& report);

}  // namespace stegpool

#endif
