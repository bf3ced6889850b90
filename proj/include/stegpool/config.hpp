#ifndef STEGPOOL_CONFIG_HPP
#define STEGPOOL_CONFIG_HPP

#include "stegpool/cover_source.hpp"
#include "stegpool/pooling.hpp"
#include "stegpool/sid.hpp"
#include "stegpool/spreading.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace stegpool {

// Everything a full experiment needs. Defaults follow the reference
// protocol where it fixes a value (bag-size set, 0.1 bptc, beta 0.5,
// p = 100 centers, default-C linear classifier, 10 runs); pair counts are
// desk-scale. Worker count is deliberately not part of the config: it must
// not influence results.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    int runs = 10;
    std::vector<int> bag_sizes = {2, 4, 6, 10, 20, 50, 100, 200};
    double bptc = 0.1;
    std::vector<Strategy> strategies = {Strategy::Greedy, Strategy::Linear, Strategy::UsesBeta,
                                        Strategy::IMS,    Strategy::DeLS,   Strategy::DiLS};
    double beta = 0.5;
    int n_train_pairs = 500;
    int n_test_pairs = 500;
    int p = 100;
    double kernel_scale = 6.0;
    double svm_c = 1.0;
    PoolDomain pool_domain = PoolDomain::Score;
    bool recalibrate_delta = false;
    CoverParams cover;
    SidParams sid;

    void validate() const;  // throws ParamError
    StrategyId strategy_id(Strategy s) const { return StrategyId{s, beta}; }
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);  // unknown key -> ConfigError

ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "dotted.key=value" to a config JSON tree; the key must already
// exist (so typos fail loudly) and the value is parsed as JSON when it can
// be, else taken as a string.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);

}  // namespace stegpool

#endif
