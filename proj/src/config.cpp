#include "stegpool/config.hpp"

#include "stegpool/errors.hpp"
#include "stegpool/util.hpp"

#include <set>

namespace stegpool {

using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
    if (runs < 1) throw ParamError("config: runs must be >= 1");
    if (bag_sizes.empty()) throw ParamError("config: bag_sizes must be non-empty");
    for (int b : bag_sizes)
        if (b < 1) throw ParamError("config: bag sizes must be >= 1");
    if (!(bptc > 0)) throw ParamError("config: bptc must be > 0");
    if (strategies.empty()) throw ParamError("config: strategies must be non-empty");
    std::set<Strategy> uniq(strategies.begin(), strategies.end());
    if (uniq.size() != strategies.size()) throw ParamError("config: duplicate strategy");
    if (!(beta > 0 && beta <= 1)) throw ParamError("config: beta must be in (0,1]");
    if (n_train_pairs < 1 || n_test_pairs < 1)
        throw ParamError("config: pair counts must be >= 1");
    if (p < 2) throw ParamError("config: p must be >= 2");
    if (!(kernel_scale > 0)) throw ParamError("config: kernel_scale must be > 0");
    if (!(svm_c > 0)) throw ParamError("config: svm_c must be > 0");
    cover.validate();
    sid.validate();
}

ordered_json config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["runs"] = c.runs;
    j["bag_sizes"] = c.bag_sizes;
    j["bptc"] = c.bptc;
    std::vector<std::string> names;
    names.reserve(c.strategies.size());
    for (Strategy s : c.strategies) names.push_back(to_string(s));
    j["strategies"] = names;
    j["beta"] = c.beta;
    j["n_train_pairs"] = c.n_train_pairs;
    j["n_test_pairs"] = c.n_test_pairs;
    j["p"] = c.p;
    j["kernel_scale"] = c.kernel_scale;
    j["svm_c"] = c.svm_c;
    j["pool_domain"] = to_string(c.pool_domain);
    j["recalibrate_delta"] = c.recalibrate_delta;
    j["cover"] = {{"n_coeffs", c.cover.n_coeffs},
                  {"cost_log_mean", c.cover.cost_log_mean},
                  {"cost_log_sd", c.cover.cost_log_sd},
                  {"var_log_mean", c.cover.var_log_mean},
                  {"var_log_sd", c.cover.var_log_sd},
                  {"heterogeneity", c.cover.heterogeneity}};
    j["sid"] = {{"gain", c.sid.gain},
                {"bias", c.sid.bias},
                {"sigma_between", c.sid.sigma_between},
                {"sigma_within", c.sid.sigma_within},
                {"saturation", c.sid.saturation}};
    return j;
}

namespace {

template <typename T>
void read_key(const ordered_json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

void check_known_keys(const ordered_json& j, const std::set<std::string>& known,
                      const std::string& prefix) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ConfigError("config: unknown key '" + prefix + key + "'");
}

}  // namespace

ExperimentConfig config_from_json(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    check_known_keys(j,
                     {"seed", "runs", "bag_sizes", "bptc", "strategies", "beta",
                      "n_train_pairs", "n_test_pairs", "p", "kernel_scale", "svm_c", "pool_domain",
                      "recalibrate_delta", "cover", "sid"},
                     "");

    ExperimentConfig c;
    read_key(j, "seed", c.seed);
    read_key(j, "runs", c.runs);
    read_key(j, "bag_sizes", c.bag_sizes);
    read_key(j, "bptc", c.bptc);
    if (j.contains("strategies")) {
        std::vector<std::string> names;
        try {
            names = j.at("strategies").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: 'strategies' must be an array of strategy names");
        }
        c.strategies.clear();
        for (const auto& name : names) {
            try {
                c.strategies.push_back(strategy_from_string(name));
            } catch (const ParamError& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        }
    }
    read_key(j, "beta", c.beta);
    read_key(j, "n_train_pairs", c.n_train_pairs);
    read_key(j, "n_test_pairs", c.n_test_pairs);
    read_key(j, "p", c.p);
    read_key(j, "kernel_scale", c.kernel_scale);
    read_key(j, "svm_c", c.svm_c);
    if (j.contains("pool_domain")) {
        try {
            c.pool_domain = pool_domain_from_string(j.at("pool_domain").get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: 'pool_domain' must be a string");
        } catch (const ParamError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    read_key(j, "recalibrate_delta", c.recalibrate_delta);
    if (j.contains("cover")) {
        const auto& jc = j.at("cover");
        check_known_keys(jc,
                         {"n_coeffs", "cost_log_mean", "cost_log_sd", "var_log_mean",
                          "var_log_sd", "heterogeneity"},
                         "cover.");
        read_key(jc, "n_coeffs", c.cover.n_coeffs);
        read_key(jc, "cost_log_mean", c.cover.cost_log_mean);
        read_key(jc, "cost_log_sd", c.cover.cost_log_sd);
        read_key(jc, "var_log_mean", c.cover.var_log_mean);
        read_key(jc, "var_log_sd", c.cover.var_log_sd);
        read_key(jc, "heterogeneity", c.cover.heterogeneity);
    }
    if (j.contains("sid")) {
        const auto& js = j.at("sid");
        check_known_keys(js, {"gain", "bias", "sigma_between", "sigma_within", "saturation"},
                         "sid.");
        read_key(js, "gain", c.sid.gain);
        read_key(js, "bias", c.sid.bias);
        read_key(js, "sigma_between", c.sid.sigma_between);
        read_key(js, "sigma_within", c.sid.sigma_within);
        read_key(js, "saturation", c.sid.saturation);
    }

    try {
        c.validate();
    } catch (const ParamError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_override(ordered_json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like key=value, got '" + assignment + "'");
    const std::string dotted = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    ordered_json* node = &j;
    std::size_t start = 0;
    std::string path_done;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot - start);
        if (!node->is_object() || !node->contains(key))
            throw ConfigError("override: unknown key '" + path_done + key + "'");
        if (dot == std::string::npos) {
            ordered_json parsed = ordered_json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? ordered_json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        path_done += key + ".";
        start = dot + 1;
    }
}

}  // namespace stegpool
