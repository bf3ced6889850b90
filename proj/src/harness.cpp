#include "stegpool/harness.hpp"

#include "stegpool/errors.hpp"
#include "stegpool/parallel.hpp"
#include "stegpool/rng.hpp"
#include "stegpool/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace stegpool {

using nlohmann::ordered_json;

std::string to_string(Pooling p) {
    switch (p) {
        case Pooling::Disc: return "disc";
        case Pooling::Clair: return "clair";
        case Pooling::Mean: return "mean";
        case Pooling::Max: return "max";
    }
    return "?";
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

double PoolingPe::get(Pooling p) const {
    switch (p) {
        case Pooling::Disc: return disc;
        case Pooling::Clair: return clair;
        case Pooling::Mean: return mean;
        case Pooling::Max: return max;
    }
    return 0.5;
}

namespace {

constexpr std::uint64_t kSlotCover = 1000;

std::uint64_t split_tag(Split s) {
    return s == Split::Train ? seed_tag::train : seed_tag::test;
}

// Only the solver-backed strategies read the cost/variance maps; covers and
// the count-based strategies depend on image shape alone, so their maps are
// never materialized. Scores are unchanged either way: they are functions of
// the seeds, ids and rates only.
bool needs_arrays(Strategy s) {
    return s == Strategy::IMS || s == Strategy::DeLS || s == Strategy::DiLS;
}

Bag shape_bag(int bag_id, int b, int n_coeffs) {
    Bag bag;
    bag.bag_id = bag_id;
    bag.images.resize(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        bag.images[static_cast<std::size_t>(i)].id = i;
        bag.images[static_cast<std::size_t>(i)].n_coeffs = n_coeffs;
    }
    return bag;
}

}  // namespace

std::vector<ScoredBag> build_dataset(const ExperimentConfig& config, int bag_size, int run_idx,
                                     Split split, int workers, SkipStats* skips) {
    config.validate();
    if (bag_size < 1) throw ParamError("build_dataset: bag_size must be >= 1");
    if (run_idx < 0) throw ParamError("build_dataset: run_idx must be >= 0");

    const int n_pairs = split == Split::Train ? config.n_train_pairs : config.n_test_pairs;
    const auto n_strategies = config.strategies.size();
    const std::size_t slots_per_pair = 1 + n_strategies;
    const std::size_t n_tasks = static_cast<std::size_t>(n_pairs) * slots_per_pair;

    const std::uint64_t base = seed_child(
        seed_child(seed_child(config.seed, static_cast<std::uint64_t>(run_idx)), split_tag(split)),
        static_cast<std::uint64_t>(bag_size));

    std::vector<ScoredBag> bags(n_tasks);
    std::vector<char> ok(n_tasks, 0);

    parallel_for(n_tasks, workers, [&](std::size_t task) {
        const int pair_idx = static_cast<int>(task / slots_per_pair);
        const std::size_t slot = task % slots_per_pair;  // 0 = cover, 1.. = strategies
        const std::uint64_t pair_seed = seed_child(base, static_cast<std::uint64_t>(pair_idx));
        const std::uint64_t bag_seed =
            seed_child(pair_seed, slot == 0 ? kSlotCover : static_cast<std::uint64_t>(slot - 1));
        const int bag_id = pair_idx * static_cast<int>(slots_per_pair) + static_cast<int>(slot);

        const std::uint64_t score_seed = seed_child(bag_seed, seed_tag::score);
        if (slot == 0) {
            const Bag bag = shape_bag(bag_id, bag_size, config.cover.n_coeffs);
            bags[task] = score_bag(score_seed, bag, nullptr, config.sid);
            ok[task] = 1;
            return;
        }
        const StrategyId strategy = config.strategy_id(config.strategies[slot - 1]);
        const Bag bag =
            needs_arrays(strategy.kind)
                ? gen_bag(seed_child(bag_seed, seed_tag::cover), bag_id, bag_size, config.cover)
                : shape_bag(bag_id, bag_size, config.cover.n_coeffs);
        const double total = total_bits_for(bag, config.bptc);
        try {
            const Allocation alloc = spread(bag, total, strategy, seed_child(bag_seed, seed_tag::stego));
            bags[task] = score_bag(score_seed, bag, &alloc, config.sid);
            ok[task] = 1;
        } catch (const InfeasibleError&) {
            ok[task] = 0;  // recorded skip
        }
    });

    std::vector<ScoredBag> out;
    out.reserve(n_tasks);
    long long attempted = 0, skipped = 0;
    for (std::size_t task = 0; task < n_tasks; ++task) {
        const bool is_stego = task % slots_per_pair != 0;
        if (is_stego) ++attempted;
        if (ok[task])
            out.push_back(std::move(bags[task]));
        else if (is_stego)
            ++skipped;
    }
    if (skips) {
        skips->attempted_stego += attempted;
        skips->skipped_stego += skipped;
    }
    if (skipped > 0 && static_cast<double>(skipped) > 1e-3 * static_cast<double>(attempted))
        throw InfeasibleError("build_dataset: " + std::to_string(skipped) + " of " +
                              std::to_string(attempted) +
                              " stego bags infeasible (limit 0.1%)");
    return out;
}

namespace {

std::vector<Histogram> featurize_all(const std::vector<ScoredBag>& bags,
                                     const ParzenConfig& parzen) {
    std::vector<Histogram> hists(bags.size());
    for (std::size_t i = 0; i < bags.size(); ++i)
        hists[i] = parzen_histogram(bags[i].scores, parzen);
    return hists;
}

double pooled_stat(const ScoredBag& bag, const Histogram& hist, PoolDomain domain,
                   PoolKind kind) {
    return domain == PoolDomain::Score ? scalar_pool(bag.scores, kind)
                                       : scalar_pool(hist, kind);
}

}  // namespace

TrainedPoolers train_poolers(const std::vector<ScoredBag>& train_set,
                             const ExperimentConfig& config) {
    std::vector<std::size_t> covers;
    std::map<Strategy, std::vector<std::size_t>> by_strategy;
    std::vector<double> all_scores;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const auto& bag = train_set[i];
        all_scores.insert(all_scores.end(), bag.scores.begin(), bag.scores.end());
        if (bag.label == BagLabel::Cover)
            covers.push_back(i);
        else
            by_strategy[bag.strategy->kind].push_back(i);
    }
    if (covers.empty()) throw TrainingError("train_poolers: no cover bags in training set");
    for (Strategy s : config.strategies)
        if (!by_strategy.count(s))
            throw TrainingError("train_poolers: no training bags for strategy " + to_string(s));

    TrainedPoolers poolers;
    poolers.domain = config.pool_domain;
    poolers.parzen = fit_parzen_config(all_scores, config.p);
    // kernel sd = kernel_scale * center spacing
    poolers.parzen.gamma /= config.kernel_scale * config.kernel_scale;

    const std::vector<Histogram> hists = featurize_all(train_set, poolers.parzen);

    auto train_on = [&](const std::vector<std::size_t>& neg_idx,
                        const std::vector<std::size_t>& pos_idx) {
        std::vector<Histogram> feats;
        std::vector<int> labels;
        feats.reserve(neg_idx.size() + pos_idx.size());
        for (std::size_t i : neg_idx) {
            feats.push_back(hists[i]);
            labels.push_back(-1);
        }
        for (std::size_t i : pos_idx) {
            feats.push_back(hists[i]);
            labels.push_back(+1);
        }
        LinearModel model = train_linear_svm(feats, labels, config.svm_c);
        if (config.recalibrate_delta) {
            std::vector<double> neg_margin, pos_margin;
            for (std::size_t i : neg_idx) neg_margin.push_back(svm_margin(model, hists[i]));
            for (std::size_t i : pos_idx) pos_margin.push_back(svm_margin(model, hists[i]));
            const ThresholdRule rule = optimize_threshold(neg_margin, pos_margin);
            if (rule.stego_above && std::isfinite(rule.tau)) model.delta = rule.tau;
        }
        return model;
    };

    // Discriminative set: equal counts per strategy, cover count matched.
    const auto k = config.strategies.size();
    const std::size_t per_strategy = covers.size() / k;
    if (per_strategy == 0)
        throw TrainingError("train_poolers: too few cover bags for balanced training");
    std::vector<std::size_t> disc_pos;
    for (Strategy s : config.strategies) {
        const auto& idx = by_strategy.at(s);
        if (idx.size() < per_strategy)
            throw TrainingError("train_poolers: not enough " + to_string(s) + " bags (" +
                                std::to_string(idx.size()) + " < " +
                                std::to_string(per_strategy) + ")");
        disc_pos.insert(disc_pos.end(), idx.begin(),
                        idx.begin() + static_cast<std::ptrdiff_t>(per_strategy));
    }
    std::vector<std::size_t> disc_neg(covers.begin(),
                                      covers.begin() + static_cast<std::ptrdiff_t>(per_strategy * k));
    poolers.disc = train_on(disc_neg, disc_pos);

    for (Strategy s : config.strategies)
        poolers.clair.emplace_back(config.strategy_id(s), train_on(covers, by_strategy.at(s)));

    // Scalar cuts, fit on covers vs stegos of all strategies together.
    for (PoolKind kind : {PoolKind::Mean, PoolKind::Max}) {
        std::vector<double> neg, pos;
        for (std::size_t i : covers)
            neg.push_back(pooled_stat(train_set[i], hists[i], poolers.domain, kind));
        for (Strategy s : config.strategies)
            for (std::size_t i : by_strategy.at(s))
                pos.push_back(pooled_stat(train_set[i], hists[i], poolers.domain, kind));
        (kind == PoolKind::Mean ? poolers.tau_mean : poolers.tau_max) =
            optimize_threshold(neg, pos);
    }
    return poolers;
}

PoolingPe evaluate_pe(const std::vector<ScoredBag>& test_set, const TrainedPoolers& poolers,
                      StrategyId strategy) {
    const LinearModel* clair_model = nullptr;
    for (const auto& [id, model] : poolers.clair)
        if (id.kind == strategy.kind) clair_model = &model;
    if (!clair_model)
        throw MismatchError("evaluate_pe: no clairvoyant model for strategy " +
                            to_string(strategy.kind));

    long long n_cover = 0, n_stego = 0;
    long long fa_disc = 0, md_disc = 0, fa_clair = 0, md_clair = 0;
    long long fa_mean = 0, md_mean = 0, fa_max = 0, md_max = 0;

    for (const auto& bag : test_set) {
        const bool is_cover = bag.label == BagLabel::Cover;
        if (!is_cover && bag.strategy->kind != strategy.kind) continue;

        const Histogram hist = parzen_histogram(bag.scores, poolers.parzen);
        const bool disc_stego = svm_margin(poolers.disc, hist) > poolers.disc.delta;
        const bool clair_stego = svm_margin(*clair_model, hist) > clair_model->delta;
        const bool mean_stego = poolers.tau_mean.decide_stego(
            pooled_stat(bag, hist, poolers.domain, PoolKind::Mean));
        const bool max_stego = poolers.tau_max.decide_stego(
            pooled_stat(bag, hist, poolers.domain, PoolKind::Max));

        if (is_cover) {
            ++n_cover;
            fa_disc += disc_stego;
            fa_clair += clair_stego;
            fa_mean += mean_stego;
            fa_max += max_stego;
        } else {
            ++n_stego;
            md_disc += !disc_stego;
            md_clair += !clair_stego;
            md_mean += !mean_stego;
            md_max += !max_stego;
        }
    }
    if (n_cover == 0 || n_stego == 0)
        throw MismatchError("evaluate_pe: test set lacks covers or " + to_string(strategy.kind) +
                            " bags");

    auto pe = [&](long long fa, long long md) {
        return 0.5 * (static_cast<double>(fa) / static_cast<double>(n_cover) +
                      static_cast<double>(md) / static_cast<double>(n_stego));
    };
    PoolingPe out;
    out.disc = pe(fa_disc, md_disc);
    out.clair = pe(fa_clair, md_clair);
    out.mean = pe(fa_mean, md_mean);
    out.max = pe(fa_max, md_max);
    return out;
}

const ReportCell* Report::find(Pooling pooling, Strategy strategy, int bag_size) const {
    for (const auto& cell : cells)
        if (cell.pooling == pooling && cell.strategy == strategy && cell.bag_size == bag_size)
            return &cell;
    return nullptr;
}

Report run_experiment(const ExperimentConfig& config, int workers) {
    config.validate();
    Report report;
    report.config = config;

    // cell key -> per-run pe values
    std::map<std::tuple<int, int, int>, std::vector<double>> pe_runs;

    for (int run = 0; run < config.runs; ++run) {
        for (int bag_size : config.bag_sizes) {
            SkipStats skips;
            const auto train_set =
                build_dataset(config, bag_size, run, Split::Train, workers, &skips);
            const auto test_set =
                build_dataset(config, bag_size, run, Split::Test, workers, &skips);
            report.attempted_stego += skips.attempted_stego;
            report.skipped_stego += skips.skipped_stego;

            const TrainedPoolers poolers = train_poolers(train_set, config);
            for (std::size_t si = 0; si < config.strategies.size(); ++si) {
                const PoolingPe pes =
                    evaluate_pe(test_set, poolers, config.strategy_id(config.strategies[si]));
                for (Pooling pooling : kAllPoolings) {
                    const auto key = std::make_tuple(static_cast<int>(pooling),
                                                     static_cast<int>(si), bag_size);
                    pe_runs[key].push_back(pes.get(pooling));
                }
            }
        }
    }

    for (Pooling pooling : kAllPoolings) {
        for (std::size_t si = 0; si < config.strategies.size(); ++si) {
            for (int bag_size : config.bag_sizes) {
                const auto key =
                    std::make_tuple(static_cast<int>(pooling), static_cast<int>(si), bag_size);
                ReportCell cell;
                cell.pooling = pooling;
                cell.strategy = config.strategies[si];
                cell.bag_size = bag_size;
                cell.pe_runs = pe_runs.at(key);
                double sum = 0;
                for (double v : cell.pe_runs) sum += v;
                cell.pe_mean = sum / static_cast<double>(cell.pe_runs.size());
                double ss = 0;
                for (double v : cell.pe_runs) ss += (v - cell.pe_mean) * (v - cell.pe_mean);
                cell.pe_var = cell.pe_runs.size() > 1
                                  ? ss / static_cast<double>(cell.pe_runs.size() - 1)
                                  : 0.0;
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

ordered_json report_to_json(const Report& report) {
    ordered_json j;
    j["config"] = config_to_json(report.config);
    j["notes"] = ordered_json::array(
        {"covers are generated fresh per bag instead of drawn from a shared cover pool",
         "reference full-scale gaps for comparison, not asserted: disc_vs_scalar=0.02, "
         "disc_vs_clair=0.008"});
    j["skips"] = {{"attempted_stego", report.attempted_stego},
                  {"skipped_stego", report.skipped_stego}};
    ordered_json cells = ordered_json::array();
    for (const auto& cell : report.cells) {
        ordered_json c;
        c["pooling"] = to_string(cell.pooling);
        c["strategy"] = to_string(cell.strategy);
        c["bag_size"] = cell.bag_size;
        c["pe_mean"] = cell.pe_mean;
        c["pe_var"] = cell.pe_var;
        c["pe_runs"] = cell.pe_runs;
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);
    return j;
}

namespace {

Pooling pooling_from_string(const std::string& s) {
    for (Pooling p : kAllPoolings)
        if (to_string(p) == s) return p;
    throw ConfigError("report: unknown pooling '" + s + "'");
}

}  // namespace

Report report_from_json(const ordered_json& j) {
    Report report;
    report.config = config_from_json(j.at("config"));
    if (j.contains("skips")) {
        report.attempted_stego = j["skips"].value("attempted_stego", 0LL);
        report.skipped_stego = j["skips"].value("skipped_stego", 0LL);
    }
    for (const auto& c : j.at("cells")) {
        ReportCell cell;
        cell.pooling = pooling_from_string(c.at("pooling").get<std::string>());
        cell.strategy = strategy_from_string(c.at("strategy").get<std::string>());
        cell.bag_size = c.at("bag_size").get<int>();
        cell.pe_mean = c.at("pe_mean").get<double>();
        cell.pe_var = c.at("pe_var").get<double>();
        cell.pe_runs = c.at("pe_runs").get<std::vector<double>>();
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::string report_to_csv(const Report& report) {
    std::ostringstream os;
    os << "pooling,strategy,bag_size,pe_mean,pe_var\n";
    for (const auto& cell : report.cells)
        os << to_string(cell.pooling) << ',' << to_string(cell.strategy) << ','
           << cell.bag_size << ',' << fmt_double(cell.pe_mean) << ',' << fmt_double(cell.pe_var)
           << '\n';
    return os.str();
}

nlohmann::ordered_json poolers_to_json(const TrainedPoolers& poolers, double svm_c) {
    ordered_json j;
    j["pool_domain"] = to_string(poolers.domain);
    j["svm_c"] = svm_c;
    j["parzen"] = {{"p", poolers.parzen.p},
                   {"centers", poolers.parzen.centers},
                   {"gamma", poolers.parzen.gamma}};
    j["disc"] = model_to_json(poolers.disc, poolers.parzen, poolers.domain);
    ordered_json clair;
    for (const auto& [id, model] : poolers.clair)
        clair[to_string(id.kind)] = model_to_json(model, poolers.parzen, poolers.domain);
    j["clair"] = std::move(clair);
    for (const auto* name : {"tau_mean", "tau_max"}) {
        const ThresholdRule& rule =
            std::string(name) == "tau_mean" ? poolers.tau_mean : poolers.tau_max;
        j[name] = {{"tau", rule.tau}, {"stego_above", rule.stego_above},
                   {"pe_train", rule.pe}};
    }
    return j;
}

TrainedPoolers poolers_from_json(const ordered_json& j) {
    TrainedPoolers poolers;
    poolers.domain = pool_domain_from_string(j.at("pool_domain").get<std::string>());
    poolers.parzen.p = j.at("parzen").at("p").get<int>();
    poolers.parzen.centers = j.at("parzen").at("centers").get<std::vector<double>>();
    poolers.parzen.gamma = j.at("parzen").at("gamma").get<double>();
    poolers.parzen.validate();

    auto load_model = [&](const ordered_json& mj, const std::string& name) {
        LinearModel model;
        ParzenConfig config;
        PoolDomain domain = PoolDomain::Score;
        model_from_json(mj, model, config, domain);
        if (config.p != poolers.parzen.p)
            throw MismatchError("models file: " + name + " has p=" + std::to_string(config.p) +
                                " but the parzen grid has p=" +
                                std::to_string(poolers.parzen.p));
        return model;
    };
    poolers.disc = load_model(j.at("disc"), "disc");
    for (Strategy s : kAllStrategies) {
        const std::string name = to_string(s);
        if (j.at("clair").contains(name))
            poolers.clair.emplace_back(StrategyId{s, 0.5},
                                       load_model(j.at("clair").at(name), "clair." + name));
    }
    for (const auto* name : {"tau_mean", "tau_max"}) {
        const auto& tj = j.at(name);
        ThresholdRule rule;
        rule.tau = tj.at("tau").get<double>();
        rule.stego_above = tj.at("stego_above").get<bool>();
        rule.pe = tj.at("pe_train").get<double>();
        (std::string(name) == "tau_mean" ? poolers.tau_mean : poolers.tau_max) = rule;
    }
    return poolers;
}

std::string render_report_tables(const Report& report) {
    std::ostringstream os;
    const auto& config = report.config;
    for (Pooling pooling : kAllPoolings) {
        os << "P_e (mean over " << config.runs << " runs), pooling = " << to_string(pooling)
           << "\n";
        os << "  strategy ";
        for (int b : config.bag_sizes) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%9s", ("b=" + std::to_string(b)).c_str());
            os << buf;
        }
        os << '\n';
        for (Strategy s : config.strategies) {
            char name[16];
            std::snprintf(name, sizeof(name), "  %-9s", to_string(s).c_str());
            os << name;
            for (int b : config.bag_sizes) {
                const ReportCell* cell = report.find(pooling, s, b);
                char buf[16];
                if (cell)
                    std::snprintf(buf, sizeof(buf), "%9.4f", cell->pe_mean);
                else
                    std::snprintf(buf, sizeof(buf), "%9s", "-");
                os << buf;
            }
            os << '\n';
        }
        os << '\n';
    }
    return os.str();
}

std::string render_report_pivot_csv(const Report& report) {
    std::ostringstream os;
    os << "pooling,strategy";
    for (int b : report.config.bag_sizes) os << ",b" << b;
    os << '\n';
    for (Pooling pooling : kAllPoolings) {
        for (Strategy s : report.config.strategies) {
            os << to_string(pooling) << ',' << to_string(s);
            for (int b : report.config.bag_sizes) {
                const ReportCell* cell = report.find(pooling, s, b);
                os << ',';
                if (cell) os << fmt_double(cell->pe_mean);
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace stegpool
