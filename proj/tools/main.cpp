// stegpool: batch steganography / pooled steganalysis workbench.
//
// Subcommands cover the pipeline stages individually (gen-bags, spread,
// score, featurize, train, evaluate) and end to end (run-all, report).
// Outputs are written atomically; a partial file is never left behind.

#include "stegpool/config.hpp"
#include "stegpool/errors.hpp"
#include "stegpool/harness.hpp"
#include "stegpool/parallel.hpp"
#include "stegpool/rng.hpp"
#include "stegpool/util.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

using namespace stegpool;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON (see docs/config.md)");
    cmd->add_option("--set", opts.sets, "config override, dotted key=value (repeatable)")
        ->take_all();
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)")
        ->default_str(std::to_string(ExperimentConfig{}.seed));
    cmd->add_option("--workers", opts.workers, "worker threads, 0 = all cores")
        ->capture_default_str();
}

ExperimentConfig resolve_config(const CLI::App* cmd, const CommonOpts& opts) {
    ExperimentConfig base;
    if (!opts.config_path.empty()) base = load_config(opts.config_path);
    nlohmann::ordered_json j = config_to_json(base);
    for (const auto& assignment : opts.sets) apply_override(j, assignment);
    ExperimentConfig config = config_from_json(j);
    if (cmd->count("--seed") > 0) config.seed = opts.seed;
    return config;
}

fs::path out_path(const CommonOpts& opts, const std::string& name) {
    return fs::path(opts.out_dir) / name;
}

void write_out(const CommonOpts& opts, const std::string& name, const std::string& content) {
    const fs::path path = out_path(opts, name);
    atomic_write_file(path, content);
    std::cout << "wrote " << path.string() << "\n";
}

nlohmann::ordered_json parse_json_file(const std::string& path) {
    try {
        return nlohmann::ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("cannot parse " + path + ": " + e.what());
    }
}

// Strategies present in a score file, in canonical order.
std::vector<Strategy> detect_strategies(const std::vector<ScoredBag>& bags) {
    std::vector<Strategy> out;
    for (Strategy s : kAllStrategies)
        for (const auto& bag : bags)
            if (bag.strategy && bag.strategy->kind == s) {
                out.push_back(s);
                break;
            }
    return out;
}

int cmd_gen_bags(const CLI::App* cmd, const CommonOpts& opts, int n_bags, int b) {
    const ExperimentConfig config = resolve_config(cmd, opts);
    std::ostringstream os;
    os << "bag_id,image_id,n_coeffs,cost_mean,cost_sd,var_mean,var_sd\n";
    const std::uint64_t base = seed_child(config.seed, seed_tag::cover);
    for (int i = 0; i < n_bags; ++i) {
        const Bag bag = gen_bag(base, i, b, config.cover);
        for (const auto& img : bag.images) {
            auto stats = [](const AlignedVec& v) {
                double mean = 0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                double ss = 0;
                for (double x : v) ss += (x - mean) * (x - mean);
                return std::pair<double, double>(mean,
                                                 std::sqrt(ss / static_cast<double>(v.size())));
            };
            const auto [cm, cs] = stats(img.costs);
            const auto [vm, vs] = stats(img.variances);
            os << bag.bag_id << ',' << img.id << ',' << img.n_coeffs << ',' << fmt_double(cm)
               << ',' << fmt_double(cs) << ',' << fmt_double(vm) << ',' << fmt_double(vs)
               << '\n';
        }
    }
    write_out(opts, "bags.csv", os.str());
    return 0;
}

int cmd_spread(const CLI::App* cmd, const CommonOpts& opts, const std::string& strategy_name,
               int n_bags, int b, double bptc_flag) {
    ExperimentConfig config = resolve_config(cmd, opts);
    if (cmd->count("--bptc") > 0) config.bptc = bptc_flag;
    const StrategyId strategy{strategy_from_string(strategy_name), config.beta};

    std::ostringstream os;
    write_allocations_csv_header(os);
    const std::uint64_t base = seed_child(config.seed, seed_tag::cover);
    const std::uint64_t spread_base = seed_child(config.seed, seed_tag::stego);
    for (int i = 0; i < n_bags; ++i) {
        const Bag bag = gen_bag(base, i, b, config.cover);
        const Allocation alloc = spread(bag, total_bits_for(bag, config.bptc), strategy,
                                        seed_child(spread_base, static_cast<std::uint64_t>(i)));
        write_allocation_csv(os, bag.bag_id, alloc);
    }
    write_out(opts, "allocations.csv", os.str());
    return 0;
}

int cmd_score(const CLI::App* cmd, const CommonOpts& opts, int pairs, int b,
              const std::string& split_name, int run_idx) {
    ExperimentConfig config = resolve_config(cmd, opts);
    if (cmd->count("--pairs") > 0) {
        config.n_train_pairs = pairs;
        config.n_test_pairs = pairs;
    }
    Split split;
    if (split_name == "train")
        split = Split::Train;
    else if (split_name == "test")
        split = Split::Test;
    else
        throw ParamError("--split must be train or test");

    SkipStats skips;
    const auto bags = build_dataset(config, b, run_idx, split, opts.workers, &skips);
    std::ostringstream os;
    write_scores_csv(os, bags);
    write_out(opts, "scores.csv", os.str());
    if (skips.skipped_stego > 0)
        std::cerr << "note: skipped " << skips.skipped_stego << " infeasible stego bags\n";
    return 0;
}

nlohmann::ordered_json parzen_to_json(const ParzenConfig& parzen) {
    return {{"p", parzen.p}, {"centers", parzen.centers}, {"gamma", parzen.gamma}};
}

ParzenConfig parzen_from_json(const nlohmann::ordered_json& j) {
    ParzenConfig parzen;
    parzen.p = j.at("p").get<int>();
    parzen.centers = j.at("centers").get<std::vector<double>>();
    parzen.gamma = j.at("gamma").get<double>();
    parzen.validate();
    return parzen;
}

int cmd_featurize(const CLI::App* cmd, const CommonOpts& opts, const std::string& scores_path,
                  const std::string& parzen_path) {
    const ExperimentConfig config = resolve_config(cmd, opts);
    const auto bags = load_scores(fs::path(scores_path));
    if (bags.empty()) throw IngestError(scores_path + ": no bags");

    ParzenConfig parzen;
    if (!parzen_path.empty()) {
        parzen = parzen_from_json(parse_json_file(parzen_path));
    } else {
        std::vector<double> all;
        for (const auto& bag : bags) all.insert(all.end(), bag.scores.begin(), bag.scores.end());
        parzen = fit_parzen_config(all, config.p);
        parzen.gamma /= config.kernel_scale * config.kernel_scale;
    }

    std::ostringstream os;
    os << "bag_id,label,strategy";
    for (int j = 1; j <= parzen.p; ++j) os << ",h" << j;
    os << '\n';
    for (const auto& bag : bags) {
        const Histogram h = parzen_histogram(bag.scores, parzen);
        os << bag.bag_id << ',' << (bag.label == BagLabel::Cover ? "cover" : "stego") << ','
           << (bag.strategy ? to_string(bag.strategy->kind) : "none");
        for (double v : h) os << ',' << fmt_double(v);
        os << '\n';
    }
    write_out(opts, "histograms.csv", os.str());
    write_out(opts, "parzen.json", parzen_to_json(parzen).dump(2) + "\n");
    return 0;
}

int cmd_train(const CLI::App* cmd, const CommonOpts& opts, const std::string& scores_path) {
    ExperimentConfig config = resolve_config(cmd, opts);
    const auto bags = load_scores(fs::path(scores_path));
    const auto present = detect_strategies(bags);
    if (present.empty()) throw IngestError(scores_path + ": no stego bags to train on");
    config.strategies = present;

    const TrainedPoolers poolers = train_poolers(bags, config);
    write_out(opts, "models.json", poolers_to_json(poolers, config.svm_c).dump(2) + "\n");
    return 0;
}

int cmd_evaluate(const CLI::App* cmd, const CommonOpts& opts, const std::string& scores_path,
                 const std::string& models_path) {
    (void)resolve_config(cmd, opts);  // validates config + overrides
    const auto bags = load_scores(fs::path(scores_path));
    const TrainedPoolers poolers = poolers_from_json(parse_json_file(models_path));

    std::vector<int> sizes;
    for (const auto& bag : bags)
        if (std::find(sizes.begin(), sizes.end(), bag.size()) == sizes.end())
            sizes.push_back(bag.size());
    std::sort(sizes.begin(), sizes.end());

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    std::ostringstream csv;
    csv << "pooling,strategy,bag_size,pe\n";
    for (int b : sizes) {
        std::vector<ScoredBag> of_size;
        for (const auto& bag : bags)
            if (bag.size() == b) of_size.push_back(bag);
        for (Strategy s : detect_strategies(of_size)) {
            const PoolingPe pe = evaluate_pe(of_size, poolers, StrategyId{s, 0.5});
            for (Pooling pooling : kAllPoolings) {
                nlohmann::ordered_json cell;
                cell["pooling"] = to_string(pooling);
                cell["strategy"] = to_string(s);
                cell["bag_size"] = b;
                cell["pe"] = pe.get(pooling);
                cells.push_back(std::move(cell));
                csv << to_string(pooling) << ',' << to_string(s) << ',' << b << ','
                    << fmt_double(pe.get(pooling)) << '\n';
            }
        }
    }
    if (cells.empty()) throw IngestError(scores_path + ": no (cover, stego) groups to evaluate");

    nlohmann::ordered_json j;
    j["cells"] = std::move(cells);
    write_out(opts, "eval.json", j.dump(2) + "\n");
    write_out(opts, "eval.csv", csv.str());
    std::cout << csv.str();
    return 0;
}

int cmd_run_all(const CLI::App* cmd, const CommonOpts& opts) {
    const ExperimentConfig config = resolve_config(cmd, opts);
    const Report report = run_experiment(config, opts.workers);
    write_out(opts, "report.json", report_to_json(report).dump(2) + "\n");
    write_out(opts, "report.csv", report_to_csv(report));
    std::cout << render_report_tables(report);
    return 0;
}

int cmd_report(const CommonOpts& opts, const std::string& report_path) {
    const Report report = report_from_json(parse_json_file(report_path));
    const std::string tables = render_report_tables(report);
    write_out(opts, "tables.txt", tables);
    write_out(opts, "pivot.csv", render_report_pivot_csv(report));
    std::cout << tables;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Image buffers churn at the heap top; without this, glibc returns and
    // refaults those pages constantly.
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
    CLI::App app{"batch steganography & pooled steganalysis workbench"};
    app.require_subcommand(1);

    const ExperimentConfig defaults;

    CommonOpts gen_opts;
    int gen_bags_n = 1, gen_b = 10;
    auto* gen = app.add_subcommand("gen-bags", "generate synthetic cover bags (summary CSV)");
    add_common(gen, gen_opts);
    gen->add_option("--bags", gen_bags_n, "number of bags")->capture_default_str();
    gen->add_option("--b", gen_b, "images per bag")->capture_default_str();

    CommonOpts spread_opts;
    std::string spread_strategy = "linear";
    int spread_bags = 1, spread_b = 10;
    double spread_bptc = defaults.bptc;
    auto* spr = app.add_subcommand("spread", "run one spreading strategy, export allocations");
    add_common(spr, spread_opts);
    spr->add_option("--strategy", spread_strategy, "greedy|linear|usesbeta|ims|dels|dils")
        ->capture_default_str();
    spr->add_option("--bags", spread_bags, "number of bags")->capture_default_str();
    spr->add_option("--b", spread_b, "images per bag")->capture_default_str();
    spr->add_option("--bptc", spread_bptc, "payload, bits per total coefficients")
        ->capture_default_str();

    CommonOpts score_opts;
    int score_pairs = defaults.n_test_pairs, score_b = 10, score_run = 0;
    std::string score_split = "test";
    auto* sco = app.add_subcommand("score", "build a scored cover/stego dataset CSV");
    add_common(sco, score_opts);
    sco->add_option("--pairs", score_pairs, "cover/stego pairs per class")
        ->capture_default_str();
    sco->add_option("--b", score_b, "images per bag")->capture_default_str();
    sco->add_option("--split", score_split, "train|test")->capture_default_str();
    sco->add_option("--run", score_run, "run index (seed stream)")->capture_default_str();

    CommonOpts feat_opts;
    std::string feat_scores, feat_parzen;
    auto* fea = app.add_subcommand("featurize", "turn a score CSV into parzen histograms");
    add_common(fea, feat_opts);
    fea->add_option("--scores", feat_scores, "score CSV path")->required();
    fea->add_option("--parzen", feat_parzen, "existing parzen.json (else fit from scores)");

    CommonOpts train_opts;
    std::string train_scores;
    auto* trn = app.add_subcommand("train", "train all pooling functions from a score CSV");
    add_common(trn, train_opts);
    trn->add_option("--scores", train_scores, "training score CSV path")->required();

    CommonOpts eval_opts;
    std::string eval_scores, eval_models;
    auto* evl = app.add_subcommand("evaluate", "evaluate trained poolers on a score CSV");
    add_common(evl, eval_opts);
    evl->add_option("--scores", eval_scores, "test score CSV path")->required();
    evl->add_option("--models", eval_models, "models.json path")->required();

    CommonOpts run_opts;
    auto* run = app.add_subcommand("run-all", "full protocol: datasets, training, P_e report");
    add_common(run, run_opts);

    CommonOpts report_opts;
    std::string report_path;
    auto* rep = app.add_subcommand("report", "render an existing report.json as tables");
    add_common(rep, report_opts);
    rep->add_option("--report", report_path, "report.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // 0 for --help, 1 + message otherwise
    }

    try {
        if (gen->parsed()) return cmd_gen_bags(gen, gen_opts, gen_bags_n, gen_b);
        if (spr->parsed())
            return cmd_spread(spr, spread_opts, spread_strategy, spread_bags, spread_b,
                              spread_bptc);
        if (sco->parsed())
            return cmd_score(sco, score_opts, score_pairs, score_b, score_split, score_run);
        if (fea->parsed()) return cmd_featurize(fea, feat_opts, feat_scores, feat_parzen);
        if (trn->parsed()) return cmd_train(trn, train_opts, train_scores);
        if (evl->parsed()) return cmd_evaluate(evl, eval_opts, eval_scores, eval_models);
        if (run->parsed()) return cmd_run_all(run, run_opts);
        if (rep->parsed()) return cmd_report(report_opts, report_path);
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
