// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Criteria 7-9 share a single desk-scale experiment (bag sizes
// {2,10,50}, 500 train + 500 test pairs per class, 5 runs, default seed).

#include "stegpool/config.hpp"
#include "stegpool/errors.hpp"
#include "stegpool/harness.hpp"
#include "stegpool/parallel.hpp"
#include "stegpool/rng.hpp"
#include "stegpool/util.hpp"

#include "oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

using namespace stegpool;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_t0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - g_t0).count();
    std::printf("[%s] criterion %2d: %s (%s) [t=%.0fs]\n", pass ? "PASS" : "FAIL", criterion,
                what.c_str(), detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

ImageModel random_image(std::uint64_t seed, int n) {
    CoverParams params;
    params.n_coeffs = n;
    return gen_image(seed, 0, params);
}

// ---- criterion 1: solver vs exhaustive log-grid oracle --------------------

void criterion_1() {
    struct Case {
        double value = 0;
        double lambda_solved = 0;
        double got = 0;
        double lambda_oracle = 0;
    };
    const int n_images = 50;
    std::vector<Case> cases(static_cast<std::size_t>(n_images) * 3);

    parallel_for(cases.size(), 0, [&](std::size_t idx) {
        const int img_idx = static_cast<int>(idx / 3);
        const auto target = static_cast<SolveTarget>(idx % 3);
        SplitMix64 rng(seed_child(4242, idx));
        const int n = 1 + static_cast<int>(rng.below(32));
        const ImageModel img =
            random_image(seed_child(777, static_cast<std::uint64_t>(img_idx)), n);
        // pick a target value mid-curve so the oracle grid brackets it
        const double lambda_true = std::exp(-3.0 + 6.0 * rng.uniform01());
        Case c;
        c.value = oracle::functional(img, target, lambda_true);
        const EmbedSolution sol = solve_lambda(img, target, c.value);
        c.lambda_solved = sol.lambda;
        c.got = target == SolveTarget::Payload      ? sol.payload_bits
                : target == SolveTarget::Distortion ? sol.distortion
                                                    : sol.deflection;
        const oracle::GridSolution grid =
            oracle::grid_solve(img, target, c.value, 1'000'000, 1e-10, 1e8);
        c.lambda_oracle = grid.lambda;
        cases[idx] = c;
    });

    double worst_value = 0, worst_lambda = 0;
    for (const auto& c : cases) {
        worst_value = std::max(worst_value,
                               std::abs(c.got - c.value) / std::max(std::abs(c.value), 1e-300));
        worst_lambda =
            std::max(worst_lambda,
                     std::abs(c.lambda_solved - c.lambda_oracle) / std::max(c.lambda_oracle, 1e-300));
    }
    const bool ok = worst_value < 1e-6 && worst_lambda < 1e-4;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "max functional err %.2e (tol 1e-6), max lambda err %.2e (tol 1e-4)",
                  worst_value, worst_lambda);
    report(1, ok, "solve_lambda matches the exhaustive grid oracle", buf);
}

// ---- criterion 2: allocation invariants over random bags ------------------

double coefficient_of_variation(const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (mean == 0) return 0;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size())) / mean;
}

void criterion_2() {
    const int n_bags = 1000;
    struct Worst {
        double conservation = 0;
        double dels_cv = 0;
        double dils_cv = 0;
        double ims_lambda_spread = 0;
        double greedy_overrun = 0;
        bool usesbeta_equal = true;
        bool failed = false;
    };
    std::vector<Worst> results(static_cast<std::size_t>(n_bags));

    parallel_for(results.size(), 0, [&](std::size_t idx) {
        Worst w;
        SplitMix64 rng(seed_child(100200, idx));
        CoverParams params;
        params.n_coeffs = 64 + static_cast<int>(rng.below(129));
        const int b = 1 + static_cast<int>(rng.below(6));
        const Bag bag = gen_bag(seed_child(5, idx), static_cast<int>(idx), b, params);
        const double bptc = 0.02 + 0.28 * rng.uniform01();
        const double total = total_bits_for(bag, bptc);

        try {
            for (Strategy s : kAllStrategies) {
                const Allocation a = spread(bag, total, {s, 0.5}, seed_child(17, idx));
                double sum = 0;
                for (double bits : a.bits_per_image) sum += bits;
                w.conservation =
                    std::max(w.conservation, std::abs(sum - total) / std::max(total, 1e-300));
                if (s == Strategy::Greedy)
                    for (int i = 0; i < b; ++i)
                        w.greedy_overrun = std::max(
                            w.greedy_overrun,
                            a.bits_per_image[static_cast<std::size_t>(i)] -
                                1.0 * bag.images[static_cast<std::size_t>(i)].n_coeffs);
                if (s == Strategy::DeLS || s == Strategy::DiLS) {
                    std::vector<double> levels;
                    for (int i = 0; i < b; ++i) {
                        const EmbedSolution sol =
                            solve_lambda(bag.images[static_cast<std::size_t>(i)],
                                         SolveTarget::Payload,
                                         a.bits_per_image[static_cast<std::size_t>(i)]);
                        levels.push_back(s == Strategy::DeLS ? sol.deflection : sol.distortion);
                    }
                    const double cv = coefficient_of_variation(levels);
                    if (s == Strategy::DeLS)
                        w.dels_cv = std::max(w.dels_cv, cv);
                    else
                        w.dils_cv = std::max(w.dils_cv, cv);
                }
                if (s == Strategy::IMS) {
                    AlignedVec merged;
                    for (const auto& img : bag.images)
                        merged.insert(merged.end(), img.costs.begin(), img.costs.end());
                    EmbedProblem whole(merged, {});
                    const double lambda_star = whole.solve(SolveTarget::Payload, total);
                    double lo = 1e300, hi = 0;
                    for (int i = 0; i < b; ++i) {
                        const double li =
                            solve_lambda(bag.images[static_cast<std::size_t>(i)],
                                         SolveTarget::Payload,
                                         a.bits_per_image[static_cast<std::size_t>(i)])
                                .lambda;
                        lo = std::min(lo, li);
                        hi = std::max(hi, li);
                    }
                    w.ims_lambda_spread = std::max(w.ims_lambda_spread, (hi - lo) / lambda_star);
                }
            }
            const Allocation beta1 = spread_uses_beta(bag, total, 1.0, seed_child(23, idx));
            const Allocation lin = spread_linear(bag, total);
            w.usesbeta_equal = beta1.bits_per_image == lin.bits_per_image;
        } catch (const std::exception&) {
            w.failed = true;
        }
        results[idx] = w;
    });

    Worst agg;
    int failures = 0;
    for (const auto& w : results) {
        if (w.failed) ++failures;
        agg.conservation = std::max(agg.conservation, w.conservation);
        agg.dels_cv = std::max(agg.dels_cv, w.dels_cv);
        agg.dils_cv = std::max(agg.dils_cv, w.dils_cv);
        agg.ims_lambda_spread = std::max(agg.ims_lambda_spread, w.ims_lambda_spread);
        agg.greedy_overrun = std::max(agg.greedy_overrun, w.greedy_overrun);
        agg.usesbeta_equal = agg.usesbeta_equal && w.usesbeta_equal;
    }
    const bool ok = failures == 0 && agg.conservation < 1e-6 && agg.dels_cv < 1e-3 &&
                    agg.dils_cv < 1e-3 && agg.ims_lambda_spread < 1e-6 &&
                    agg.greedy_overrun <= 1e-9 && agg.usesbeta_equal;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "cons %.1e, DeLS cv %.1e, DiLS cv %.1e, IMS spread %.1e, greedy overrun %.1e, "
                  "beta1==linear %s, errors %d",
                  agg.conservation, agg.dels_cv, agg.dils_cv, agg.ims_lambda_spread,
                  agg.greedy_overrun, agg.usesbeta_equal ? "yes" : "NO", failures);
    report(2, ok, "allocation invariants on 1000 random bags x 6 strategies", buf);
}

// ---- criterion 3: histogram exactness and invariances ---------------------

void criterion_3() {
    SplitMix64 rng(33);
    bool exact = true, perm = true, dims = true;
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(1 + rng.below(40));
        for (double& s : scores) s = 4.0 * rng.uniform01() - 2.0;
        std::vector<double> fit_scores = scores;
        fit_scores.push_back(-2.1);
        fit_scores.push_back(2.1);
        const ParzenConfig config =
            fit_parzen_config(fit_scores, 2 + static_cast<int>(rng.below(99)));
        const Histogram h = parzen_histogram(scores, config);

        // direct double loop
        for (std::size_t j = 0; j < config.centers.size(); ++j) {
            double acc = 0;
            for (double f : scores) {
                const double d = f - config.centers[j];
                acc += std::exp(-config.gamma * d * d);
            }
            acc /= static_cast<double>(scores.size());
            worst = std::max(worst, std::abs(acc - h[j]));
            if (std::abs(acc - h[j]) > 1e-12) exact = false;
        }
        // random permutation, exact equality
        std::vector<int> idx(scores.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        shuffle_indices(rng, idx);
        std::vector<double> shuffled(scores.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            shuffled[i] = scores[static_cast<std::size_t>(idx[i])];
        if (parzen_histogram(shuffled, config) != h) perm = false;
    }
    const ParzenConfig c100 = fit_parzen_config(std::vector<double>{-1.0, 1.0}, 100);
    for (int b : {1, 10, 200}) {
        std::vector<double> scores(static_cast<std::size_t>(b));
        for (double& s : scores) s = 2.0 * rng.uniform01() - 1.0;
        if (parzen_histogram(scores, c100).size() != 100) dims = false;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "max |h - direct| = %.1e, permutation %s, p fixed %s", worst,
                  perm ? "exact" : "BROKEN", dims ? "yes" : "NO");
    report(3, exact && perm && dims, "parzen histogram exactness and invariances", buf);
}

// ---- criterion 4: classifier sanity ----------------------------------------

void criterion_4() {
    SplitMix64 rng(44);
    std::vector<Histogram> feats;
    std::vector<int> labels, flipped;
    for (int i = 0; i < 200; ++i) {
        const int y = i < 100 ? -1 : +1;
        Histogram h(10);
        for (double& v : h) v = draw_normal(rng) * 0.2 + (y > 0 ? 1.0 : 0.0);
        feats.push_back(h);
        labels.push_back(y);
        flipped.push_back(-y);
    }
    SvmTrainStats stats;
    const LinearModel model = train_linear_svm(feats, labels, 1.0, &stats);
    int correct = 0;
    for (std::size_t i = 0; i < feats.size(); ++i)
        correct += (svm_margin(model, feats[i]) > 0) == (labels[i] > 0);
    const double acc = static_cast<double>(correct) / 200.0;

    bool monotone = true;
    for (std::size_t k = 1; k < stats.objective_trace.size(); ++k)
        if (stats.objective_trace[k] >
            stats.objective_trace[k - 1] + 1e-8 * (1.0 + std::abs(stats.objective_trace[k])))
            monotone = false;

    const LinearModel neg = train_linear_svm(feats, flipped, 1.0);
    bool negated = neg.intercept == -model.intercept;
    for (std::size_t d = 0; d < model.weights.size(); ++d)
        if (neg.weights[d] != -model.weights[d]) negated = false;

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "train acc %.3f (>=0.99), objective monotone %s, label flip negates %s, kkt %.1e",
                  acc, monotone ? "yes" : "NO", negated ? "exactly" : "NO", stats.kkt_violation);
    report(4, acc >= 0.99 && monotone && negated && stats.kkt_violation < 1e-4,
           "max-margin trainer on separable blobs", buf);
}

// ---- criterion 5: threshold optimality --------------------------------------

void criterion_5() {
    SplitMix64 rng(55);
    bool all_equal = true;
    double worst_gap = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> neg(1 + rng.below(20)), pos(1 + rng.below(20));
        for (double& v : neg) v = std::round(rng.uniform01() * 12.0) / 6.0;
        for (double& v : pos) v = std::round(rng.uniform01() * 12.0) / 6.0 + 1.0 / 6.0;
        const ThresholdRule rule = optimize_threshold(neg, pos);

        // brute force over every cut and both orientations
        std::vector<double> all(neg.begin(), neg.end());
        all.insert(all.end(), pos.begin(), pos.end());
        std::sort(all.begin(), all.end());
        std::vector<double> taus{-1e308, 1e308};
        for (std::size_t k = 0; k + 1 < all.size(); ++k)
            if (all[k] < all[k + 1]) taus.push_back(0.5 * (all[k] + all[k + 1]));
        double best = 1.0;
        for (double tau : taus) {
            int fa = 0, md = 0;
            for (double v : neg) fa += v > tau;
            for (double v : pos) md += v <= tau;
            const double pe = 0.5 * (static_cast<double>(fa) / static_cast<double>(neg.size()) +
                                     static_cast<double>(md) / static_cast<double>(pos.size()));
            best = std::min(best, std::min(pe, 1.0 - pe));
        }
        worst_gap = std::max(worst_gap, std::abs(rule.pe - best));
        if (rule.pe != best) all_equal = false;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "100 instances, max |pe - brute force| = %.1e", worst_gap);
    report(5, all_equal, "optimize_threshold equals brute-force enumeration", buf);
}

// ---- criterion 6: chance and perfection anchors -----------------------------

void criterion_6() {
    // chance: gain 0 leaves nothing to detect
    ExperimentConfig chance;
    chance.seed = 6;
    chance.runs = 2;
    chance.bag_sizes = {2, 10};
    chance.n_train_pairs = 150;
    chance.n_test_pairs = 150;
    chance.cover.n_coeffs = 1024;
    chance.sid.gain = 0.0;
    const Report chance_report = run_experiment(chance, 0);
    const double sigma =
        0.5 * std::sqrt(0.25 / 150 + 0.25 / 150) / std::sqrt(2.0);  // 2 runs averaged
    double worst_dev = 0;
    for (const auto& cell : chance_report.cells)
        worst_dev = std::max(worst_dev, std::abs(cell.pe_mean - 0.5));
    const bool chance_ok = worst_dev <= 3.0 * sigma;

    // perfection: a noiseless detector separates everything
    ExperimentConfig clean;
    clean.seed = 7;
    clean.runs = 1;
    clean.bag_sizes = {2, 10};
    clean.n_train_pairs = 80;
    clean.n_test_pairs = 80;
    clean.cover.n_coeffs = 1024;
    clean.sid.sigma_between = 0.0;
    clean.sid.sigma_within = 0.0;
    const Report clean_report = run_experiment(clean, 0);
    double worst_pe = 0;
    for (const auto& cell : clean_report.cells) worst_pe = std::max(worst_pe, cell.pe_mean);

    char buf[140];
    std::snprintf(buf, sizeof(buf),
                  "gain=0 max |pe-0.5| = %.3f (3 sigma = %.3f); noiseless max pe = %.4f",
                  worst_dev, 3.0 * sigma, worst_pe);
    report(6, chance_ok && worst_pe == 0.0, "chance and perfection anchors", buf);
}

// ---- criteria 7-9: desk-scale qualitative reproduction ----------------------

double cell_pe(const Report& r, Pooling pooling, Strategy s, int b) {
    const ReportCell* cell = r.find(pooling, s, b);
    return cell ? cell->pe_mean : -1.0;
}

double pooling_mean(const Report& r, Pooling pooling, int b) {
    double sum = 0;
    int count = 0;
    for (Strategy s : kAllStrategies) {
        const double pe = cell_pe(r, pooling, s, b);
        if (pe >= 0) {
            sum += pe;
            ++count;
        }
    }
    return sum / count;
}

void criteria_7_8_9(const Report& r) {
    // 7: clairvoyant ordering at b = 10
    const double greedy = cell_pe(r, Pooling::Clair, Strategy::Greedy, 10);
    const double usesbeta = cell_pe(r, Pooling::Clair, Strategy::UsesBeta, 10);
    const double linear = cell_pe(r, Pooling::Clair, Strategy::Linear, 10);
    const double dels = cell_pe(r, Pooling::Clair, Strategy::DeLS, 10);
    const double trio = std::max({cell_pe(r, Pooling::Clair, Strategy::DiLS, 10),
                                  cell_pe(r, Pooling::Clair, Strategy::IMS, 10), dels});
    const bool c7 = greedy <= usesbeta + 0.02 && usesbeta <= linear + 0.02 &&
                    linear <= trio + 0.02 && dels >= greedy + 0.05;
    char buf7[220];
    std::snprintf(buf7, sizeof(buf7),
                  "clair b=10: greedy %.3f <= usesbeta %.3f <= linear %.3f <= max(dels,ims,dils) "
                  "%.3f (+0.02 each); dels-greedy %.3f >= 0.05",
                  greedy, usesbeta, linear, trio, dels - greedy);
    report(7, c7, "spreading-strategy ordering under the clairvoyant pooler", buf7);

    // 8: pooling-function ordering averaged over the strategies
    bool c8 = true;
    std::ostringstream detail8;
    detail8.precision(4);
    detail8 << std::fixed;
    for (int b : {2, 10, 50}) {
        const double m_clair = pooling_mean(r, Pooling::Clair, b);
        const double m_disc = pooling_mean(r, Pooling::Disc, b);
        const double m_mean = pooling_mean(r, Pooling::Mean, b);
        const double m_max = pooling_mean(r, Pooling::Max, b);
        const bool ok = m_clair <= m_disc && m_disc <= std::min(m_mean, m_max) + 0.01;
        c8 = c8 && ok;
        detail8 << "b=" << b << ": " << m_clair << " <= " << m_disc << " <= min(" << m_mean
                << "," << m_max << ")+0.01" << (ok ? "" : " VIOLATED") << "; ";
    }
    report(8, c8, "pooling-function ordering (clair <= disc <= mean/max + 0.01)", detail8.str());

    // 9: clairvoyant P_e non-increasing from b=2 to b=50
    bool c9 = true;
    double worst_rise = -1;
    for (Strategy s : kAllStrategies) {
        const double rise = cell_pe(r, Pooling::Clair, s, 50) - cell_pe(r, Pooling::Clair, s, 2);
        worst_rise = std::max(worst_rise, rise);
        if (rise > 0.01) c9 = false;
    }
    char buf9[96];
    std::snprintf(buf9, sizeof(buf9), "max pe(b=50) - pe(b=2) = %.4f (tol 0.01)", worst_rise);
    report(9, c9, "pooling gain with bag size under the clairvoyant pooler", buf9);
}

// ---- criterion 10: determinism of run-all -----------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STEGPOOL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

void criterion_10() {
    const fs::path base = fs::temp_directory_path() / "stegpool_acceptance";
    fs::remove_all(base);
    const std::string common =
        " --seed 9 --set runs=2 --set bag_sizes=[2,6] --set n_train_pairs=25"
        " --set n_test_pairs=25 --set cover.n_coeffs=2048";
    bool ok = true;
    std::string detail;
    if (run_cli("run-all --workers 1" + common + " --out " + (base / "a").string()) != 0 ||
        run_cli("run-all --workers 1" + common + " --out " + (base / "b").string()) != 0 ||
        run_cli("run-all --workers 8" + common + " --out " + (base / "c").string()) != 0) {
        ok = false;
        detail = "run-all invocation failed";
    } else {
        const std::string ra = read_file(base / "a" / "report.json");
        const std::string rb = read_file(base / "b" / "report.json");
        const std::string rc = read_file(base / "c" / "report.json");
        const bool repeat_ok = ra == rb;
        const bool workers_ok = ra == rc;
        ok = repeat_ok && workers_ok;
        detail = std::string("repeat run byte-identical: ") + (repeat_ok ? "yes" : "NO") +
                 ", workers 1 vs 8 byte-identical: " + (workers_ok ? "yes" : "NO");
    }
    report(10, ok, "run-all determinism", detail);
}

}  // namespace

int main() {
#ifdef __GLIBC__
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
    g_t0 = std::chrono::steady_clock::now();

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();

    // shared desk-scale experiment for criteria 7-9
    ExperimentConfig desk;
    desk.runs = 5;
    desk.bag_sizes = {2, 10, 50};
    std::printf("running the desk-scale experiment (3 bag sizes x 5 runs x 500+500 pairs)...\n");
    std::fflush(stdout);
    const Report r = run_experiment(desk, 0);
    criteria_7_8_9(r);
    double worst_var = 0;
    for (const auto& cell : r.cells) worst_var = std::max(worst_var, cell.pe_var);
    std::printf("[info] max per-cell P_e variance over runs = %.2e (reference scale < 1e-3)\n",
                worst_var);

    criterion_10();

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
