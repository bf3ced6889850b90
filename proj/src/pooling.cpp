#include "stegpool/pooling.hpp"

#include "stegpool/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stegpool {

double ParzenConfig::spacing() const {
    if (centers.size() < 2) throw ParamError("ParzenConfig: need at least 2 centers");
    return centers[1] - centers[0];
}

void ParzenConfig::validate() const {
    if (p < 2) throw ParamError("ParzenConfig: p must be >= 2");
    if (centers.size() != static_cast<std::size_t>(p))
        throw ParamError("ParzenConfig: centers length must equal p");
    if (!(gamma > 0)) throw ParamError("ParzenConfig: gamma must be > 0");
    const double delta = spacing();
    if (!(delta > 0)) throw ParamError("ParzenConfig: centers must be strictly increasing");
    for (std::size_t j = 1; j < centers.size(); ++j) {
        const double step = centers[j] - centers[j - 1];
        if (!(step > 0) || std::abs(step - delta) > 1e-9 * std::max(1.0, std::abs(delta)))
            throw ParamError("ParzenConfig: center spacing must be constant");
    }
}

ParzenConfig fit_parzen_config(std::span<const double> training_scores, int p) {
    if (p < 2) throw ParamError("fit_parzen_config: p must be >= 2");
    if (training_scores.size() < 2)
        throw ParamError("fit_parzen_config: need at least 2 scores");
    const auto [lo_it, hi_it] =
        std::minmax_element(training_scores.begin(), training_scores.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo))
        throw ParamError("fit_parzen_config: degenerate score range, all scores equal");

    ParzenConfig config;
    config.p = p;
    config.centers.resize(static_cast<std::size_t>(p));
    const double delta = (hi - lo) / (p - 1);
    for (int j = 0; j < p; ++j) config.centers[static_cast<std::size_t>(j)] = lo + delta * j;
    config.centers.back() = hi;  // exact inclusive endpoint
    config.gamma = 1.0 / (2.0 * delta * delta);
    return config;
}

Histogram parzen_histogram(std::span<const double> scores, const ParzenConfig& config) {
    config.validate();
    if (scores.empty()) throw ParamError("parzen_histogram: empty score bag");

    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());

    const auto p = static_cast<Eigen::Index>(config.centers.size());
    Eigen::Map<const Eigen::ArrayXd> centers(config.centers.data(), p);
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(p);
    for (double f : sorted) acc += (-config.gamma * (centers - f).square()).exp();
    acc /= static_cast<double>(sorted.size());

    return Histogram(acc.data(), acc.data() + p);
}

namespace {

// Dual SMO state for the hinge-loss max-margin problem.
struct SmoProblem {
    const std::vector<Histogram>& x;
    std::vector<double> y;      // +-1
    double C;
    std::size_t n;
    std::size_t dim;

    std::vector<double> alpha;
    std::vector<double> grad;   // G_i = y_i (w . x_i) - 1
    std::vector<double> w;
    double sum_alpha = 0;

    std::vector<double> kdiag;
    std::vector<double> kcache;  // full kernel matrix when it fits
    bool cached = false;
    std::vector<double> krow_i, krow_j;

    static constexpr std::size_t kCacheMaxN = 4096;

    SmoProblem(const std::vector<Histogram>& features, const std::vector<int>& labels, double c)
        : x(features), C(c), n(features.size()), dim(features.front().size()) {
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] > 0 ? 1.0 : -1.0;
        alpha.assign(n, 0.0);
        grad.assign(n, -1.0);
        w.assign(dim, 0.0);
        kdiag.resize(n);
        for (std::size_t i = 0; i < n; ++i) kdiag[i] = dot(x[i], x[i]);
        if (n <= kCacheMaxN) {
            kcache.resize(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j <= i; ++j)
                    kcache[i * n + j] = kcache[j * n + i] = dot(x[i], x[j]);
            cached = true;
        } else {
            krow_i.resize(n);
            krow_j.resize(n);
        }
    }

    static double dot(const Histogram& a, const Histogram& b) {
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    }

    const double* kernel_row(std::size_t i, std::vector<double>& scratch) {
        if (cached) return &kcache[i * n];
        for (std::size_t k = 0; k < n; ++k) scratch[k] = dot(x[i], x[k]);
        return scratch.data();
    }

    bool in_up(std::size_t i) const {
        return (y[i] > 0 && alpha[i] < C) || (y[i] < 0 && alpha[i] > 0);
    }
    bool in_low(std::size_t i) const {
        return (y[i] < 0 && alpha[i] < C) || (y[i] > 0 && alpha[i] > 0);
    }

    // v_i = -y_i G_i; optimal intercept lies in [max_up v, min_low v].
    double v(std::size_t i) const { return -y[i] * grad[i]; }

    double dual_objective() const {
        double wsq = 0;
        for (double c : w) wsq += c * c;
        return 0.5 * wsq - sum_alpha;
    }

    double intercept() const {
        double sum = 0;
        int free_count = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (alpha[i] > 0 && alpha[i] < C) {
                sum += v(i);
                ++free_count;
            }
        if (free_count > 0) return sum / free_count;
        double m = -std::numeric_limits<double>::infinity();
        double M = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (in_up(i)) m = std::max(m, v(i));
            if (in_low(i)) M = std::min(M, v(i));
        }
        return 0.5 * (m + M);
    }

    double primal_objective(double b) const {
        double wsq = 0;
        for (double c : w) wsq += c * c;
        double hinge = 0;
        for (std::size_t i = 0; i < n; ++i)
            hinge += std::max(0.0, 1.0 - y[i] * (dot_w(x[i]) + b));
        return 0.5 * wsq + C * hinge;
    }

    double dot_w(const Histogram& h) const {
        return std::inner_product(w.begin(), w.end(), h.begin(), 0.0);
    }
};

}  // namespace

LinearModel train_linear_svm(const std::vector<Histogram>& features,
                             const std::vector<int>& labels, double C, SvmTrainStats* stats) {
    if (features.empty() || features.size() != labels.size())
        throw ParamError("train_linear_svm: features/labels size mismatch");
    if (!(C > 0)) throw ParamError("train_linear_svm: C must be > 0");
    const std::size_t dim = features.front().size();
    if (dim == 0) throw ParamError("train_linear_svm: empty feature vectors");
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != dim)
            throw ParamError("train_linear_svm: inconsistent feature dimensions");
        if (labels[i] > 0)
            ++pos;
        else
            ++neg;
    }
    if (pos == 0 || neg == 0)
        throw TrainingError("train_linear_svm: need at least one example per class");

    SmoProblem prob(features, labels, C);
    const long long max_iter = 2'000'000;
    double eps = 1e-6;
    long long iter = 0;
    double violation = 0;

    if (stats) {
        stats->objective_trace.clear();
        stats->objective_trace.push_back(prob.dual_objective());
    }

    while (true) {
        // Maximal violating pair.
        std::size_t best_i = prob.n, best_j = prob.n;
        double m = -std::numeric_limits<double>::infinity();
        double M = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < prob.n; ++k) {
            const double vk = prob.v(k);
            if (prob.in_up(k) && vk > m) {
                m = vk;
                best_i = k;
            }
            if (prob.in_low(k) && vk < M) {
                M = vk;
                best_j = k;
            }
        }
        violation = m - M;
        if (violation <= eps || best_i == prob.n || best_j == prob.n) {
            // Optimality by KKT gap; verify the primal-dual gap and tighten
            // eps if the objective is not yet at 1e-6 relative precision.
            const double b = prob.intercept();
            const double primal = prob.primal_objective(b);
            const double dual = -prob.dual_objective();
            const double gap = primal - dual;
            if (gap <= 1e-6 * std::max(1.0, std::abs(primal)) || eps <= 1e-12) {
                LinearModel model;
                model.weights = prob.w;
                model.intercept = b;
                model.delta = 0;
                if (stats) {
                    stats->kkt_violation = std::max(violation, 0.0);
                    stats->duality_gap = gap;
                    stats->iterations = iter;
                }
                if (eps <= 1e-12 && gap > 1e-4 * std::max(1.0, std::abs(primal)))
                    throw TrainingError("train_linear_svm: did not reach requested precision");
                return model;
            }
            eps *= 0.1;
            continue;
        }
        if (iter++ >= max_iter)
            throw TrainingError("train_linear_svm: iteration cap hit before convergence");

        const std::size_t i = best_i, j = best_j;
        const double slope = prob.y[i] * prob.grad[i] - prob.y[j] * prob.grad[j];  // < 0
        const double* row_i = prob.kernel_row(i, prob.krow_i);
        const double* row_j = prob.kernel_row(j, prob.krow_j);
        const double eta = prob.kdiag[i] + prob.kdiag[j] - 2.0 * row_i[j];

        const double room_i = prob.y[i] > 0 ? prob.C - prob.alpha[i] : prob.alpha[i];
        const double room_j = prob.y[j] > 0 ? prob.alpha[j] : prob.C - prob.alpha[j];
        double step = std::min(room_i, room_j);
        if (eta > 0) step = std::min(step, -slope / eta);

        prob.alpha[i] += prob.y[i] * step;
        prob.alpha[j] -= prob.y[j] * step;
        prob.sum_alpha += step * (prob.y[i] - prob.y[j]);

        for (std::size_t k = 0; k < prob.n; ++k)
            prob.grad[k] += prob.y[k] * step * (row_i[k] - row_j[k]);
        for (std::size_t d = 0; d < prob.dim; ++d)
            prob.w[d] += step * (features[i][d] - features[j][d]);

        if (stats) stats->objective_trace.push_back(prob.dual_objective());
    }
}

double svm_margin(const LinearModel& model, const Histogram& h) {
    if (model.weights.size() != h.size())
        throw ParamError("svm_margin: dimension mismatch, model p=" +
                         std::to_string(model.weights.size()) + " vs histogram p=" +
                         std::to_string(h.size()));
    return std::inner_product(model.weights.begin(), model.weights.end(), h.begin(),
                              model.intercept);
}

double scalar_pool(std::span<const double> scores, PoolKind kind) {
    if (scores.empty()) throw ParamError("scalar_pool: empty score bag");
    if (kind == PoolKind::Max) return *std::max_element(scores.begin(), scores.end());
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0;
    for (double v : sorted) sum += v;
    return sum / static_cast<double>(sorted.size());
}

ThresholdRule optimize_threshold(std::span<const double> neg_stats,
                                 std::span<const double> pos_stats) {
    if (neg_stats.empty() || pos_stats.empty())
        throw ParamError("optimize_threshold: both classes must be non-empty");

    std::vector<double> neg(neg_stats.begin(), neg_stats.end());
    std::vector<double> pos(pos_stats.begin(), pos_stats.end());
    std::sort(neg.begin(), neg.end());
    std::sort(pos.begin(), pos.end());

    std::vector<double> all;
    all.reserve(neg.size() + pos.size());
    all.insert(all.end(), neg.begin(), neg.end());
    all.insert(all.end(), pos.begin(), pos.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> taus;
    taus.reserve(all.size() + 1);
    taus.push_back(-inf);
    for (std::size_t k = 0; k + 1 < all.size(); ++k) taus.push_back(0.5 * (all[k] + all[k + 1]));
    taus.push_back(inf);

    const auto n_neg = static_cast<double>(neg.size());
    const auto n_pos = static_cast<double>(pos.size());
    ThresholdRule best;
    best.pe = 2.0;
    for (double tau : taus) {
        // counts under the actual decision rule (value > tau -> stego)
        const auto neg_above =
            static_cast<double>(neg.end() - std::upper_bound(neg.begin(), neg.end(), tau));
        const auto pos_below =
            static_cast<double>(std::upper_bound(pos.begin(), pos.end(), tau) - pos.begin());
        const double pe_above = 0.5 * (neg_above / n_neg + pos_below / n_pos);
        const double pe_below = 1.0 - pe_above;
        if (pe_above < best.pe) best = {tau, true, pe_above};
        if (pe_below < best.pe) best = {tau, false, pe_below};
    }
    return best;
}

std::string to_string(PoolDomain d) {
    return d == PoolDomain::Score ? "score" : "histogram";
}

PoolDomain pool_domain_from_string(std::string_view s) {
    if (s == "score") return PoolDomain::Score;
    if (s == "histogram") return PoolDomain::Histogram;
    throw ParamError("unknown pool_domain: " + std::string(s));
}

nlohmann::ordered_json model_to_json(const LinearModel& model, const ParzenConfig& config,
                                     PoolDomain domain) {
    nlohmann::ordered_json j;
    j["p"] = config.p;
    j["centers"] = config.centers;
    j["gamma"] = config.gamma;
    j["weights"] = model.weights;
    j["intercept"] = model.intercept;
    j["delta"] = model.delta;
    j["pool_domain"] = to_string(domain);
    return j;
}

void model_from_json(const nlohmann::ordered_json& j, LinearModel& model, ParzenConfig& config,
                     PoolDomain& domain) {
    config.p = j.at("p").get<int>();
    config.centers = j.at("centers").get<std::vector<double>>();
    config.gamma = j.at("gamma").get<double>();
    config.validate();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.intercept = j.at("intercept").get<double>();
    model.delta = j.at("delta").get<double>();
    domain = pool_domain_from_string(j.at("pool_domain").get<std::string>());
    if (model.weights.size() != static_cast<std::size_t>(config.p))
        throw MismatchError("model file: weights length does not match p");
}

}  // namespace stegpool
