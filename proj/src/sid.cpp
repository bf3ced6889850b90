#include "stegpool/sid.hpp"

#include "stegpool/errors.hpp"
#include "stegpool/rng.hpp"
#include "stegpool/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace stegpool {

void SidParams::validate() const {
    if (!(sigma_between >= 0)) throw ParamError("SidParams: sigma_between must be >= 0");
    if (!(sigma_within >= 0)) throw ParamError("SidParams: sigma_within must be >= 0");
    if (!(saturation > 0)) throw ParamError("SidParams: saturation must be > 0");
    if (!std::isfinite(gain) || !std::isfinite(bias))
        throw ParamError("SidParams: gain/bias must be finite");
}

double score_image(std::uint64_t seed, const ImageModel& image, double rate_bpc,
                   const SidParams& params) {
    params.validate();
    if (!(rate_bpc >= 0)) throw ParamError("score_image: rate_bpc must be >= 0");

    // Between-image offset: function of (seed, image id) only, so it stays
    // put when the same image is scored at another payload.
    SplitMix64 rng_between(
        seed_child(seed_child(seed, seed_tag::between), static_cast<std::uint64_t>(image.id)));
    const double u_img = params.sigma_between * draw_normal(rng_between);

    SplitMix64 rng_within(seed_child(seed, seed_tag::within));
    const double e = params.sigma_within * draw_normal(rng_within);

    const double raw = params.gain * rate_bpc + params.bias + u_img + e;
    return std::clamp(raw, -params.saturation, params.saturation);
}

ScoredBag score_bag(std::uint64_t seed, const Bag& bag, const Allocation* allocation,
                    const SidParams& params) {
    if (allocation &&
        allocation->bits_per_image.size() != static_cast<std::size_t>(bag.size()))
        throw ParamError("score_bag: allocation length does not match bag size");

    ScoredBag out;
    out.bag_id = bag.bag_id;
    out.label = allocation ? BagLabel::Stego : BagLabel::Cover;
    if (allocation) out.strategy = allocation->strategy;
    out.scores.reserve(static_cast<std::size_t>(bag.size()));
    out.true_rates.reserve(static_cast<std::size_t>(bag.size()));

    for (std::size_t i = 0; i < bag.images.size(); ++i) {
        const auto& img = bag.images[i];
        const double rate = allocation ? allocation->bits_per_image[i] / img.n_coeffs : 0.0;
        const std::uint64_t img_seed =
            seed_child(seed_child(seed, seed_tag::image), static_cast<std::uint64_t>(i));
        out.true_rates.push_back(rate);
        out.scores.push_back(score_image(img_seed, img, rate, params));
    }
    return out;
}

void write_scores_csv(std::ostream& os, std::span<const ScoredBag> bags) {
    os << "bag_id,image_id,score,label,strategy,rate_bpc\n";
    for (const auto& bag : bags) {
        const std::string label = bag.label == BagLabel::Cover ? "cover" : "stego";
        const std::string strat = bag.strategy ? to_string(bag.strategy->kind) : "none";
        for (std::size_t i = 0; i < bag.scores.size(); ++i)
            os << bag.bag_id << ',' << i << ',' << fmt_double(bag.scores[i]) << ',' << label
               << ',' << strat << ',' << fmt_double(bag.true_rates[i]) << '\n';
    }
}

namespace {

struct ScoreRow {
    long long image_id;
    double score;
    BagLabel label;
    std::optional<StrategyId> strategy;
    double rate;
    int line_no;
};

[[noreturn]] void fail(const std::string& name, int line_no, const std::string& what) {
    throw IngestError(name + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<ScoredBag> load_scores(std::istream& is, const std::string& name) {
    std::string line;
    int line_no = 0;
    if (!std::getline(is, line)) throw IngestError(name + ": empty file, header expected");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "bag_id,image_id,score,label,strategy,rate_bpc")
        fail(name, line_no, "bad header '" + line + "'");

    std::map<long long, std::vector<ScoreRow>> rows;
    std::set<std::pair<long long, long long>> seen;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6)
            fail(name, line_no, "expected 6 fields, got " + std::to_string(fields.size()));

        bool ok = false;
        const long long bag_id = parse_int(fields[0], ok);
        if (!ok) fail(name, line_no, "bad bag_id '" + std::string(fields[0]) + "'");
        const long long image_id = parse_int(fields[1], ok);
        if (!ok) fail(name, line_no, "bad image_id '" + std::string(fields[1]) + "'");
        const double score = parse_double(fields[2], ok);
        if (!ok) fail(name, line_no, "non-numeric score '" + std::string(fields[2]) + "'");

        ScoreRow row{};
        row.image_id = image_id;
        row.score = score;
        row.line_no = line_no;
        if (fields[3] == "cover")
            row.label = BagLabel::Cover;
        else if (fields[3] == "stego")
            row.label = BagLabel::Stego;
        else if (fields[3].empty())
            fail(name, line_no, "missing label");
        else
            fail(name, line_no, "bad label '" + std::string(fields[3]) + "'");

        if (fields[4] != "none") {
            StrategyId id;
            try {
                id.kind = strategy_from_string(fields[4]);
            } catch (const ParamError&) {
                fail(name, line_no, "bad strategy '" + std::string(fields[4]) + "'");
            }
            row.strategy = id;
        }
        row.rate = parse_double(fields[5], ok);
        if (!ok || row.rate < 0)
            fail(name, line_no, "bad rate_bpc '" + std::string(fields[5]) + "'");

        if (row.label == BagLabel::Cover && row.strategy)
            fail(name, line_no, "cover row must have strategy none");
        if (row.label == BagLabel::Cover && row.rate != 0)
            fail(name, line_no, "cover row must have rate_bpc 0");
        if (row.label == BagLabel::Stego && !row.strategy)
            fail(name, line_no, "stego row needs a strategy");

        if (!seen.insert({bag_id, image_id}).second)
            fail(name, line_no,
                 "duplicate (bag_id,image_id) = (" + std::to_string(bag_id) + "," +
                     std::to_string(image_id) + ")");
        rows[bag_id].push_back(row);
    }

    std::vector<ScoredBag> bags;
    bags.reserve(rows.size());
    for (auto& [bag_id, bag_rows] : rows) {
        std::sort(bag_rows.begin(), bag_rows.end(),
                  [](const ScoreRow& a, const ScoreRow& b) { return a.image_id < b.image_id; });
        ScoredBag bag;
        bag.bag_id = static_cast<int>(bag_id);
        bag.label = bag_rows.front().label;
        bag.strategy = bag_rows.front().strategy;
        for (const auto& row : bag_rows) {
            if (row.label != bag.label) fail(name, row.line_no, "mixed labels within one bag");
            const bool same_strategy =
                (!row.strategy && !bag.strategy) ||
                (row.strategy && bag.strategy && row.strategy->kind == bag.strategy->kind);
            if (!same_strategy) fail(name, row.line_no, "mixed strategies within one bag");
            bag.scores.push_back(row.score);
            bag.true_rates.push_back(row.rate);
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

std::vector<ScoredBag> load_scores(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IngestError("cannot open score file: " + path.string());
    return load_scores(f, path.filename().string());
}

}  // namespace stegpool
