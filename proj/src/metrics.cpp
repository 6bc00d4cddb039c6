#include "te/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace te {

namespace {

void require_rows(const PredictionSet& preds, const char* what) {
    if (preds.empty()) throw MetricError(std::string(what) + ": empty prediction set");
}

struct RowCounts {
    int inter = 0, truth = 0, pred = 0, missing = 0, spurious = 0, uni = 0;
};

RowCounts count_row(const PredictionRow& r) {
    RowCounts c;
    for (int i = 0; i < kNumTags; ++i) {
        bool y = r.truth.bits[static_cast<std::size_t>(i)];
        bool p = r.pred.bits[static_cast<std::size_t>(i)];
        c.inter += y && p;
        c.truth += y;
        c.pred += p;
        c.missing += y && !p;
        c.spurious += !y && p;
        c.uni += y || p;
    }
    return c;
}

}  // namespace

double exact_match_ratio(const PredictionSet& preds) {
    require_rows(preds, "exact_match_ratio");
    int exact = 0;
    for (const auto& r : preds) exact += r.truth == r.pred;
    return static_cast<double>(exact) / static_cast<double>(preds.size());
}

Pra example_based(const PredictionSet& preds) {
    require_rows(preds, "example_based");
    Pra out;
    for (const auto& r : preds) {
        RowCounts c = count_row(r);
        // empty sets score 1 (vacuous correctness); empty prediction vs
        // nonempty truth scores 0
        out.precision += c.pred ? static_cast<double>(c.inter) / c.pred : (c.truth ? 0.0 : 1.0);
        out.recall += c.truth ? static_cast<double>(c.inter) / c.truth : (c.pred ? 0.0 : 1.0);
        out.accuracy += c.uni ? static_cast<double>(c.inter) / c.uni : 1.0;
    }
    const double n = static_cast<double>(preds.size());
    out.precision /= n;
    out.recall /= n;
    out.accuracy /= n;
    return out;
}

Pra label_based(const PredictionSet& preds) {
    require_rows(preds, "label_based");
    Pra out;
    for (int i = 0; i < kNumTags; ++i) {
        long tp = 0, fp = 0, fn = 0;
        for (const auto& r : preds) {
            bool y = r.truth.bits[static_cast<std::size_t>(i)];
            bool p = r.pred.bits[static_cast<std::size_t>(i)];
            tp += y && p;
            fp += !y && p;
            fn += y && !p;
        }
        // zero-denominator labels contribute 0, not skipped
        out.precision += tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        out.recall += tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
        out.accuracy += tp + fp + fn ? static_cast<double>(tp) / (tp + fp + fn) : 0.0;
    }
    out.precision /= kNumTags;
    out.recall /= kNumTags;
    out.accuracy /= kNumTags;
    return out;
}

double alpha_score(const PredictionSet& preds, const AlphaParams& params) {
    require_rows(preds, "alpha_score");
    if (params.alpha < 0 || params.beta < 0 || params.gamma < 0)
        throw MetricError("alpha_score: parameters must be nonnegative");
    double acc = 0.0;
    for (const auto& r : preds) {
        RowCounts c = count_row(r);
        double uni = c.uni ? static_cast<double>(c.uni) : 1.0;
        double base = 1.0 - (params.beta * c.missing + params.gamma * c.spurious) / uni;
        base = std::max(base, 0.0);
        acc += std::pow(base, params.alpha);
    }
    return acc / static_cast<double>(preds.size());
}

std::vector<AlphaParams> default_alpha_grid() {
    return {{1, 1, 1}, {1, 0.75, 0.25}, {1, 0.25, 0.75}};
}

MetricsReport full_report(const PredictionSet& preds, const std::vector<AlphaParams>& grid,
                          double threshold) {
    MetricsReport rep;
    rep.emr = exact_match_ratio(preds);
    rep.example_based = example_based(preds);
    rep.label_based = label_based(preds);
    for (const auto& p : grid) rep.alpha_scores.emplace_back(p, alpha_score(preds, p));
    rep.rows = static_cast<int>(preds.size());
    rep.threshold = threshold;
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["EMR"] = emr;
    j["Example-Based"] = {{"Prec", example_based.precision},
                          {"Recall", example_based.recall},
                          {"Acc", example_based.accuracy}};
    j["Label-Based"] = {{"Prec", label_based.precision},
                        {"Recall", label_based.recall},
                        {"Acc", label_based.accuracy}};
    nlohmann::json alpha = nlohmann::json::array();
    for (const auto& [p, s] : alpha_scores)
        alpha.push_back({{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"score", s}});
    j["Alpha-Evaluation"] = alpha;
    j["rows"] = rows;
    j["threshold"] = threshold;
    return j.dump(2);
}

AffordanceVector mfl_combination(const std::vector<AffordanceVector>& training_labels) {
    if (training_labels.empty()) throw MetricError("mfl: empty training labels");
    std::map<std::array<std::uint8_t, kNumTags>, long> counts;
    for (const auto& l : training_labels) ++counts[l.bits];
    long best_count = -1;
    AffordanceVector best;
    for (const auto& [bits, n] : counts)
        if (n > best_count) {  // map iterates in lexicographic bit order; first max wins
            best_count = n;
            best.bits = bits;
        }
    return best;
}

MetricsReport mfl_baseline(const std::vector<AffordanceVector>& training_labels,
                           const std::vector<AffordanceVector>& test_truths) {
    AffordanceVector modal = mfl_combination(training_labels);
    PredictionSet preds;
    for (const auto& t : test_truths) preds.push_back({t, modal});
    return full_report(preds);
}

namespace {

constexpr int kSolidTag = 11;        // index of Solid in the fixed order
constexpr int kCollectableTag = 3;
constexpr int kHazardTag = 6;

struct Center {
    double x, y;
};

std::vector<Center> platform_centers(const LevelGrid& lvl) {
    std::vector<Center> out;
    auto solid = [&](int y, int x) {
        return lvl.aff(y, x).bits[static_cast<std::size_t>(kSolidTag)] != 0;
    };
    for (int y = 0; y < lvl.height; ++y) {
        int x = 0;
        while (x < lvl.width) {
            // maximal run of Solid tiles with open air directly above
            if (solid(y, x) && (y == 0 || !solid(y - 1, x))) {
                int start = x;
                while (x < lvl.width && solid(y, x) && (y == 0 || !solid(y - 1, x))) ++x;
                out.push_back({0.5 * (start + (x - 1)), static_cast<double>(y)});
            } else {
                ++x;
            }
        }
    }
    return out;
}

}  // namespace

double linearity(const LevelGrid& level, bool literal_normalization) {
    auto centers = platform_centers(level);
    const std::size_t n = centers.size();
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& c : centers) {
        sx += c.x;
        sy += c.y;
        sxx += c.x * c.x;
        sxy += c.x * c.y;
    }
    const double dn = static_cast<double>(n);
    double denom = sxx - sx * sx / dn;
    double mean_dist;
    if (std::abs(denom) < 1e-12) {
        // vertical stack of centers: the best-fit vertical line has zero
        // horizontal residuals
        mean_dist = 0.0;
    } else {
        double slope = (sxy - sx * sy / dn) / denom;
        double intercept = (sy - slope * sx) / dn;
        double acc = 0.0;
        for (const auto& c : centers)
            acc += std::abs(slope * c.x - c.y + intercept) / std::sqrt(slope * slope + 1.0);
        mean_dist = acc / dn;
    }
    return literal_normalization ? mean_dist / dn : mean_dist;
}

double leniency(const LevelGrid& level) {
    long score = 0;
    for (const auto& a : level.affordances) {
        score += a.bits[static_cast<std::size_t>(kCollectableTag)] ? 1 : 0;
        score -= a.bits[static_cast<std::size_t>(kHazardTag)] ? 1 : 0;
    }
    return static_cast<double>(score) / static_cast<double>(level.affordances.size());
}

std::vector<ExpressiveRangePoint> expressive_range(const std::vector<LevelGrid>& levels) {
    std::vector<ExpressiveRangePoint> out;
    for (const auto& lvl : levels)
        out.push_back({lvl.level_id, linearity(lvl), leniency(lvl)});
    return out;
}

std::string expressive_range_csv(const std::vector<ExpressiveRangePoint>& points) {
    std::ostringstream os;
    os << "level_id,linearity,leniency\n";
    os.precision(12);
    for (const auto& p : points)
        os << p.level_id << "," << p.linearity << "," << p.leniency << "\n";
    return os.str();
}

FoldReport crossfold(const std::vector<GameCorpus>& games, std::size_t hold_out_index,
                     const AutoencoderConfig& ae_cfg, const TrainConfig& train_cfg) {
    if (games.size() < 2) throw MetricError("crossfold: need at least 2 games");
    if (hold_out_index >= games.size()) throw MetricError("crossfold: fold index out of range");
    std::vector<GameCorpus> train_games;
    for (std::size_t i = 0; i < games.size(); ++i)
        if (i != hold_out_index) train_games.push_back(games[i]);
    Dataset ds = build_dataset(train_games);
    Xae model = Xae::build(ae_cfg);
    model.train(ds.samples, ds.label_weights, train_cfg);

    const GameCorpus& held = games[hold_out_index];
    std::vector<ContextSample> test_samples;
    for (const auto& lvl : held.levels) {
        auto cs = extract_contexts(lvl);
        test_samples.insert(test_samples.end(), std::make_move_iterator(cs.begin()),
                            std::make_move_iterator(cs.end()));
    }
    test_samples = dedup_contexts(test_samples);

    PredictionSet preds;
    for (const auto& s : test_samples) {
        auto [pred, probs] = model.predict_affordances(s.pixels);
        preds.push_back({s.center_affordance, pred});
    }
    std::vector<AffordanceVector> train_labels, test_truths;
    for (const auto& s : ds.samples) train_labels.push_back(s.center_affordance);
    for (const auto& s : test_samples) test_truths.push_back(s.center_affordance);

    FoldReport rep;
    rep.held_out_game = held.levels.empty() ? "" : held.levels.front().game_id;
    rep.model = full_report(preds);
    rep.mfl = mfl_baseline(train_labels, test_truths);
    return rep;
}

}  // namespace te
