#pragma once

#include "te/corpus.hpp"
#include "te/xae.hpp"

namespace te {

struct PredictionRow {
    AffordanceVector truth;
    AffordanceVector pred;
};
using PredictionSet = std::vector<PredictionRow>;

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Pra {
    double precision = 0, recall = 0, accuracy = 0;
};

struct AlphaParams {
    double alpha = 1, beta = 1, gamma = 1;
};

struct MetricsReport {
    double emr = 0;
    Pra example_based;
    Pra label_based;
    std::vector<std::pair<AlphaParams, double>> alpha_scores;
    int rows = 0;
    double threshold = 0.5;

    std::string to_json() const;
};

double exact_match_ratio(const PredictionSet& preds);
Pra example_based(const PredictionSet& preds);
Pra label_based(const PredictionSet& preds);
double alpha_score(const PredictionSet& preds, const AlphaParams& params);

std::vector<AlphaParams> default_alpha_grid();
MetricsReport full_report(const PredictionSet& preds,
                          const std::vector<AlphaParams>& grid = default_alpha_grid(),
                          double threshold = 0.5);

// Modal training combination; ties go to the lowest lexicographic bit pattern.
AffordanceVector mfl_combination(const std::vector<AffordanceVector>& training_labels);
MetricsReport mfl_baseline(const std::vector<AffordanceVector>& training_labels,
                           const std::vector<AffordanceVector>& test_truths);

// Expressive-range metrics over affordance-annotated (or snapped) levels.
// `literal_normalization` applies the extra division by the number of
// platform centers on top of the mean residual distance.
double linearity(const LevelGrid& level, bool literal_normalization = true);
double leniency(const LevelGrid& level);

struct ExpressiveRangePoint {
    std::string level_id;
    double linearity = 0, leniency = 0;
};
std::vector<ExpressiveRangePoint> expressive_range(const std::vector<LevelGrid>& levels);
std::string expressive_range_csv(const std::vector<ExpressiveRangePoint>& points);

// Cross-fold orchestration: train on all games but one, predict the held-out
// game's affordances from pixels alone, score against ground truth and MFL.
struct FoldReport {
    std::string held_out_game;
    MetricsReport model;
    MetricsReport mfl;
};
FoldReport crossfold(const std::vector<GameCorpus>& games, std::size_t hold_out_index,
                     const AutoencoderConfig& ae_cfg, const TrainConfig& train_cfg);

}  // namespace te
