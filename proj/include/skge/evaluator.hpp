#ifndef SKGE_EVALUATOR_HPP
#define SKGE_EVALUATOR_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skge/dataset.hpp"
#include "skge/model.hpp"

namespace skge {

enum class Direction { Head, Tail };

const char* direction_name(Direction d);

struct RankResult {
    int64_t triple_index = 0;
    Direction direction = Direction::Tail;
    double rank = 1.0;  // fractional under tie splitting
    double reciprocal_rank = 1.0;
};

struct Metrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    int64_t n_queries = 0;

    std::string to_json() const;
};

// Filtered rank of one query. Candidates forming known-true triples (other
// than the ground truth) are excluded; rank = 1 + #strictly-better +
// #ties/2, ties meaning exact float score equality.
RankResult rank_query(const Model<float>& model, const Matrix<float>& table,
                      const Triple& triple, int64_t triple_index, Direction direction,
                      const FilterIndex& filter, ModelWorkspace<float>& ws);

struct EvalResult {
    Metrics overall;
    Metrics head_direction;
    Metrics tail_direction;
    std::vector<RankResult> ranks;  // 2 per triple: head query then tail query
};

Metrics compute_metrics(std::span<const RankResult> ranks);

// Both query directions for every triple of the split. Queries are
// independent; `threads` > 1 fans them out with deterministic assembly.
EvalResult evaluate(const Model<float>& model, const EncodedSplit& split,
                    const FilterIndex& filter, int threads = 1);

struct CategoryMetrics {
    std::optional<Metrics> metrics;  // empty bucket -> nullopt
    int64_t n_queries = 0;
};

// Partition an evaluation by the relation's cardinality category.
std::map<RelationCategory, CategoryMetrics> metrics_by_category(
    const EvalResult& eval, const EncodedSplit& split,
    const std::map<RelationId, RelationCategory>& categories);

std::map<RelationCategory, CategoryMetrics> evaluate_by_category(
    const Model<float>& model, const EncodedSplit& split, const FilterIndex& filter,
    const std::map<RelationId, RelationCategory>& categories, int threads = 1);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool degenerate = false;  // zero variance of the differences
};

// Paired two-sided t-test on per-query reciprocal ranks (same queries, same
// order in both inputs). Zero-variance differences degenerate to p = 1 when
// the mean difference is 0 and p = 0 otherwise.
TTestResult paired_ttest(std::span<const double> rr_a, std::span<const double> rr_b);

struct NegDistReport {
    int64_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // population variance of the raw scores
    std::vector<double> bin_edges;
    std::vector<int64_t> counts;
    ModelKind kind = ModelKind::TransE;

    std::string moments_json() const;
    std::string histogram_csv() const;
};

// Score distribution of uniformly corrupted tails: Q (h, r) pairs sampled
// from the test split without replacement, K uniform tails each.
NegDistReport negative_score_distribution(const Model<float>& model, const EncodedSplit& test,
                                          int64_t q_queries, int64_t k_negatives, uint64_t seed,
                                          int bins = 100);

// k nearest entities to the anchor label in the model's representation
// space (chord distance on the sphere, Euclidean for TransE). Self excluded,
// ascending distance, ties broken by entity id.
std::vector<std::pair<std::string, double>> knn(const Model<float>& model, const Vocab& vocab,
                                                const std::string& entity_label, int k);

void write_ranks_csv(std::span<const RankResult> ranks, const std::string& path);
std::vector<RankResult> read_ranks_csv(const std::string& path);

}  // namespace skge

#endif  // SKGE_EVALUATOR_HPP
