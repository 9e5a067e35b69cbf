#include "skge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "skge/stats_math.hpp"

namespace skge {

namespace {

uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound) {
    uint64_t rem = UINT64_MAX % bound + 1;
    if (rem == bound) rem = 0;
    const uint64_t threshold = ~uint64_t(0) - rem + 1;
    uint64_t x = rng();
    if (rem != 0) {
        while (x >= threshold) x = rng();
    }
    return x % bound;
}

// Candidate sweep shared by both directions: count strictly-better and tied
// scores among non-filtered candidates. `known` is sorted and may contain gt.
double filtered_rank(std::span<const float> scores, std::span<const EntityId> known,
                     EntityId gt) {
    const float s_gt = scores[static_cast<size_t>(gt)];
    int64_t less = 0;
    int64_t ties = 0;
    size_t ki = 0;
    for (int64_t e = 0; e < static_cast<int64_t>(scores.size()); ++e) {
        while (ki < known.size() && known[ki] < e) ++ki;
        if (e == gt) continue;
        if (ki < known.size() && known[ki] == e) continue;
        const float s = scores[static_cast<size_t>(e)];
        if (s < s_gt) ++less;
        else if (s == s_gt) ++ties;
    }
    return 1.0 + static_cast<double>(less) + static_cast<double>(ties) / 2.0;
}

}  // namespace

const char* direction_name(Direction d) {
    return d == Direction::Head ? "head" : "tail";
}

RankResult rank_query(const Model<float>& model, const Matrix<float>& table,
                      const Triple& triple, int64_t triple_index, Direction direction,
                      const FilterIndex& filter, ModelWorkspace<float>& ws) {
    std::vector<float> scores(static_cast<size_t>(model.num_entities()));
    RankResult res;
    res.triple_index = triple_index;
    res.direction = direction;
    if (direction == Direction::Tail) {
        score_all_tails(model, table, triple.h, triple.r, std::span<float>(scores), ws);
        res.rank = filtered_rank(scores, filter.known_tails(triple.h, triple.r), triple.t);
    } else {
        score_all_heads(model, table, triple.r, triple.t, std::span<float>(scores), ws);
        res.rank = filtered_rank(scores, filter.known_heads(triple.r, triple.t), triple.h);
    }
    res.reciprocal_rank = 1.0 / res.rank;
    return res;
}

Metrics compute_metrics(std::span<const RankResult> ranks) {
    Metrics m;
    m.n_queries = static_cast<int64_t>(ranks.size());
    if (ranks.empty()) return m;
    double rr = 0.0;
    int64_t h1 = 0, h3 = 0, h10 = 0;
    for (const RankResult& r : ranks) {
        rr += r.reciprocal_rank;
        if (r.rank <= 1.0) ++h1;
        if (r.rank <= 3.0) ++h3;
        if (r.rank <= 10.0) ++h10;
    }
    const double n = static_cast<double>(ranks.size());
    m.mrr = rr / n;
    m.hits1 = static_cast<double>(h1) / n;
    m.hits3 = static_cast<double>(h3) / n;
    m.hits10 = static_cast<double>(h10) / n;
    return m;
}

std::string Metrics::to_json() const {
    nlohmann::json j{{"mrr", mrr},
                     {"hits1", hits1},
                     {"hits3", hits3},
                     {"hits10", hits10},
                     {"n_queries", n_queries}};
    return j.dump();
}

EvalResult evaluate(const Model<float>& model, const EncodedSplit& split,
                    const FilterIndex& filter, int threads) {
    EvalResult result;
    const int64_t n = split.size();
    result.ranks.resize(static_cast<size_t>(2 * n));
    if (n == 0) return result;

    const Matrix<float> table = build_entity_table(model);
    auto run_range = [&](int64_t begin, int64_t end) {
        ModelWorkspace<float> ws;
        for (int64_t i = begin; i < end; ++i) {
            const Triple& t = split.triples[static_cast<size_t>(i)];
            result.ranks[static_cast<size_t>(2 * i)] =
                rank_query(model, table, t, i, Direction::Head, filter, ws);
            result.ranks[static_cast<size_t>(2 * i + 1)] =
                rank_query(model, table, t, i, Direction::Tail, filter, ws);
        }
    };

    if (threads <= 1) {
        run_range(0, n);
    } else {
        const int64_t workers = std::min<int64_t>(threads, n);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        const int64_t chunk = (n + workers - 1) / workers;
        for (int64_t w = 0; w < workers; ++w) {
            const int64_t begin = w * chunk;
            const int64_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<RankResult> heads, tails;
    heads.reserve(static_cast<size_t>(n));
    tails.reserve(static_cast<size_t>(n));
    for (const RankResult& r : result.ranks) {
        (r.direction == Direction::Head ? heads : tails).push_back(r);
    }
    result.overall = compute_metrics(result.ranks);
    result.head_direction = compute_metrics(heads);
    result.tail_direction = compute_metrics(tails);
    return result;
}

std::map<RelationCategory, CategoryMetrics> metrics_by_category(
    const EvalResult& eval, const EncodedSplit& split,
    const std::map<RelationId, RelationCategory>& categories) {
    std::map<RelationCategory, std::vector<RankResult>> buckets;
    for (const RankResult& r : eval.ranks) {
        const RelationId rel = split.triples.at(static_cast<size_t>(r.triple_index)).r;
        auto it = categories.find(rel);
        if (it == categories.end())
            throw std::out_of_range("missing category mapping for relation id " +
                                    std::to_string(rel));
        buckets[it->second].push_back(r);
    }
    std::map<RelationCategory, CategoryMetrics> out;
    for (RelationCategory c : {RelationCategory::OneToOne, RelationCategory::OneToN,
                               RelationCategory::NToOne, RelationCategory::NToN}) {
        CategoryMetrics cm;
        auto it = buckets.find(c);
        if (it != buckets.end() && !it->second.empty()) {
            cm.metrics = compute_metrics(it->second);
            cm.n_queries = static_cast<int64_t>(it->second.size());
        }
        out.emplace(c, cm);
    }
    return out;
}

std::map<RelationCategory, CategoryMetrics> evaluate_by_category(
    const Model<float>& model, const EncodedSplit& split, const FilterIndex& filter,
    const std::map<RelationId, RelationCategory>& categories, int threads) {
    const EvalResult eval = evaluate(model, split, filter, threads);
    return metrics_by_category(eval, split, categories);
}

TTestResult paired_ttest(std::span<const double> rr_a, std::span<const double> rr_b) {
    if (rr_a.size() != rr_b.size())
        throw std::invalid_argument("paired_ttest: length mismatch");
    const size_t n = rr_a.size();
    if (n < 2) throw std::invalid_argument("paired_ttest: need at least 2 paired queries");

    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = rr_a[i] - rr_b[i];

    TTestResult res;
    const bool all_equal = std::all_of(d.begin(), d.end(), [&](double x) { return x == d[0]; });
    if (all_equal) {
        res.degenerate = true;
        if (d[0] == 0.0) {
            res.t = 0.0;
            res.p = 1.0;
        } else {
            res.t = d[0] > 0.0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
            res.p = 0.0;
        }
        return res;
    }

    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    res.p = student_t_two_sided_p(res.t, static_cast<double>(n - 1));
    return res;
}

std::string NegDistReport::moments_json() const {
    nlohmann::json j{{"kind", kind_name(kind)},
                     {"n", n},
                     {"mean", mean},
                     {"variance", variance}};
    return j.dump();
}

std::string NegDistReport::histogram_csv() const {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count\n";
    os << std::setprecision(17);
    for (size_t i = 0; i < counts.size(); ++i) {
        os << bin_edges[i] << ',' << bin_edges[i + 1] << ',' << counts[i] << '\n';
    }
    return os.str();
}

NegDistReport negative_score_distribution(const Model<float>& model, const EncodedSplit& test,
                                          int64_t q_queries, int64_t k_negatives, uint64_t seed,
                                          int bins) {
    if (test.triples.empty())
        throw std::invalid_argument("negative_score_distribution: empty test split");
    if (k_negatives < 1 || bins < 1)
        throw std::invalid_argument("negative_score_distribution: K and bins must be >= 1");
    const int64_t n_test = test.size();
    const int64_t q = std::min(q_queries, n_test);

    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first q slots end up a without-replacement sample.
    std::vector<int64_t> idx(static_cast<size_t>(n_test));
    for (int64_t i = 0; i < n_test; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < q; ++i) {
        const int64_t j =
            i + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n_test - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }

    const Matrix<float> table = build_entity_table(model);
    ModelWorkspace<float> ws;
    const int64_t n_entities = model.num_entities();
    std::vector<EntityId> h(1), t(1);
    std::vector<RelationId> r(1);
    std::vector<float> score(1);

    std::vector<float> samples;
    samples.reserve(static_cast<size_t>(q * k_negatives));
    for (int64_t i = 0; i < q; ++i) {
        const Triple& triple = test.triples[static_cast<size_t>(idx[static_cast<size_t>(i)])];
        h[0] = triple.h;
        r[0] = triple.r;
        for (int64_t j = 0; j < k_negatives; ++j) {
            t[0] = static_cast<EntityId>(uniform_below(rng, static_cast<uint64_t>(n_entities)));
            score_batch<float>(model, h, r, t, score, ws);
            samples.push_back(score[0]);
        }
    }

    NegDistReport rep;
    rep.kind = model.kind;
    rep.n = static_cast<int64_t>(samples.size());
    double sum = 0.0;
    float max_score = 0.0f;
    for (float s : samples) {
        sum += static_cast<double>(s);
        max_score = std::max(max_score, s);
    }
    rep.mean = sum / static_cast<double>(rep.n);
    double ss = 0.0;
    for (float s : samples) {
        const double dd = static_cast<double>(s) - rep.mean;
        ss += dd * dd;
    }
    rep.variance = ss / static_cast<double>(rep.n);

    rep.bin_edges.resize(static_cast<size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) {
        rep.bin_edges[static_cast<size_t>(i)] =
            static_cast<double>(max_score) * static_cast<double>(i) / static_cast<double>(bins);
    }
    rep.counts.assign(static_cast<size_t>(bins), 0);
    for (float s : samples) {
        int64_t bin = max_score > 0.0f
                          ? static_cast<int64_t>(static_cast<double>(s) /
                                                 static_cast<double>(max_score) *
                                                 static_cast<double>(bins))
                          : 0;
        if (bin >= bins) bin = bins - 1;
        if (bin < 0) bin = 0;
        rep.counts[static_cast<size_t>(bin)] += 1;
    }
    return rep;
}

std::vector<std::pair<std::string, double>> knn(const Model<float>& model, const Vocab& vocab,
                                                const std::string& entity_label, int k) {
    const EntityId anchor = vocab.entity_id(entity_label);
    if (k < 1 || static_cast<int64_t>(k) >= model.num_entities())
        throw std::invalid_argument("knn: k must be in [1, |E|-1]");

    const Matrix<float> table = build_entity_table(model);
    const auto a = table.row(anchor);
    std::vector<std::pair<double, EntityId>> dist;
    dist.reserve(static_cast<size_t>(model.num_entities()) - 1);
    for (int64_t e = 0; e < model.num_entities(); ++e) {
        if (e == anchor) continue;
        const auto b = table.row(e);
        double sq = 0.0;
        for (size_t j = 0; j < a.size(); ++j) {
            const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
            sq += d * d;
        }
        dist.emplace_back(std::sqrt(sq), static_cast<EntityId>(e));
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<std::pair<std::string, double>> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.emplace_back(vocab.entity_label(dist[static_cast<size_t>(i)].second),
                         dist[static_cast<size_t>(i)].first);
    }
    return out;
}

void write_ranks_csv(std::span<const RankResult> ranks, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open ranks CSV for writing: " + path);
    out << "triple_index,direction,rank,reciprocal_rank\n";
    out << std::setprecision(17);
    for (const RankResult& r : ranks) {
        out << r.triple_index << ',' << direction_name(r.direction) << ',' << r.rank << ','
            << r.reciprocal_rank << '\n';
    }
    if (!out) throw std::runtime_error("I/O error while writing: " + path);
}

std::vector<RankResult> read_ranks_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ranks CSV: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("ranks CSV is empty: " + path);
    if (line != "triple_index,direction,rank,reciprocal_rank")
        throw std::runtime_error("ranks CSV has unexpected header: " + path);
    std::vector<RankResult> out;
    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f0, f1, f2, f3;
        if (!std::getline(ls, f0, ',') || !std::getline(ls, f1, ',') ||
            !std::getline(ls, f2, ',') || !std::getline(ls, f3)) {
            throw std::runtime_error("ranks CSV malformed at " + path + ":" +
                                     std::to_string(line_no));
        }
        RankResult r;
        r.triple_index = std::stoll(f0);
        if (f1 == "head") r.direction = Direction::Head;
        else if (f1 == "tail") r.direction = Direction::Tail;
        else
            throw std::runtime_error("ranks CSV has unknown direction \"" + f1 + "\" at " +
                                     path + ":" + std::to_string(line_no));
        r.rank = std::stod(f2);
        r.reciprocal_rank = std::stod(f3);
        out.push_back(r);
    }
    return out;
}

}  // namespace skge
