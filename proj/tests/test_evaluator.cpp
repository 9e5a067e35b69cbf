#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <tuple>
#include <unistd.h>
#include <vector>

#include "skge/evaluator.hpp"

using namespace skge;
namespace fs = std::filesystem;

namespace {

using TripleKey = std::tuple<EntityId, RelationId, EntityId>;

struct ToyKg {
    int64_t entities = 0;
    int64_t relations = 0;
    EncodedSplit train, valid, test;
    FilterIndex filter;
    std::set<TripleKey> known;
};

ToyKg random_kg(std::mt19937_64& rng, int64_t max_entities = 20, int64_t max_triples = 60) {
    ToyKg kg;
    kg.entities = 4 + int64_t(rng() % uint64_t(max_entities - 3));
    kg.relations = 1 + int64_t(rng() % 3);
    const int64_t want = 6 + int64_t(rng() % uint64_t(max_triples - 5));
    std::set<TripleKey> seen;
    std::vector<Triple> triples;
    for (int64_t i = 0; i < want * 4 && int64_t(triples.size()) < want; ++i) {
        Triple t{EntityId(rng() % uint64_t(kg.entities)), RelationId(rng() % uint64_t(kg.relations)),
                 EntityId(rng() % uint64_t(kg.entities))};
        if (seen.insert({t.h, t.r, t.t}).second) triples.push_back(t);
    }
    const size_t n = triples.size();
    const size_t n_test = std::max<size_t>(1, n / 5);
    const size_t n_valid = std::max<size_t>(1, n / 5);
    for (size_t i = 0; i < n; ++i) {
        if (i < n_test) kg.test.triples.push_back(triples[i]);
        else if (i < n_test + n_valid) kg.valid.triples.push_back(triples[i]);
        else kg.train.triples.push_back(triples[i]);
    }
    kg.filter = build_filter_index(kg.train, kg.valid, kg.test);
    kg.known = seen;
    return kg;
}

// Independent re-implementation of the filtered tie-split ranking rule, built
// on single-triple scoring and a flat set of known triples.
double brute_force_rank(const Model<float>& m, const ToyKg& kg, const Triple& gt,
                        Direction dir) {
    ModelWorkspace<float> ws;
    auto single = [&](EntityId h, RelationId r, EntityId t) {
        std::vector<EntityId> hv{h}, tv{t};
        std::vector<RelationId> rv{r};
        std::vector<float> out(1);
        score_batch<float>(m, hv, rv, tv, out, ws);
        return out[0];
    };
    const float s_gt = single(gt.h, gt.r, gt.t);
    int64_t less = 0, ties = 0;
    for (EntityId c = 0; c < kg.entities; ++c) {
        Triple candidate = gt;
        if (dir == Direction::Tail) candidate.t = c;
        else candidate.h = c;
        const EntityId orig = (dir == Direction::Tail) ? gt.t : gt.h;
        if (c == orig) continue;
        if (kg.known.count({candidate.h, candidate.r, candidate.t})) continue;
        const float s = single(candidate.h, candidate.r, candidate.t);
        if (s < s_gt) ++less;
        else if (s == s_gt) ++ties;
    }
    return 1.0 + double(less) + double(ties) / 2.0;
}

std::vector<RankResult> ranks_of(const std::vector<double>& values) {
    std::vector<RankResult> out;
    for (size_t i = 0; i < values.size(); ++i) {
        RankResult r;
        r.triple_index = int64_t(i);
        r.direction = Direction::Tail;
        r.rank = values[i];
        r.reciprocal_rank = 1.0 / values[i];
        out.push_back(r);
    }
    return out;
}

double t_pvalue_by_integration(double t, double df) {
    const double a = std::fabs(t);
    if (a == 0.0) return 1.0;
    const double log_norm = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                            0.5 * std::log(df * std::numbers::pi);
    auto pdf = [&](double x) {
        return std::exp(log_norm - (df + 1) / 2 * std::log1p(x * x / df));
    };
    const int n = 200000;
    const double h = 2 * a / n;
    double sum = pdf(-a) + pdf(a);
    for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * pdf(-a + i * h);
    return std::max(0.0, 1.0 - sum * h / 3.0);
}

fs::path temp_path(const std::string& stem) {
    static int counter = 0;
    return fs::temp_directory_path() /
           (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
}

}  // namespace

TEST_CASE("rank 1 when the ground truth is the unique minimum") {
    // TransE with e_t = e_h + r exactly for the gt; every other entity far away
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, 5, 1, 3, sp, 3);
    for (int64_t e = 0; e < 5; ++e) {
        auto row = m.entity_latent.row(e);
        row[0] = float(10 * (e + 1));
        row[1] = 0;
        row[2] = 0;
    }
    auto r0 = m.relation_vecs.row(0);
    r0[0] = 10;
    r0[1] = 0;
    r0[2] = 0;  // e0 + r == e1 exactly

    EncodedSplit split;
    split.triples.push_back({0, 0, 1});
    FilterIndex filter = build_filter_index(split, {}, {});

    ModelWorkspace<float> ws;
    const Matrix<float> table = build_entity_table(m);
    const RankResult tail = rank_query(m, table, split.triples[0], 0, Direction::Tail, filter, ws);
    CHECK(tail.rank == 1.0);
    CHECK(tail.reciprocal_rank == 1.0);
    const RankResult head = rank_query(m, table, split.triples[0], 0, Direction::Head, filter, ws);
    CHECK(head.rank == 1.0);
}

TEST_CASE("all candidates tied: rank = 1 + (|E|-1-filtered)/2") {
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, 5, 1, 3, sp, 7);
    for (int64_t e = 0; e < 5; ++e) {
        auto row = m.entity_latent.row(e);
        row[0] = 1.0f;
        row[1] = 2.0f;
        row[2] = -0.5f;
    }
    for (auto& x : m.relation_vecs.row(0)) x = 0.0f;

    EncodedSplit split;
    split.triples.push_back({0, 0, 1});
    SUBCASE("no filtered competitors") {
        FilterIndex filter = build_filter_index(split, {}, {});
        ModelWorkspace<float> ws;
        const Matrix<float> table = build_entity_table(m);
        const RankResult rr = rank_query(m, table, split.triples[0], 0, Direction::Tail, filter, ws);
        CHECK(rr.rank == 3.0);  // 1 + 4/2
    }
    SUBCASE("one filtered competitor drops the tie pool") {
        EncodedSplit extra;
        extra.triples.push_back({0, 0, 2});  // known-true, excluded from candidates
        FilterIndex filter = build_filter_index(split, extra, {});
        ModelWorkspace<float> ws;
        const Matrix<float> table = build_entity_table(m);
        const RankResult rr = rank_query(m, table, split.triples[0], 0, Direction::Tail, filter, ws);
        CHECK(rr.rank == 2.5);  // 1 + 3/2
    }
}

TEST_CASE("rank_query equals brute force on random toy KGs, both model families") {
    std::mt19937_64 rng(2024);
    ModelWorkspace<float> ws;
    for (int rep = 0; rep < 20; ++rep) {
        const ToyKg kg = random_kg(rng);
        const ModelKind kind = (rep % 2 == 0) ? ModelKind::TransE : ModelKind::Skge;
        SpherizationParams<float> sp;
        auto m = init_model<float>(kind, kg.entities, kg.relations, 4, sp, rng());
        const Matrix<float> table = build_entity_table(m);
        for (size_t i = 0; i < kg.test.triples.size(); ++i) {
            const Triple& gt = kg.test.triples[i];
            for (Direction dir : {Direction::Head, Direction::Tail}) {
                const RankResult got =
                    rank_query(m, table, gt, int64_t(i), dir, kg.filter, ws);
                const double oracle = brute_force_rank(m, kg, gt, dir);
                CHECK(got.rank == oracle);
                CHECK(got.reciprocal_rank == 1.0 / oracle);
            }
        }
    }
}

TEST_CASE("tie neutrality: a strictly worse candidate never changes the rank") {
    std::mt19937_64 rng(77);
    const ToyKg kg = random_kg(rng, 10, 20);
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, kg.entities + 1, kg.relations, 4, sp, 5);
    // entity |E| is a far-away outlier: huge coordinates -> huge distances
    for (auto& x : m.entity_latent.row(kg.entities)) x = 1e6f;

    // model restricted to the original entities
    SpherizationParams<float> sp2;
    auto small = init_model<float>(ModelKind::TransE, kg.entities, kg.relations, 4, sp2, 5);
    for (int64_t e = 0; e < kg.entities; ++e) {
        for (int j = 0; j < 4; ++j) small.entity_latent.row(e)[j] = m.entity_latent.row(e)[j];
    }
    small.relation_vecs = m.relation_vecs;

    ModelWorkspace<float> ws;
    const Matrix<float> big_table = build_entity_table(m);
    const Matrix<float> small_table = build_entity_table(small);
    for (size_t i = 0; i < kg.test.triples.size(); ++i) {
        const Triple& gt = kg.test.triples[i];
        const RankResult with =
            rank_query(m, big_table, gt, int64_t(i), Direction::Tail, kg.filter, ws);
        const RankResult without =
            rank_query(small, small_table, gt, int64_t(i), Direction::Tail, kg.filter, ws);
        CHECK(with.rank == without.rank);
    }
}

TEST_CASE("metrics hand arithmetic") {
    const Metrics m = compute_metrics(ranks_of({1.0, 2.0, 4.0}));
    CHECK(m.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-12));
    CHECK(m.hits1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.hits3 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.hits10 == 1.0);
    CHECK(m.n_queries == 3);

    const Metrics perfect = compute_metrics(ranks_of({1.0, 1.0}));
    CHECK(perfect.mrr == 1.0);
    CHECK(perfect.hits1 == 1.0);
    CHECK(perfect.hits10 == 1.0);

    const std::string j = m.to_json();
    CHECK(j.find("\"mrr\"") != std::string::npos);
    CHECK(j.find("\"hits1\"") != std::string::npos);
    CHECK(j.find("\"hits3\"") != std::string::npos);
    CHECK(j.find("\"hits10\"") != std::string::npos);
    CHECK(j.find("\"n_queries\"") != std::string::npos);
}

TEST_CASE("evaluate: recomputation oracle, direction split, bounds") {
    std::mt19937_64 rng(99);
    const ToyKg kg = random_kg(rng);
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::Skge, kg.entities, kg.relations, 5, sp, 9);

    const EvalResult res = evaluate(m, kg.test, kg.filter, 1);
    const int64_t n = int64_t(kg.test.triples.size());
    REQUIRE(int64_t(res.ranks.size()) == 2 * n);
    CHECK(res.overall.n_queries == 2 * n);
    CHECK(res.head_direction.n_queries == n);
    CHECK(res.tail_direction.n_queries == n);

    double rr_sum = 0;
    int64_t h1 = 0, h3 = 0, h10 = 0;
    for (const RankResult& r : res.ranks) {
        CHECK(r.rank >= 1.0);
        CHECK(r.rank <= double(kg.entities));
        rr_sum += 1.0 / r.rank;
        if (r.rank <= 1.0) ++h1;
        if (r.rank <= 3.0) ++h3;
        if (r.rank <= 10.0) ++h10;
    }
    CHECK(res.overall.mrr == doctest::Approx(rr_sum / double(2 * n)).epsilon(1e-12));
    CHECK(res.overall.hits1 == doctest::Approx(double(h1) / double(2 * n)).epsilon(1e-12));
    CHECK(res.overall.hits3 == doctest::Approx(double(h3) / double(2 * n)).epsilon(1e-12));
    CHECK(res.overall.hits10 == doctest::Approx(double(h10) / double(2 * n)).epsilon(1e-12));
    CHECK(res.overall.hits1 <= res.overall.hits3);
    CHECK(res.overall.hits3 <= res.overall.hits10);
    CHECK(res.overall.mrr > 0.0);
    CHECK(res.overall.mrr <= 1.0);
    CHECK(res.overall.mrr >= res.overall.hits1);

    // directions interleave head-then-tail per triple
    for (int64_t i = 0; i < n; ++i) {
        CHECK(res.ranks[size_t(2 * i)].direction == Direction::Head);
        CHECK(res.ranks[size_t(2 * i)].triple_index == i);
        CHECK(res.ranks[size_t(2 * i + 1)].direction == Direction::Tail);
    }
}

TEST_CASE("evaluate: multi-threaded run matches single-threaded exactly") {
    std::mt19937_64 rng(1234);
    const ToyKg kg = random_kg(rng);
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::SkgeFixedNorm, kg.entities, kg.relations, 4, sp, 11);
    const EvalResult serial = evaluate(m, kg.test, kg.filter, 1);
    const EvalResult parallel = evaluate(m, kg.test, kg.filter, 4);
    REQUIRE(serial.ranks.size() == parallel.ranks.size());
    for (size_t i = 0; i < serial.ranks.size(); ++i) {
        CHECK(serial.ranks[i].rank == parallel.ranks[i].rank);
        CHECK(serial.ranks[i].triple_index == parallel.ranks[i].triple_index);
        CHECK(serial.ranks[i].direction == parallel.ranks[i].direction);
    }
    CHECK(serial.overall.mrr == parallel.overall.mrr);
}

TEST_CASE("category metrics: buckets, empties, and the subset-rerun oracle") {
    // two relations with forced categories via crafted train split
    // r0: one-to-one; r1: N-to-N
    EncodedSplit train;
    train.triples = {{0, 0, 1}, {2, 0, 3},
                     {0, 1, 2}, {0, 1, 3}, {1, 1, 2}, {1, 1, 3}};
    EncodedSplit test;
    test.triples = {{4, 0, 5}, {4, 1, 5}, {5, 1, 4}};
    const FilterIndex filter = build_filter_index(train, {}, test);
    const auto categories = categorize_relations(train);
    REQUIRE(categories.at(0) == RelationCategory::OneToOne);
    REQUIRE(categories.at(1) == RelationCategory::NToN);

    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::Skge, 6, 2, 4, sp, 13);

    const auto by_cat = evaluate_by_category(m, test, filter, categories, 1);
    REQUIRE(by_cat.size() == 4);  // all four buckets always present
    CHECK(by_cat.at(RelationCategory::OneToOne).n_queries == 2);
    CHECK(by_cat.at(RelationCategory::NToN).n_queries == 4);
    CHECK(by_cat.at(RelationCategory::OneToN).n_queries == 0);
    CHECK(!by_cat.at(RelationCategory::OneToN).metrics.has_value());
    CHECK(by_cat.at(RelationCategory::NToOne).n_queries == 0);
    CHECK(!by_cat.at(RelationCategory::NToOne).metrics.has_value());

    // subset-rerun oracle: evaluate each relation's triples alone
    EncodedSplit only_r0, only_r1;
    for (const Triple& t : test.triples) {
        (t.r == 0 ? only_r0 : only_r1).triples.push_back(t);
    }
    const EvalResult res_r0 = evaluate(m, only_r0, filter, 1);
    const EvalResult res_r1 = evaluate(m, only_r1, filter, 1);
    CHECK(by_cat.at(RelationCategory::OneToOne).metrics->mrr ==
          doctest::Approx(res_r0.overall.mrr).epsilon(1e-12));
    CHECK(by_cat.at(RelationCategory::NToN).metrics->mrr ==
          doctest::Approx(res_r1.overall.mrr).epsilon(1e-12));

    // union recomposition: query-weighted mean over buckets equals the global MRR
    const EvalResult global = evaluate(m, test, filter, 1);
    double weighted = 0;
    int64_t total = 0;
    for (const auto& [cat, cm] : by_cat) {
        if (cm.metrics) {
            weighted += cm.metrics->mrr * double(cm.n_queries);
            total += cm.n_queries;
        }
    }
    CHECK(total == global.overall.n_queries);
    CHECK(std::fabs(weighted / double(total) - global.overall.mrr) < 1e-9);
}

TEST_CASE("category metrics require a mapping for every relation in the split") {
    EncodedSplit train;
    train.triples = {{0, 0, 1}};
    EncodedSplit test;
    test.triples = {{0, 1, 1}};  // relation 1 never categorized
    const FilterIndex filter = build_filter_index(train, {}, test);
    const auto categories = categorize_relations(train);
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, 2, 2, 3, sp, 15);
    try {
        evaluate_by_category(m, test, filter, categories, 1);
        FAIL("expected a missing-mapping error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("missing category mapping") != std::string::npos);
    }
}

TEST_CASE("paired t-test degenerate and error cases") {
    SUBCASE("identical inputs: t=0, p=1, degenerate") {
        std::vector<double> a{0.5, 0.25, 1.0, 0.1};
        const TTestResult r = paired_ttest(a, a);
        CHECK(r.degenerate);
        CHECK(r.t == 0.0);
        CHECK(r.p == 1.0);
    }
    SUBCASE("constant nonzero differences: degenerate p=0") {
        std::vector<double> a{2.0, 3.0, 4.0, 5.0};
        std::vector<double> b{1.0, 2.0, 3.0, 4.0};
        const TTestResult r = paired_ttest(a, b);
        CHECK(r.degenerate);
        CHECK(r.p == 0.0);
        CHECK(std::isinf(r.t));
        CHECK(r.t > 0);
    }
    SUBCASE("length mismatch and too-short inputs throw") {
        std::vector<double> a{1.0, 2.0}, b{1.0};
        CHECK_THROWS_AS(paired_ttest(a, b), std::invalid_argument);
        std::vector<double> one{1.0};
        CHECK_THROWS_AS(paired_ttest(one, one), std::invalid_argument);
    }
}

TEST_CASE("paired t-test symmetry") {
    std::vector<double> a{0.9, 0.4, 0.7, 0.2, 0.55, 0.8};
    std::vector<double> b{0.5, 0.45, 0.6, 0.3, 0.5, 0.75};
    const TTestResult ab = paired_ttest(a, b);
    const TTestResult ba = paired_ttest(b, a);
    CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-14));
    CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-14));
    CHECK(!ab.degenerate);
}

TEST_CASE("paired t-test matches the textbook formula and an integration oracle") {
    std::mt19937_64 rng(555);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 20;
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = double(rng() % 10000) / 10000.0;
            b[i] = double(rng() % 10000) / 10000.0;
        }
        const TTestResult r = paired_ttest(a, b);

        double mean = 0;
        for (int i = 0; i < n; ++i) mean += a[i] - b[i];
        mean /= n;
        double var = 0;
        for (int i = 0; i < n; ++i) {
            const double d = a[i] - b[i] - mean;
            var += d * d;
        }
        var /= (n - 1);
        const double expect_t = mean / std::sqrt(var / n);
        CHECK(r.t == doctest::Approx(expect_t).epsilon(1e-12));
        CHECK(std::fabs(r.p - t_pvalue_by_integration(expect_t, n - 1)) < 1e-6);
    }
}

TEST_CASE("negative score distribution: constant model has zero variance") {
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::Skge, 6, 2, 4, sp, 17);
    // identical latents -> identical points -> every corrupted score equal
    for (int64_t e = 1; e < 6; ++e) {
        for (int j = 0; j < 4; ++j) m.entity_latent.row(e)[j] = m.entity_latent.row(0)[j];
    }
    // identical relation usage too, so every query shares one predicted point
    EncodedSplit test;
    test.triples = {{0, 0, 1}, {2, 0, 3}, {4, 0, 5}};
    const NegDistReport rep = negative_score_distribution(m, test, 2, 50, 123, 10);
    CHECK(rep.n == 100);
    CHECK(rep.variance == doctest::Approx(0.0).epsilon(1e-12));
    int64_t total = 0;
    for (int64_t c : rep.counts) total += c;
    CHECK(total == rep.n);
    CHECK(rep.kind == ModelKind::Skge);
}

TEST_CASE("negative score distribution: bounds, clamping, determinism") {
    SpherizationParams<float> sp;
    sp.radius = 1.0f;
    auto m = init_model<float>(ModelKind::Skge, 12, 3, 5, sp, 19);
    EncodedSplit test;
    std::mt19937_64 rng(21);
    std::set<TripleKey> seen;
    while (test.triples.size() < 8) {
        Triple t{EntityId(rng() % 12), RelationId(rng() % 3), EntityId(rng() % 12)};
        if (seen.insert({t.h, t.r, t.t}).second) test.triples.push_back(t);
    }

    // q larger than the split clamps to the split size
    const NegDistReport rep = negative_score_distribution(m, test, 100, 32, 7, 20);
    CHECK(rep.n == 8 * 32);
    REQUIRE(rep.bin_edges.size() == 21);
    CHECK(rep.bin_edges.front() == 0.0);
    CHECK(rep.bin_edges.back() <= 2.0 * double(sp.radius) + 1e-5);
    CHECK(rep.mean <= 2.0 * double(sp.radius));
    CHECK(rep.mean >= 0.0);
    int64_t total = 0;
    for (int64_t c : rep.counts) total += c;
    CHECK(total == rep.n);
    REQUIRE(rep.counts.size() == 20);

    const NegDistReport again = negative_score_distribution(m, test, 100, 32, 7, 20);
    CHECK(again.mean == rep.mean);
    CHECK(again.variance == rep.variance);
    CHECK(again.counts == rep.counts);
    const NegDistReport other_seed = negative_score_distribution(m, test, 4, 32, 8, 20);
    CHECK(other_seed.n == 4 * 32);

    const std::string csv = rep.histogram_csv();
    CHECK(csv.find("bin_lo,bin_hi,count") != std::string::npos);
    const std::string j = rep.moments_json();
    CHECK(j.find("\"mean\"") != std::string::npos);
    CHECK(j.find("\"variance\"") != std::string::npos);
}

TEST_CASE("knn hand example with TransE Euclidean distances") {
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, 3, 1, 2, sp, 23);
    Vocab vocab;
    vocab.add_entity("origin");
    vocab.add_entity("far");
    vocab.add_entity("near");
    vocab.add_relation("r");
    auto set_row = [&](int64_t e, float x, float y) {
        m.entity_latent.row(e)[0] = x;
        m.entity_latent.row(e)[1] = y;
    };
    set_row(0, 0, 0);
    set_row(1, 3, 4);
    set_row(2, 1, 0);
    const auto nn = knn(m, vocab, "origin", 2);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].first == "near");
    CHECK(nn[0].second == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(nn[1].first == "far");
    CHECK(nn[1].second == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("knn uses chord distance for spherical models") {
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::Skge, 4, 1, 3, sp, 29);
    Vocab vocab;
    for (const char* label : {"a", "b", "c", "d"}) vocab.add_entity(label);
    vocab.add_relation("r");
    const auto nn = knn(m, vocab, "a", 3);
    REQUIRE(nn.size() == 3);
    // recompute chord distances directly
    std::vector<float> anchor(4), other(4);
    entity_point<float>(m, 0, anchor);
    for (const auto& [label, dist] : nn) {
        entity_point<float>(m, vocab.entity_id(label), other);
        CHECK(dist == doctest::Approx(double(chord_distance<float>(anchor, other))).epsilon(1e-6));
    }
    CHECK(std::is_sorted(nn.begin(), nn.end(),
                         [](const auto& x, const auto& y) { return x.second < y.second; }));
}

TEST_CASE("knn edge cases: full fan-out, duplicates, ties, errors") {
    SpherizationParams<float> sp;
    auto m = init_model<float>(ModelKind::TransE, 4, 1, 2, sp, 31);
    Vocab vocab;
    for (const char* label : {"w", "x", "y", "z"}) vocab.add_entity(label);
    vocab.add_relation("r");
    // anchor at the origin; y duplicates it; x and z sit at exact mirror
    // coordinates so their distances tie bit-for-bit
    auto set_row = [&](int64_t e, float x, float y) {
        m.entity_latent.row(e)[0] = x;
        m.entity_latent.row(e)[1] = y;
    };
    set_row(0, 0.0f, 0.0f);   // w (anchor)
    set_row(1, 1.0f, 0.0f);   // x
    set_row(2, 0.0f, 0.0f);   // y duplicates the anchor
    set_row(3, -1.0f, 0.0f);  // z mirrors x

    const auto nn = knn(m, vocab, "w", 3);  // k = |E|-1
    REQUIRE(nn.size() == 3);
    CHECK(nn[0].first == "y");  // duplicate at distance 0 first
    CHECK(nn[0].second == 0.0);
    CHECK(nn[1].second == doctest::Approx(1.0));
    CHECK(nn[2].second == doctest::Approx(1.0));
    CHECK(nn[1].first == "x");  // tie broken by entity id (1 before 3)
    CHECK(nn[2].first == "z");

    CHECK_THROWS_AS(knn(m, vocab, "missing", 2), std::out_of_range);
    CHECK_THROWS_AS(knn(m, vocab, "w", 0), std::invalid_argument);
    CHECK_THROWS_AS(knn(m, vocab, "w", 4), std::invalid_argument);
}

TEST_CASE("ranks CSV round trip preserves exact values") {
    std::vector<RankResult> ranks;
    RankResult a;
    a.triple_index = 0;
    a.direction = Direction::Head;
    a.rank = 2.5;
    a.reciprocal_rank = 0.4;
    RankResult b;
    b.triple_index = 0;
    b.direction = Direction::Tail;
    b.rank = 1.0 / 3.0 * 9.0;  // exercises non-trivial doubles
    b.reciprocal_rank = 1.0 / b.rank;
    ranks.push_back(a);
    ranks.push_back(b);

    const auto p = temp_path("ranks");
    write_ranks_csv(ranks, p.string());
    const auto back = read_ranks_csv(p.string());
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].triple_index == ranks[i].triple_index);
        CHECK(back[i].direction == ranks[i].direction);
        CHECK(back[i].rank == ranks[i].rank);
        CHECK(back[i].reciprocal_rank == ranks[i].reciprocal_rank);
    }
    fs::remove(p);
}

TEST_CASE("ranks CSV rejects malformed input") {
    SUBCASE("bad header") {
        const auto p = temp_path("badranks");
        std::ofstream(p) << "nope,nope\n";
        CHECK_THROWS(read_ranks_csv(p.string()));
        fs::remove(p);
    }
    SUBCASE("bad direction") {
        const auto p = temp_path("badranks");
        std::ofstream(p) << "triple_index,direction,rank,reciprocal_rank\n0,sideways,1,1\n";
        try {
            read_ranks_csv(p.string());
            FAIL("expected a parse error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
        }
        fs::remove(p);
    }
    SUBCASE("wrong field count") {
        const auto p = temp_path("badranks");
        std::ofstream(p) << "triple_index,direction,rank,reciprocal_rank\n0,tail,1\n";
        CHECK_THROWS(read_ranks_csv(p.string()));
        fs::remove(p);
    }
}
