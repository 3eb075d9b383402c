#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "simcore/scoring.hpp"
#include "simcore/synth.hpp"
#include "test_util.hpp"

using namespace simcore;

namespace {

WorldSpec small_world() {
    WorldSpec spec;
    spec.dim = 8;
    spec.seed = 11;
    spec.min_separation_deg = 30.0;
    spec.target_clusters = {{1, 30, 5.0}, {2, 30, 5.0}};
    spec.relevant_open_clusters = {{0, 40, 5.0}, {1, 40, 5.0}};
    spec.distractor_open_clusters = {{10, 40, 5.0}, {11, 40, 5.0}, {12, 40, 5.0}};
    return spec;
}

}  // namespace

TEST_CASE("generated counts and relevance labels are forced by the spec") {
    WorldSpec spec;
    spec.dim = 6;
    spec.seed = 3;
    spec.min_separation_deg = 25.0;
    spec.target_clusters = {{1, 5, 4.0}};
    spec.relevant_open_clusters = {{0, 10, 4.0}};
    spec.distractor_open_clusters = {{7, 10, 4.0}};

    const auto world = generate_world(spec);
    CHECK(world.target.count() == 5);
    CHECK(world.open.count() == 20);
    CHECK(world.relevance.count() == 20);
    const auto total =
        std::accumulate(world.relevance.labels.begin(), world.relevance.labels.end(),
                        std::int64_t{0});
    CHECK(total == 10);
    CHECK(world.target.normalized());
    CHECK(world.open.normalized());
    CHECK(world.directions.count() == 2);
    CHECK(world.target_direction_count == 1);
}

TEST_CASE("zero spread pins every member to its direction") {
    WorldSpec spec;
    spec.dim = 5;
    spec.seed = 9;
    spec.min_separation_deg = 20.0;
    spec.target_clusters = {{1, 4, 0.0}};
    spec.relevant_open_clusters = {{0, 3, 0.0}};
    spec.distractor_open_clusters = {{2, 3, 0.0}};

    const auto world = generate_world(spec);
    for (std::size_t i = 0; i < world.target.count(); ++i) {
        CHECK(std::memcmp(world.target.row(i).data(), world.directions.row(0).data(),
                          spec.dim * sizeof(float)) == 0);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::memcmp(world.open.row(i).data(), world.directions.row(0).data(),
                          spec.dim * sizeof(float)) == 0);
    }
    for (std::size_t i = 3; i < 6; ++i) {
        CHECK(std::memcmp(world.open.row(i).data(), world.directions.row(1).data(),
                          spec.dim * sizeof(float)) == 0);
    }
}

TEST_CASE("identical seeds give identical worlds") {
    const auto spec = small_world();
    const auto a = generate_world(spec);
    const auto b = generate_world(spec);
    CHECK(a.target.data() == b.target.data());
    CHECK(a.open.data() == b.open.data());
    CHECK(a.relevance.labels == b.relevance.labels);

    auto other = spec;
    other.seed = 12;
    const auto c = generate_world(other);
    CHECK(a.open.data() != c.open.data());
}

TEST_CASE("spec validation rejects broken worlds") {
    auto spec = small_world();
    spec.min_separation_deg = 9.0;  // not > 2 x 5 degrees
    CHECK_THROWS_AS(generate_world(spec), std::invalid_argument);

    spec = small_world();
    spec.target_clusters[0].points = 0;
    CHECK_THROWS_AS(generate_world(spec), std::invalid_argument);

    spec = small_world();
    spec.relevant_open_clusters[0].target_index = 5;
    CHECK_THROWS_AS(generate_world(spec), std::invalid_argument);

    spec = small_world();
    spec.target_clusters.clear();
    CHECK_THROWS_AS(generate_world(spec), std::invalid_argument);

    // Two clusters with the same direction seed collide at zero degrees.
    spec = small_world();
    spec.distractor_open_clusters[1].direction_seed =
        spec.distractor_open_clusters[0].direction_seed;
    CHECK_THROWS_AS(generate_world(spec), std::runtime_error);
}

TEST_CASE("every generated row stays nearest to its own direction") {
    const auto world = generate_world(small_world());
    for (std::size_t r = 0; r < world.open.count(); ++r) {
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t d = 0; d < world.directions.count(); ++d) {
            const double s = similarity(world.open.row(r), world.directions.row(d));
            if (s > best_sim) {
                best_sim = s;
                best = d;
            }
        }
        CHECK(static_cast<std::int64_t>(best) == world.open_cluster_ids[r]);
    }
}

TEST_CASE("precision_recall fixtures") {
    const LabelVector relevance{{1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0}};

    SUBCASE("selecting exactly the relevant set") {
        std::vector<std::size_t> selected;
        for (std::size_t i = 0; i < relevance.count(); ++i) {
            if (relevance.labels[i] == 1) selected.push_back(i);
        }
        const auto m = precision_recall(selected, relevance);
        REQUIRE(m.precision.has_value());
        CHECK(*m.precision == doctest::Approx(1.0));
        CHECK(m.recall == doctest::Approx(1.0));
        CHECK(m.baseline_precision == doctest::Approx(0.5));
    }
    SUBCASE("empty selection") {
        const auto m = precision_recall({}, relevance);
        CHECK_FALSE(m.precision.has_value());
        CHECK(m.recall == 0.0);
        CHECK(m.selected_count == 0);
    }
    SUBCASE("mixed selection arithmetic") {
        const LabelVector half{{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}};
        const std::size_t selected[] = {0, 1, 2, 10};
        const auto m = precision_recall(selected, half);
        REQUIRE(m.precision.has_value());
        CHECK(*m.precision == doctest::Approx(0.75));
        CHECK(m.recall == doctest::Approx(0.3));
        CHECK(m.relevant_pool_size == 10);
    }
    SUBCASE("out-of-range index") {
        const std::size_t bad[] = {99};
        CHECK_THROWS_AS(precision_recall(bad, relevance), std::out_of_range);
    }
}

TEST_CASE("brute-force oracle fixtures") {
    SUBCASE("single centroid picks the global nearest") {
        CentroidSet c;
        c.k = 1;
        c.dim = 2;
        c.centroids = {1.0f, 0.0f};
        EmbeddingMatrix cands(3, 2, {0.5f, 0.86602540f, 0.9f, 0.43588989f, 0.0f, 1.0f}, true);
        const auto res = brute_force_round_oracle(c, cands);
        CHECK(res.members == std::vector<std::size_t>{1});
        CHECK(res.value == doctest::Approx(0.9).epsilon(1e-6));
    }
    SUBCASE("two centroids with distinct nearests take both") {
        CentroidSet c;
        c.k = 2;
        c.dim = 2;
        c.centroids = {1.0f, 0.0f, 0.0f, 1.0f};
        EmbeddingMatrix cands(4, 2,
                              {0.95f, 0.31224990f, 0.31224990f, 0.95f, -1.0f, 0.0f, 0.0f, -1.0f},
                              true);
        const auto res = brute_force_round_oracle(c, cands);
        CHECK(res.members == std::vector<std::size_t>{0, 1});
        CHECK(res.value == doctest::Approx(1.9).epsilon(1e-6));
    }
    SUBCASE("instance caps") {
        CentroidSet c;
        c.k = 6;
        c.dim = 2;
        c.centroids.assign(12, 0.5f);
        EmbeddingMatrix cands(2, 2, {1.0f, 0.0f, 0.0f, 1.0f}, true);
        CHECK_THROWS_AS(brute_force_round_oracle(c, cands), std::invalid_argument);

        CentroidSet ok;
        ok.k = 1;
        ok.dim = 2;
        ok.centroids = {1.0f, 0.0f};
        const auto big = test_util::random_unit_matrix(1, 21, 2);
        CHECK_THROWS_AS(brute_force_round_oracle(ok, big), std::invalid_argument);
    }
}

TEST_CASE("oracle agrees with nearest_per_centroid on random instances") {
    auto gen = rng::engine(4242);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t dim = 2 + rng::below(gen, 3);
        const std::size_t k = 1 + rng::below(gen, 4);
        const std::size_t n = 6 + rng::below(gen, 7);
        const auto cands = test_util::random_unit_matrix(900 + trial, n, dim);
        const auto cmat = test_util::random_unit_matrix(800 + trial, k, dim);
        CentroidSet cents;
        cents.k = k;
        cents.dim = dim;
        cents.centroids = cmat.data();

        CandidateIndex index(cents, cands);
        const auto winners = index.nearest_per_centroid();
        std::vector<std::size_t> members;
        for (const auto& w : winners) members.push_back(w.index);
        const double engine_value = facility_value(cents, members, cands);

        const auto oracle = brute_force_round_oracle(cents, cands);
        CHECK(std::abs(engine_value - oracle.value) <= 1e-9);
        CHECK(members.size() == oracle.members.size());
    }
}

TEST_CASE("selection precision beats the random baseline on separated worlds") {
    const auto world = generate_world(small_world());
    SamplerConfig cfg;
    cfg.k = 10;
    cfg.seed = 2;
    const auto rep = simcore_select(world.target, world.open, cfg);
    const auto m = precision_recall(rep.coreset, world.relevance);
    REQUIRE(m.precision.has_value());
    CHECK(*m.precision > m.baseline_precision);
    CHECK(m.baseline_precision == doctest::Approx(80.0 / 200.0));
}

TEST_CASE("sweep rejects mismatched relevance labels") {
    const auto world = generate_world(small_world());
    SamplerConfig cfg;
    cfg.k = 5;
    const double taus[] = {0.95};
    const LabelVector wrong{{1, 0, 1}};
    CHECK_THROWS_AS(sweep(world.target, world.open, cfg, SweepParam::tau, taus, &wrong),
                    std::invalid_argument);
}

TEST_CASE("sweep runs one selection per value") {
    const auto world = generate_world(small_world());
    SamplerConfig base;
    base.k = 10;
    base.seed = 4;

    SUBCASE("tau sweep ratios never increase with tau") {
        const double taus[] = {0.99, 0.95, 0.90};
        const auto rows = sweep(world.target, world.open, base, SweepParam::tau, taus,
                                &world.relevance);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].sampling_ratio <= rows[1].sampling_ratio);
        CHECK(rows[1].sampling_ratio <= rows[2].sampling_ratio);
        for (const auto& r : rows) {
            CHECK(r.precision.has_value());
            CHECK(r.recall.has_value());
        }
    }
    SUBCASE("single-value sweep equals the direct run") {
        base.tau = 0.95;
        const double taus[] = {0.95};
        const auto rows = sweep(world.target, world.open, base, SweepParam::tau, taus);
        const auto direct = simcore_select(world.target, world.open, base);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].coreset_size == direct.coreset.size());
        CHECK(rows[0].sampling_ratio == direct.sampling_ratio);
        CHECK(rows[0].rounds == direct.rounds.size());
        CHECK(rows[0].stop_reason == direct.stop_reason);
        CHECK_FALSE(rows[0].precision.has_value());
    }
    SUBCASE("k sweep") {
        const double ks[] = {1, 10};
        const auto rows =
            sweep(world.target, world.open, base, SweepParam::k, ks, &world.relevance);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].coreset_size > 0);
        CHECK(rows[1].coreset_size > 0);
    }
    SUBCASE("empty values rejected") {
        CHECK_THROWS_AS(sweep(world.target, world.open, base, SweepParam::tau, {}, nullptr),
                        std::invalid_argument);
    }
}

TEST_CASE("world spec text parsing") {
    const std::string text = R"(# synthetic world
dim 8
seed 11
min_separation_deg 30
target 1 30 5
target 2 30 5
relevant 0 40 5
relevant 1 40 5
distractor 10 40 5   # trailing comment
distractor 11 40 5
distractor 12 40 5
)";
    const auto spec = parse_world_spec_text(text);
    CHECK(spec.dim == 8);
    CHECK(spec.seed == 11);
    CHECK(spec.min_separation_deg == 30.0);
    REQUIRE(spec.target_clusters.size() == 2);
    CHECK(spec.target_clusters[1].direction_seed == 2);
    CHECK(spec.target_clusters[1].points == 30);
    REQUIRE(spec.relevant_open_clusters.size() == 2);
    CHECK(spec.relevant_open_clusters[1].target_index == 1);
    REQUIRE(spec.distractor_open_clusters.size() == 3);

    // The parsed spec generates the same world as the struct literal.
    const auto a = generate_world(spec);
    const auto b = generate_world(small_world());
    CHECK(a.open.data() == b.open.data());

    CHECK_THROWS_WITH_AS(parse_world_spec_text("dim 4\nbogus 1 2 3\ntarget 1 5 2\n"),
                         doctest::Contains("bogus"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_world_spec_text("seed 4\ntarget 1 5 2\n"),
                         doctest::Contains("dim"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_world_spec_text("dim 4\n"), doctest::Contains("target"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_world_spec_text("dim 4\ntarget x 5 2\n"),
                         doctest::Contains("integer"), std::runtime_error);
}
