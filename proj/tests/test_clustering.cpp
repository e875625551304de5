#include "abacode/clustering.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace abacode;
using abacode::testing::check_error;
using abacode::testing::random_data;
using abacode::testing::vec;

namespace {

ClusterModel manual(const Matrix& centroids) {
    ClusterModel m;
    m.centroids = centroids;
    m.counts.assign(static_cast<std::size_t>(centroids.rows()), 1);
    return m;
}

} // namespace

TEST_CASE("kmeans_fit") {
    SUBCASE("k = 1 gives the sample mean") {
        const Dataset data = random_data(57, 4, 3, -2.0, 5.0);
        const auto model = kmeans_fit(data, 1, 9);
        CHECK(oracle::max_abs(model.centroids.row(0).transpose() - data.colwise().mean().transpose()) <= 1e-12);
        CHECK(model.counts[0] == 57);
    }
    SUBCASE("two separated blobs are recovered") {
        Rng rng(1);
        std::normal_distribution<double> noise(0.0, 1.0);
        const Eigen::Index D = 5, N = 400;
        Dataset data(N, D);
        std::vector<int> truth(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            truth[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
            const double center = i % 2 == 0 ? 10.0 : -10.0;
            for (Eigen::Index j = 0; j < D; ++j)
                data(i, j) = center + noise(rng);
        }
        const auto model = kmeans_fit(data, 2, 4);
        const auto first = assign_cluster(model, data.row(0).transpose());
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto c = assign_cluster(model, data.row(i).transpose());
            CHECK((c == first) == (truth[static_cast<std::size_t>(i)] == 0));
        }
    }
    SUBCASE("k distinct points become their own centroids") {
        const Dataset data = (Matrix(3, 2) << 0, 0, 5, 1, -3, 7).finished();
        const auto model = kmeans_fit(data, 3, 2);
        CHECK(kmeans_objective(model, data) == 0.0);
        for (Eigen::Index i = 0; i < 3; ++i) {
            const auto c = assign_cluster(model, data.row(i).transpose());
            CHECK(model.centroids.row(static_cast<Eigen::Index>(c)) == data.row(i));
        }
    }
    SUBCASE("objective is non-increasing outside reseeding iterations") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            KMeansTrace trace;
            kmeans_fit(random_data(300, 3, seed), 6, seed, &trace);
            REQUIRE(trace.objective.size() == trace.reseeded.size());
            CHECK(trace.iterations <= kMaxLloydIterations);
            for (std::size_t t = 1; t < trace.objective.size(); ++t)
                if (!trace.reseeded[t])
                    CHECK(trace.objective[t] <= trace.objective[t - 1] * (1 + 1e-12));
        }
    }
    SUBCASE("deterministic in the seed") {
        const Dataset data = random_data(100, 3, 5);
        CHECK(kmeans_fit(data, 4, 11).centroids == kmeans_fit(data, 4, 11).centroids);
    }
    SUBCASE("duplicate points do not break seeding") {
        const Dataset data = Dataset::Constant(10, 2, 1.5);
        const auto model = kmeans_fit(data, 3, 1);
        CHECK(model.centroids.allFinite());
        CHECK(kmeans_objective(model, data) == 0.0);
    }
    SUBCASE("errors") {
        check_error(ErrorKind::Input, [] { kmeans_fit(random_data(2, 2, 1), 3, 1); });
        check_error(ErrorKind::Input, [] { kmeans_fit(random_data(2, 2, 1), 0, 1); });
    }
}

TEST_CASE("assign_cluster") {
    const auto model = manual((Matrix(3, 2) << 0, 0, 2, 0, 5, 5).finished());
    CHECK(assign_cluster(model, vec({5, 5})) == 2);
    CHECK(assign_cluster(model, vec({1, 0})) == 0); // equidistant from 0 and 1
    check_error(ErrorKind::Input, [&] { assign_cluster(model, vec({1, 2, 3})); });

    const auto random_model = manual(random_data(7, 4, 21));
    const Dataset queries = random_data(1000, 4, 22, -0.5, 1.5);
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Vector x = queries.row(i).transpose();
        CHECK(assign_cluster(random_model, x) == oracle::nearest_scan(random_model.centroids, x));
    }
}

TEST_CASE("update_cluster_online") {
    auto model = manual((Matrix(2, 2) << 0, 0, 7, 7).finished());
    update_cluster_online(model, vec({2, 0}), 0);
    CHECK(model.centroids.row(0).transpose() == vec({1, 0}));
    CHECK(model.counts[0] == 2);
    CHECK(model.centroids.row(1).transpose() == vec({7, 7}));
    check_error(ErrorKind::Input, [&] { update_cluster_online(model, vec({2, 0}), 2); });

    SUBCASE("running mean equals the batch mean") {
        auto m = manual(random_data(3, 5, 1));
        const Matrix other = m.centroids.bottomRows(2);
        Vector sum = m.centroids.row(0).transpose();
        const Dataset points = random_data(500, 5, 2, -3.0, 3.0);
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            update_cluster_online(m, points.row(i).transpose(), 0);
            sum += points.row(i).transpose();
        }
        CHECK(oracle::max_abs(m.centroids.row(0).transpose() - sum / 501.0) <= 1e-10);
        CHECK(m.counts[0] == 501);
        CHECK(m.centroids.bottomRows(2) == other);
    }
}

TEST_CASE("recompute_clusters") {
    const Dataset pre = random_data(200, 3, 7);
    const auto initial = kmeans_fit(pre, 4, 13);
    CHECK(recompute_clusters(pre, 4, 13).centroids == initial.centroids);

    Dataset history(400, 3);
    history.topRows(200) = pre;
    history.bottomRows(200) = random_data(200, 3, 8, 2.0, 3.0);
    const auto fresh = recompute_clusters(history, 4, 13);
    CHECK(kmeans_objective(fresh, history) <= kmeans_objective(initial, history));

    check_error(ErrorKind::Input, [] { recompute_clusters(random_data(3, 3, 1), 4, 1); });
}

TEST_CASE("cluster snapshot round trip") {
    const auto model = kmeans_fit(random_data(50, 3, 2), 3, 5);
    std::stringstream s;
    model.save(s);
    const auto loaded = ClusterModel::load(s);
    CHECK(loaded.centroids == model.centroids);
    CHECK(loaded.counts == model.counts);
}
