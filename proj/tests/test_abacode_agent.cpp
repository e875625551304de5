#include "abacode/abacode_agent.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace abacode;
using abacode::testing::check_error;
using abacode::testing::random_data;
using abacode::testing::vec;

namespace {

AbacodeConfig small_config(PolicyVariant variant, std::size_t k = 2, std::size_t batch = 50) {
    AbacodeConfig c;
    c.variant = variant;
    c.arms = 3;
    c.k = k;
    c.batch_size = batch;
    c.embedding_dim = 2;
    c.pretrain_training.epochs = 3;
    c.finetune_epochs = 2;
    c.seed = 17;
    return c;
}

// Two blobs in [0,1]^6: rows alternate between a low and a high corner.
Dataset two_blobs(std::size_t rows, std::uint64_t seed, double shift = 0.0) {
    Dataset d = random_data(rows, 6, seed, 0.0, 0.1);
    for (Eigen::Index i = 1; i < d.rows(); i += 2)
        d.row(i).array() += 0.8;
    d.array() += shift;
    return d;
}

Vector row(const Dataset& d, Eigen::Index i) {
    return d.row(i).transpose();
}

std::vector<std::size_t> drive(AbacodeAgent& agent, const Dataset& stream) {
    std::vector<std::size_t> arms;
    for (Eigen::Index i = 0; i < stream.rows(); ++i) {
        const auto arm = agent.step(row(stream, i));
        arms.push_back(arm);
        agent.observe(arm == static_cast<std::size_t>(i % 3) ? 1.0 : 0.0);
    }
    return arms;
}

} // namespace

TEST_CASE("variant names") {
    CHECK(to_string(PolicyVariant::MiniBatchEmbedding) == "mE");
    CHECK(parse_policy_variant("oE") == PolicyVariant::OnlineEmbedding);
    CHECK(parse_policy_variant("CB") == PolicyVariant::BaselineCB);
    check_error(ErrorKind::Config, [] { parse_policy_variant("xx"); });
}

TEST_CASE("pretrain") {
    const Dataset pre = two_blobs(100, 1);

    SUBCASE("baseline only creates a raw-dimension bandit") {
        AbacodeAgent agent(small_config(PolicyVariant::BaselineCB));
        agent.pretrain(pre);
        CHECK(agent.encoders().empty());
        CHECK_FALSE(agent.clusters().has_value());
        CHECK(agent.bandit().dimension() == 6);
        CHECK(agent.bandit().posterior_mean(0).isZero());
    }
    SUBCASE("each encoder trains only on its own blob") {
        AbacodeAgent agent(small_config(PolicyVariant::MiniBatchEmbedding));
        agent.pretrain(pre);
        REQUIRE(agent.encoders().size() == 2);
        CHECK(agent.bandit().dimension() == 2);
        for (const auto& members : agent.training_members()) {
            REQUIRE_FALSE(members.empty());
            const auto parity = members.front() % 2;
            for (const auto idx : members)
                CHECK(idx % 2 == parity);
        }
    }
    SUBCASE("uE ignores k") {
        AbacodeAgent agent(small_config(PolicyVariant::UniversalEmbedding, 4));
        agent.pretrain(pre);
        CHECK(agent.encoders().size() == 1);
        CHECK_FALSE(agent.clusters().has_value());
    }
    SUBCASE("default embedding width is ceil(D / 4)") {
        auto cfg = small_config(PolicyVariant::UniversalEmbedding);
        cfg.embedding_dim = 0;
        AbacodeAgent agent(cfg);
        agent.pretrain(pre);
        CHECK(agent.representation_dim() == 2);
    }
    SUBCASE("too few points for k") {
        AbacodeAgent agent(small_config(PolicyVariant::OnlineEmbedding, 5));
        check_error(ErrorKind::Input, [&] { agent.pretrain(random_data(3, 6, 1)); });
    }
}

TEST_CASE("baseline step is a bare bandit on the raw context") {
    const auto cfg = small_config(PolicyVariant::BaselineCB);
    AbacodeAgent agent(cfg);
    agent.pretrain(two_blobs(20, 1));
    CtsConfig bare_cfg = cfg.bandit;
    bare_cfg.d = 6;
    bare_cfg.K = cfg.arms;
    bare_cfg.seed = derive_seed(cfg.seed, kSeedBandit);
    CtsBandit bare(bare_cfg);
    const Dataset stream = two_blobs(120, 2);
    for (Eigen::Index i = 0; i < stream.rows(); ++i) {
        const auto arm = agent.step(row(stream, i));
        REQUIRE(arm == bare.sample_arm(row(stream, i)));
        const double r = i % 2 == 0 ? 1.0 : 0.0;
        agent.observe(r);
        bare.update(arm, row(stream, i), r);
    }
}

TEST_CASE("centroid movement per variant") {
    const Dataset pre = two_blobs(100, 1);
    const Vector x = row(two_blobs(2, 9), 1);

    AbacodeAgent online(small_config(PolicyVariant::OnlineEmbedding));
    online.pretrain(pre);
    const Matrix before = online.clusters()->centroids;
    online.step(x);
    const Matrix after = online.clusters()->centroids;
    int moved = 0;
    for (Eigen::Index j = 0; j < before.rows(); ++j)
        moved += before.row(j) != after.row(j) ? 1 : 0;
    CHECK(moved == 1);
    CHECK(static_cast<Eigen::Index>(*online.last_cluster()) == [&] {
        for (Eigen::Index j = 0; j < before.rows(); ++j)
            if (before.row(j) != after.row(j))
                return j;
        return Eigen::Index{-1};
    }());

    AbacodeAgent batch(small_config(PolicyVariant::MiniBatchEmbedding));
    batch.pretrain(pre);
    const Matrix frozen = batch.clusters()->centroids;
    for (int t = 0; t < 49; ++t) {
        batch.step(x);
        batch.observe(1.0);
        CHECK(batch.clusters()->centroids == frozen);
    }
}

TEST_CASE("protocol") {
    AbacodeAgent agent(small_config(PolicyVariant::UniversalEmbedding));
    check_error(ErrorKind::Protocol, [&] { agent.step(Vector::Zero(6)); });
    agent.pretrain(two_blobs(40, 1));
    check_error(ErrorKind::Protocol, [&] { agent.observe(1.0); });
    agent.step(Vector::Zero(6));
    check_error(ErrorKind::Protocol, [&] { agent.step(Vector::Zero(6)); });
    CHECK(agent.has_pending());
    agent.observe(0.0);
    check_error(ErrorKind::Protocol, [&] { agent.observe(0.0); });
    check_error(ErrorKind::Input, [&] { agent.step(Vector::Zero(5)); });
    CHECK_FALSE(agent.has_pending());
    CHECK(agent.buffered() == 1);
}

TEST_CASE("observe") {
    SUBCASE("rewards move the chosen arm's score") {
        auto cfg = small_config(PolicyVariant::BaselineCB);
        AbacodeAgent agent(cfg);
        agent.pretrain(two_blobs(20, 1));
        const Vector x = vec({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
        const auto a0 = agent.step(x);
        agent.observe(0.0);
        const double after_zero = x.dot(agent.bandit().posterior_mean(a0));
        const auto a1 = agent.step(x);
        const double before_one = x.dot(agent.bandit().posterior_mean(a1));
        agent.observe(1.0);
        CHECK(after_zero == 0.0);
        CHECK(x.dot(agent.bandit().posterior_mean(a1)) > before_one);
    }
    SUBCASE("batch_size observes fire exactly one boundary") {
        AbacodeAgent agent(small_config(PolicyVariant::OnlineEmbedding, 2, 25));
        agent.pretrain(two_blobs(40, 1));
        drive(agent, two_blobs(24, 2));
        CHECK(agent.batches_completed() == 0);
        CHECK(agent.buffered() == 24);
        drive(agent, two_blobs(1, 3));
        CHECK(agent.batches_completed() == 1);
        CHECK(agent.buffered() == 0);
        drive(agent, two_blobs(26, 4));
        CHECK(agent.batches_completed() == 2);
        CHECK(agent.buffered() == 1);
    }
}

TEST_CASE("end_of_batch") {
    SUBCASE("baseline only clears the buffer") {
        AbacodeAgent agent(small_config(PolicyVariant::BaselineCB));
        agent.pretrain(two_blobs(20, 1));
        drive(agent, two_blobs(10, 2));
        const auto mean = agent.bandit().posterior_mean(1);
        agent.end_of_batch();
        CHECK(agent.buffered() == 0);
        CHECK(agent.bandit().posterior_mean(1) == mean);
    }
    SUBCASE("mE centroids follow a distribution shift") {
        AbacodeAgent agent(small_config(PolicyVariant::MiniBatchEmbedding, 2, 200));
        agent.pretrain(two_blobs(100, 1));
        const Matrix before = agent.clusters()->centroids;
        drive(agent, two_blobs(200, 2, 0.05).cwiseMin(1.0));
        REQUIRE(agent.batches_completed() == 1);
        CHECK(agent.clusters()->centroids != before);
    }
    SUBCASE("only encoders with batch members change") {
        AbacodeAgent agent(small_config(PolicyVariant::OnlineEmbedding, 2, 10));
        agent.pretrain(two_blobs(100, 1));
        // Ten points from the low blob only.
        Dataset low = random_data(10, 6, 5, 0.0, 0.1);
        const auto target = assign_cluster(*agent.clusters(), row(low, 0));
        const auto other = 1 - target;
        const Matrix untouched = agent.encoders()[other].autoencoder().W1;
        const Matrix touched = agent.encoders()[target].autoencoder().W1;
        drive(agent, low);
        REQUIRE(agent.batches_completed() == 1);
        CHECK(agent.encoders()[other].autoencoder().W1 == untouched);
        CHECK(agent.encoders()[target].autoencoder().W1 != touched);
    }
    SUBCASE("bandit is kept across the boundary") {
        AbacodeAgent agent(small_config(PolicyVariant::UniversalEmbedding, 1, 10));
        agent.pretrain(two_blobs(40, 1));
        drive(agent, two_blobs(10, 2));
        CHECK(agent.batches_completed() == 1);
        bool any = false;
        for (std::size_t a = 0; a < 3; ++a)
            any = any || !agent.bandit().posterior_mean(a).isZero();
        CHECK(any);
    }
}

TEST_CASE("reproducible choices") {
    for (const auto v : {PolicyVariant::MiniBatchEmbedding, PolicyVariant::OnlineEmbedding}) {
        AbacodeAgent a(small_config(v)), b(small_config(v));
        a.pretrain(two_blobs(60, 1));
        b.pretrain(two_blobs(60, 1));
        const Dataset stream = two_blobs(120, 3);
        for (Eigen::Index i = 0; i < stream.rows(); ++i) {
            REQUIRE(a.step(row(stream, i)) == b.step(row(stream, i)));
            REQUIRE(a.last_cluster() == b.last_cluster());
            a.observe(i % 2);
            b.observe(i % 2);
        }
    }
}

TEST_CASE("k = 1 clustered variants reduce to uE") {
    const Dataset pre = two_blobs(60, 1);
    const Dataset stream = two_blobs(130, 2);
    AbacodeAgent universal(small_config(PolicyVariant::UniversalEmbedding, 1));
    universal.pretrain(pre);
    const auto reference = drive(universal, stream);
    for (const auto v : {PolicyVariant::MiniBatchEmbedding, PolicyVariant::OnlineEmbedding}) {
        AbacodeAgent agent(small_config(v, 1));
        agent.pretrain(pre);
        CHECK(drive(agent, stream) == reference);
    }
}

TEST_CASE("agent snapshot round trip") {
    AbacodeAgent agent(small_config(PolicyVariant::MiniBatchEmbedding));
    agent.pretrain(two_blobs(60, 1));
    drive(agent, two_blobs(70, 2));
    std::stringstream first;
    agent.save(first);
    auto loaded = AbacodeAgent::load(first);
    std::stringstream second;
    loaded.save(second);
    CHECK(first.str() == second.str());

    const Dataset rest = two_blobs(60, 3);
    CHECK(drive(agent, rest) == drive(loaded, rest));
}
