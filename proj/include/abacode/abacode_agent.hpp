#pragma once

#include "abacode/agent.hpp"
#include "abacode/clustering.hpp"
#include "abacode/cts_bandit.hpp"
#include "abacode/encoders.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace abacode {

enum class PolicyVariant {
    BaselineCB,         // CTS on raw contexts
    UniversalEmbedding, // one encoder over all data (uE)
    MiniBatchEmbedding, // per-cluster encoders, re-clustering at batch ends (mE)
    OnlineEmbedding,    // per-cluster encoders, online centroid updates (oE)
};

std::string_view to_string(PolicyVariant v);
PolicyVariant parse_policy_variant(std::string_view name);

struct AbacodeConfig {
    PolicyVariant variant = PolicyVariant::BaselineCB;
    std::size_t arms = 2;
    std::size_t k = 4;
    std::size_t batch_size = 1000;
    /// Shared output width of every embedding; 0 means ceil(D / 4).
    std::size_t embedding_dim = 0;
    /// R, epsilon, gamma and scale_override are taken from here; d, K and
    /// seed are filled in by the agent.
    CtsConfig bandit;
    TrainConfig pretrain_training;
    std::size_t finetune_epochs = 5;
    /// uE only: retrain from scratch on the full history at each batch end
    /// instead of fine-tuning on the batch.
    bool universal_full_retrain = false;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Sub-seed tags; derive_seed(cfg.seed, tag) feeds each random component.
inline constexpr std::uint64_t kSeedClusters = 1;
inline constexpr std::uint64_t kSeedBandit = 2;
inline constexpr std::uint64_t kSeedEncoderBase = 100;

class AbacodeAgent final : public Agent {
public:
    explicit AbacodeAgent(const AbacodeConfig& cfg);

    void pretrain(const Dataset& unlabeled) override;
    std::size_t step(const Vector& x) override;
    void observe(double reward) override;
    /// Fires automatically when the batch buffer fills; callable directly to
    /// close a partial batch.
    void end_of_batch();

    std::size_t input_dim() const override { return input_dim_; }
    std::size_t representation_dim() const;

    const AbacodeConfig& config() const { return cfg_; }
    const std::optional<ClusterModel>& clusters() const { return clusters_; }
    const std::vector<Encoder>& encoders() const { return encoders_; }
    const CtsBandit& bandit() const;
    const std::vector<Vector>& history() const { return history_; }
    std::size_t buffered() const { return batch_buffer_.size(); }
    std::size_t batches_completed() const { return batches_completed_; }
    bool has_pending() const { return pending_.has_value(); }
    /// Cluster used by the most recent step (none for BaselineCB and uE).
    std::optional<std::size_t> last_cluster() const { return last_cluster_; }
    /// Indices into history() that each encoder was last trained on.
    const std::vector<std::vector<std::size_t>>& training_members() const { return training_members_; }

    void save(std::ostream& out) const override;
    static AbacodeAgent load(std::istream& in);

private:
    struct Pending {
        std::optional<std::size_t> cluster;
        Vector representation;
        std::size_t arm;
    };

    bool clustered() const;
    Vector represent(const Vector& x, std::optional<std::size_t>& cluster);
    TrainConfig encoder_training(std::size_t slot, std::size_t epochs) const;
    void finetune_on_buffer(const std::vector<std::size_t>& assignment);
    void rematch_encoders(const ClusterModel& previous, const ClusterModel& next);
    Dataset gather(const std::vector<std::size_t>& history_indices) const;

    AbacodeConfig cfg_;
    std::size_t input_dim_ = 0;
    std::optional<ClusterModel> clusters_;
    std::vector<Encoder> encoders_;
    std::optional<CtsBandit> bandit_;
    std::vector<Vector> history_;
    std::vector<std::size_t> batch_buffer_; // indices into history_
    std::optional<Pending> pending_;
    std::optional<std::size_t> last_cluster_;
    std::vector<std::vector<std::size_t>> training_members_;
    std::size_t batches_completed_ = 0;
};

} // namespace abacode
