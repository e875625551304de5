#include "abacode/abacode_agent.hpp"

#include "abacode/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace abacode {

std::string_view to_string(PolicyVariant v) {
    switch (v) {
    case PolicyVariant::BaselineCB: return "CB";
    case PolicyVariant::UniversalEmbedding: return "uE";
    case PolicyVariant::MiniBatchEmbedding: return "mE";
    case PolicyVariant::OnlineEmbedding: return "oE";
    }
    return "?";
}

PolicyVariant parse_policy_variant(std::string_view name) {
    if (name == "CB" || name == "BaselineCB")
        return PolicyVariant::BaselineCB;
    if (name == "uE" || name == "UniversalEmbedding")
        return PolicyVariant::UniversalEmbedding;
    if (name == "mE" || name == "MiniBatchEmbedding")
        return PolicyVariant::MiniBatchEmbedding;
    if (name == "oE" || name == "OnlineEmbedding")
        return PolicyVariant::OnlineEmbedding;
    fail(ErrorKind::Config, "unknown policy variant '" + std::string(name) + "'");
}

void AbacodeConfig::validate() const {
    require(arms >= 1, ErrorKind::Config, "agent: arms must be at least 1");
    require(k >= 1, ErrorKind::Config, "agent: k must be at least 1");
    require(batch_size >= 1, ErrorKind::Config, "agent: batch_size must be at least 1");
    require(finetune_epochs >= 1, ErrorKind::Config, "agent: finetune_epochs must be at least 1");
    pretrain_training.validate();
    CtsConfig probe = bandit;
    probe.d = 1;
    probe.K = arms;
    probe.validate();
}

AbacodeAgent::AbacodeAgent(const AbacodeConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
}

bool AbacodeAgent::clustered() const {
    return cfg_.variant == PolicyVariant::MiniBatchEmbedding || cfg_.variant == PolicyVariant::OnlineEmbedding;
}

std::size_t AbacodeAgent::representation_dim() const {
    if (cfg_.variant == PolicyVariant::BaselineCB)
        return input_dim_;
    return cfg_.embedding_dim ? cfg_.embedding_dim : (input_dim_ + 3) / 4;
}

const CtsBandit& AbacodeAgent::bandit() const {
    require(bandit_.has_value(), ErrorKind::Protocol, "agent: not pretrained");
    return *bandit_;
}

TrainConfig AbacodeAgent::encoder_training(std::size_t slot, std::size_t epochs) const {
    TrainConfig t = cfg_.pretrain_training;
    t.epochs = epochs;
    t.seed = derive_seed(cfg_.seed, kSeedEncoderBase + slot);
    return t;
}

Dataset AbacodeAgent::gather(const std::vector<std::size_t>& indices) const {
    Dataset out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(input_dim_));
    for (std::size_t i = 0; i < indices.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = history_[indices[i]].transpose();
    return out;
}

void AbacodeAgent::pretrain(const Dataset& unlabeled) {
    require(unlabeled.rows() >= 1 && unlabeled.cols() >= 1, ErrorKind::Input, "pretrain: data must be non-empty");
    if (clustered())
        require(static_cast<std::size_t>(unlabeled.rows()) >= cfg_.k, ErrorKind::Input,
                "pretrain: " + std::to_string(unlabeled.rows()) + " contexts cannot form " + std::to_string(cfg_.k) +
                    " clusters");

    input_dim_ = static_cast<std::size_t>(unlabeled.cols());
    history_.clear();
    history_.reserve(static_cast<std::size_t>(unlabeled.rows()));
    for (Eigen::Index i = 0; i < unlabeled.rows(); ++i)
        history_.emplace_back(unlabeled.row(i).transpose());
    batch_buffer_.clear();
    pending_.reset();
    last_cluster_.reset();
    clusters_.reset();
    encoders_.clear();
    training_members_.clear();
    batches_completed_ = 0;

    const auto m = representation_dim();
    std::vector<std::size_t> all(history_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});

    if (cfg_.variant == PolicyVariant::UniversalEmbedding) {
        encoders_.emplace_back(train_autoencoder(unlabeled, m, encoder_training(0, cfg_.pretrain_training.epochs)));
        training_members_.push_back(all);
    } else if (clustered()) {
        clusters_ = kmeans_fit(unlabeled, cfg_.k, derive_seed(cfg_.seed, kSeedClusters));
        training_members_.assign(cfg_.k, {});
        for (std::size_t i = 0; i < history_.size(); ++i)
            training_members_[assign_cluster(*clusters_, history_[i])].push_back(i);
        for (std::size_t j = 0; j < cfg_.k; ++j) {
            // A cluster left without members after the final assignment still
            // needs an encoder; it falls back to the whole pre-training set.
            if (training_members_[j].empty())
                training_members_[j] = all;
            encoders_.emplace_back(
                train_autoencoder(gather(training_members_[j]), m, encoder_training(j, cfg_.pretrain_training.epochs)));
        }
    }

    CtsConfig b = cfg_.bandit;
    b.d = representation_dim();
    b.K = cfg_.arms;
    b.seed = derive_seed(cfg_.seed, kSeedBandit);
    bandit_.emplace(b);
}

Vector AbacodeAgent::represent(const Vector& x, std::optional<std::size_t>& cluster) {
    switch (cfg_.variant) {
    case PolicyVariant::BaselineCB:
        return x;
    case PolicyVariant::UniversalEmbedding:
        return encoders_.front().encode(x);
    case PolicyVariant::MiniBatchEmbedding:
    case PolicyVariant::OnlineEmbedding:
        cluster = assign_cluster(*clusters_, x);
        return encoders_[*cluster].encode(x);
    }
    return x;
}

std::size_t AbacodeAgent::step(const Vector& x) {
    require(bandit_.has_value(), ErrorKind::Protocol, "step: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "step: previous step has not been observed");
    require(static_cast<std::size_t>(x.size()) == input_dim_, ErrorKind::Input,
            "step: context has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(input_dim_));
    require(x.allFinite(), ErrorKind::Input, "step: context contains non-finite values");

    std::optional<std::size_t> cluster;
    Vector z = represent(x, cluster);
    const auto arm = bandit_->sample_arm(z);

    if (cfg_.variant == PolicyVariant::OnlineEmbedding)
        update_cluster_online(*clusters_, x, *cluster);
    history_.push_back(x);
    batch_buffer_.push_back(history_.size() - 1);
    last_cluster_ = cluster;
    pending_ = Pending{cluster, std::move(z), arm};
    return arm;
}

void AbacodeAgent::observe(double reward) {
    require(pending_.has_value(), ErrorKind::Protocol, "observe: no pending step");
    bandit_->update(pending_->arm, pending_->representation, reward);
    pending_.reset();
    if (batch_buffer_.size() >= cfg_.batch_size)
        end_of_batch();
}

void AbacodeAgent::finetune_on_buffer(const std::vector<std::size_t>& assignment) {
    std::vector<std::vector<std::size_t>> members(encoders_.size());
    for (std::size_t i = 0; i < batch_buffer_.size(); ++i)
        members[assignment[i]].push_back(batch_buffer_[i]);
    for (std::size_t j = 0; j < encoders_.size(); ++j) {
        if (members[j].empty())
            continue;
        update_autoencoder(encoders_[j].autoencoder(), gather(members[j]), encoder_training(j, cfg_.finetune_epochs));
        training_members_[j] = std::move(members[j]);
    }
}

void AbacodeAgent::rematch_encoders(const ClusterModel& previous, const ClusterModel& next) {
    const auto k = previous.k();
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(k * k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            pairs.emplace_back(
                (previous.centroids.row(static_cast<Eigen::Index>(i)) - next.centroids.row(static_cast<Eigen::Index>(j)))
                    .squaredNorm(),
                i, j);
    std::sort(pairs.begin(), pairs.end());

    std::vector<bool> used_old(k, false), used_new(k, false);
    std::vector<std::size_t> source(k, 0);
    for (const auto& [dist, i, j] : pairs) {
        if (used_old[i] || used_new[j])
            continue;
        used_old[i] = used_new[j] = true;
        source[j] = i;
    }

    std::vector<Encoder> encoders;
    std::vector<std::vector<std::size_t>> members;
    encoders.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        encoders.push_back(encoders_[source[j]]);
        members.push_back(training_members_[source[j]]);
    }
    encoders_ = std::move(encoders);
    training_members_ = std::move(members);
}

void AbacodeAgent::end_of_batch() {
    require(bandit_.has_value(), ErrorKind::Protocol, "end_of_batch: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "end_of_batch: a step is awaiting its reward");

    if (!batch_buffer_.empty()) {
        switch (cfg_.variant) {
        case PolicyVariant::BaselineCB:
            break;
        case PolicyVariant::UniversalEmbedding:
            if (cfg_.universal_full_retrain) {
                std::vector<std::size_t> all(history_.size());
                std::iota(all.begin(), all.end(), std::size_t{0});
                encoders_.front() = Encoder(train_autoencoder(
                    gather(all), representation_dim(), encoder_training(0, cfg_.pretrain_training.epochs)));
                training_members_.front() = std::move(all);
            } else {
                finetune_on_buffer(std::vector<std::size_t>(batch_buffer_.size(), 0));
            }
            break;
        case PolicyVariant::MiniBatchEmbedding: {
            std::vector<std::size_t> all(history_.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            auto next = recompute_clusters(gather(all), cfg_.k, derive_seed(cfg_.seed, kSeedClusters));
            rematch_encoders(*clusters_, next);
            clusters_ = std::move(next);
            [[fallthrough]];
        }
        case PolicyVariant::OnlineEmbedding: {
            std::vector<std::size_t> assignment;
            assignment.reserve(batch_buffer_.size());
            for (const auto idx : batch_buffer_)
                assignment.push_back(assign_cluster(*clusters_, history_[idx]));
            finetune_on_buffer(assignment);
            break;
        }
        }
    }
    batch_buffer_.clear();
    ++batches_completed_;
}

void AbacodeAgent::save(std::ostream& out) const {
    require(bandit_.has_value(), ErrorKind::Protocol, "save: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "save: a step is awaiting its reward");
    io::Writer w(out);
    w.header(io::RecordKind::AbacodeAgent);
    w.u8(static_cast<std::uint8_t>(cfg_.variant));
    w.u64(cfg_.arms);
    w.u64(cfg_.k);
    w.u64(cfg_.batch_size);
    w.u64(cfg_.embedding_dim);
    w.u64(cfg_.pretrain_training.epochs);
    w.f64(cfg_.pretrain_training.learning_rate);
    w.u64(cfg_.pretrain_training.minibatch_size);
    w.u64(cfg_.finetune_epochs);
    w.u8(cfg_.universal_full_retrain ? 1 : 0);
    w.u64(cfg_.seed);
    w.u64(input_dim_);
    w.u64(batches_completed_);

    w.u8(clusters_ ? 1 : 0);
    if (clusters_)
        clusters_->save(out);
    w.u64(encoders_.size());
    for (std::size_t j = 0; j < encoders_.size(); ++j) {
        encoders_[j].save(out);
        w.u64(training_members_[j].size());
        for (const auto idx : training_members_[j])
            w.u64(idx);
    }
    bandit_->save(out);

    w.header(io::RecordKind::Matrix);
    w.u64(history_.size());
    w.u64(input_dim_);
    for (const auto& x : history_)
        w.vector(x);
    w.u64(batch_buffer_.size());
    for (const auto idx : batch_buffer_)
        w.u64(idx);
}

AbacodeAgent AbacodeAgent::load(std::istream& in) {
    io::Reader r(in);
    r.header(io::RecordKind::AbacodeAgent);
    AbacodeConfig cfg;
    const auto variant = r.u8();
    require(variant <= static_cast<std::uint8_t>(PolicyVariant::OnlineEmbedding), ErrorKind::Load,
            "agent snapshot: unknown variant");
    cfg.variant = static_cast<PolicyVariant>(variant);
    cfg.arms = r.u64();
    cfg.k = r.u64();
    cfg.batch_size = r.u64();
    cfg.embedding_dim = r.u64();
    cfg.pretrain_training.epochs = r.u64();
    cfg.pretrain_training.learning_rate = r.f64();
    cfg.pretrain_training.minibatch_size = r.u64();
    cfg.finetune_epochs = r.u64();
    cfg.universal_full_retrain = r.u8() != 0;
    cfg.seed = r.u64();
    const auto input_dim = r.u64();
    const auto batches = r.u64();

    std::optional<ClusterModel> clusters;
    if (r.u8() != 0)
        clusters = ClusterModel::load(in);
    std::vector<Encoder> encoders;
    std::vector<std::vector<std::size_t>> members;
    const auto n_enc = r.u64();
    require(n_enc <= 4096, ErrorKind::Load, "agent snapshot: encoder count out of range");
    for (std::uint64_t j = 0; j < n_enc; ++j) {
        encoders.push_back(Encoder::load(in));
        std::vector<std::size_t> idx(r.u64());
        for (auto& v : idx)
            v = r.u64();
        members.push_back(std::move(idx));
    }
    auto bandit = CtsBandit::load(in);
    cfg.bandit = bandit.config();

    r.header(io::RecordKind::Matrix);
    const auto rows = r.u64();
    const auto cols = r.u64();
    require(cols == input_dim, ErrorKind::Load, "agent snapshot: history dimension mismatch");
    const Matrix hist = r.matrix(rows, cols);
    std::vector<std::size_t> buffer(r.u64());
    for (auto& v : buffer) {
        v = r.u64();
        require(v < rows, ErrorKind::Load, "agent snapshot: buffer index out of range");
    }

    AbacodeAgent agent(cfg);
    agent.input_dim_ = input_dim;
    agent.batches_completed_ = batches;
    agent.clusters_ = std::move(clusters);
    agent.encoders_ = std::move(encoders);
    agent.training_members_ = std::move(members);
    require(bandit.dimension() == agent.representation_dim(), ErrorKind::Load,
            "agent snapshot: bandit dimension does not match representation");
    if (agent.clustered())
        require(agent.clusters_ && agent.clusters_->k() == cfg.k && agent.clusters_->dimension() == input_dim &&
                    agent.encoders_.size() == cfg.k,
                ErrorKind::Load, "agent snapshot: inconsistent cluster state");
    for (const auto& e : agent.encoders_)
        require(e.input_dim() == input_dim && e.output_dim() == agent.representation_dim() && e.is_autoencoder(),
                ErrorKind::Load, "agent snapshot: encoder dimensions do not match");
    agent.bandit_.emplace(std::move(bandit));
    agent.history_.reserve(rows);
    for (Eigen::Index i = 0; i < hist.rows(); ++i)
        agent.history_.emplace_back(hist.row(i).transpose());
    agent.batch_buffer_ = std::move(buffer);
    return agent;
}

} // namespace abacode
