#include "abacode/adaptive_compression.hpp"

#include "abacode/abacode_agent.hpp"
#include "abacode/binary_io.hpp"

#include <algorithm>
#include <cmath>

namespace abacode {

std::string_view to_string(EncoderKind kind) {
    return kind == EncoderKind::Linear ? "linear" : "autoencoder";
}

EncoderKind parse_encoder_kind(std::string_view name) {
    if (name == "linear")
        return EncoderKind::Linear;
    if (name == "autoencoder")
        return EncoderKind::Autoencoder;
    fail(ErrorKind::Config, "unknown encoder kind '" + std::string(name) + "'");
}

std::pair<double, double> assign_reward(const BudgetSplit& split, double r, double c) {
    return {r - split.alpha_k * c, r - split.alpha_p * c};
}

std::size_t compression_width(double c, std::size_t D) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c * static_cast<double>(D))));
}

void CompressionConfig::validate() const {
    require(!levels.empty(), ErrorKind::Config, "compression: at least one level is required");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        require(levels[i] > 0.0 && levels[i] <= 1.0, ErrorKind::Config, "compression: levels must lie in (0, 1]");
        if (i > 0)
            require(levels[i] > levels[i - 1], ErrorKind::Config, "compression: levels must be strictly increasing");
    }
    require(std::isfinite(split.alpha_k) && split.alpha_k >= 0.0 && std::isfinite(split.alpha_p) &&
                split.alpha_p >= 0.0,
            ErrorKind::Config, "compression: budget weights must be finite and non-negative");
    require(arms >= 1, ErrorKind::Config, "compression: arms must be at least 1");
    require(batch_size >= 1, ErrorKind::Config, "compression: batch_size must be at least 1");
    require(finetune_epochs >= 1, ErrorKind::Config, "compression: finetune_epochs must be at least 1");
    pretrain_training.validate();
    CtsConfig probe = bandit;
    probe.d = 1;
    probe.K = 1;
    probe.validate();
}

CompressionAgent::CompressionAgent(const CompressionConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
}

TrainConfig CompressionAgent::encoder_training(std::size_t level, std::size_t epochs) const {
    TrainConfig t = cfg_.pretrain_training;
    t.epochs = epochs;
    t.seed = derive_seed(cfg_.seed, kSeedEncoderBase + level);
    return t;
}

Dataset CompressionAgent::history_matrix() const {
    Dataset out(static_cast<Eigen::Index>(history_.size()), static_cast<Eigen::Index>(input_dim_));
    for (std::size_t i = 0; i < history_.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = history_[i].transpose();
    return out;
}

const CtsBandit& CompressionAgent::level_bandit() const {
    require(level_bandit_.has_value(), ErrorKind::Protocol, "compression: agent has not been pretrained");
    return *level_bandit_;
}

const CtsBandit& CompressionAgent::class_bandit() const {
    require(class_bandit_.has_value(), ErrorKind::Protocol, "compression: agent has not been pretrained");
    return *class_bandit_;
}

void CompressionAgent::pretrain(const Dataset& unlabeled) {
    require(unlabeled.rows() >= 1 && unlabeled.cols() >= 1, ErrorKind::Input, "pretrain: data must be non-empty");
    if (cfg_.encoder_kind == EncoderKind::Linear)
        require(unlabeled.rows() >= 2, ErrorKind::Input, "pretrain: linear compression needs at least 2 contexts");
    input_dim_ = static_cast<std::size_t>(unlabeled.cols());
    history_.clear();
    for (Eigen::Index i = 0; i < unlabeled.rows(); ++i)
        history_.emplace_back(unlabeled.row(i).transpose());
    batch_buffer_.clear();
    pending_.reset();
    last_.reset();

    encoders_.clear();
    for (std::size_t i = 0; i < cfg_.levels.size(); ++i) {
        const auto width = compression_width(cfg_.levels[i], input_dim_);
        if (cfg_.encoder_kind == EncoderKind::Linear)
            encoders_.emplace_back(fit_linear_encoder(unlabeled, width));
        else
            encoders_.emplace_back(
                train_autoencoder(unlabeled, width, encoder_training(i, cfg_.pretrain_training.epochs)));
    }

    CtsConfig b1 = cfg_.bandit;
    b1.d = input_dim_;
    b1.K = cfg_.levels.size();
    b1.seed = derive_seed(cfg_.seed, kSeedLevelBandit);
    level_bandit_.emplace(b1);
    CtsConfig b2 = cfg_.bandit;
    b2.d = input_dim_;
    b2.K = cfg_.arms;
    b2.seed = derive_seed(cfg_.seed, kSeedClassBandit);
    class_bandit_.emplace(b2);
}

Vector CompressionAgent::compressed(std::size_t level, const Vector& x) const {
    require(level < encoders_.size(), ErrorKind::Input, "compression: level index out of range");
    const Vector code = encoders_[level].encode(x);
    Vector z = Vector::Zero(static_cast<Eigen::Index>(input_dim_));
    z.head(code.size()) = code;
    return z;
}

std::size_t CompressionAgent::select_compression(const Vector& x) {
    require(level_bandit_.has_value(), ErrorKind::Protocol, "compression: agent has not been pretrained");
    return level_bandit_->sample_arm(x);
}

std::size_t CompressionAgent::step(const Vector& x) {
    require(level_bandit_.has_value(), ErrorKind::Protocol, "step: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "step: previous step has not been observed");
    require(static_cast<std::size_t>(x.size()) == input_dim_, ErrorKind::Input,
            "step: context has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(input_dim_));
    const auto level = select_compression(x);
    Vector z = compressed(level, x);
    const auto arm = class_bandit_->sample_arm(z);
    pending_ = Pending{level, x, std::move(z), arm};
    return arm;
}

void CompressionAgent::observe(double reward) {
    require(pending_.has_value(), ErrorKind::Protocol, "observe: no pending step");
    const double c = cfg_.levels[pending_->level];
    const auto [r_k, r_p] = assign_reward(cfg_.split, reward, c);
    level_bandit_->update(pending_->level, pending_->x, r_k);
    class_bandit_->update(pending_->arm, pending_->z, r_p);
    last_ = CompressionStep{pending_->level, c, r_k, r_p};
    history_.push_back(pending_->x);
    batch_buffer_.push_back(std::move(pending_->x));
    pending_.reset();
    if (batch_buffer_.size() >= cfg_.batch_size)
        end_of_batch();
}

CompressionRound CompressionAgent::round(const Vector& x, std::size_t label) {
    const auto arm = step(x);
    const double r = arm == label ? 1.0 : 0.0;
    const auto level = pending_->level;
    observe(r);
    return {level, arm, r};
}

void CompressionAgent::end_of_batch() {
    require(level_bandit_.has_value(), ErrorKind::Protocol, "end_of_batch: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "end_of_batch: a step is awaiting its reward");
    if (!batch_buffer_.empty()) {
        if (cfg_.encoder_kind == EncoderKind::Linear) {
            const Dataset all = history_matrix();
            for (std::size_t i = 0; i < encoders_.size(); ++i)
                encoders_[i] = Encoder(fit_linear_encoder(all, encoders_[i].output_dim()));
        } else {
            Dataset batch(static_cast<Eigen::Index>(batch_buffer_.size()), static_cast<Eigen::Index>(input_dim_));
            for (std::size_t i = 0; i < batch_buffer_.size(); ++i)
                batch.row(static_cast<Eigen::Index>(i)) = batch_buffer_[i].transpose();
            for (std::size_t i = 0; i < encoders_.size(); ++i)
                update_autoencoder(encoders_[i].autoencoder(), batch, encoder_training(i, cfg_.finetune_epochs));
        }
    }
    if (cfg_.staged) {
        level_bandit_->reinitialize();
        class_bandit_->reinitialize();
    }
    batch_buffer_.clear();
}

void CompressionAgent::save(std::ostream& out) const {
    require(level_bandit_.has_value(), ErrorKind::Protocol, "save: agent has not been pretrained");
    require(!pending_.has_value(), ErrorKind::Protocol, "save: a step is awaiting its reward");
    io::Writer w(out);
    w.header(io::RecordKind::CompressionAgent);
    w.u64(cfg_.levels.size());
    for (const auto c : cfg_.levels)
        w.f64(c);
    w.u8(cfg_.encoder_kind == EncoderKind::Linear ? 0 : 1);
    w.f64(cfg_.split.alpha_k);
    w.f64(cfg_.split.alpha_p);
    w.u8(cfg_.staged ? 1 : 0);
    w.u64(cfg_.arms);
    w.u64(cfg_.batch_size);
    w.u64(cfg_.pretrain_training.epochs);
    w.f64(cfg_.pretrain_training.learning_rate);
    w.u64(cfg_.pretrain_training.minibatch_size);
    w.u64(cfg_.finetune_epochs);
    w.u64(cfg_.seed);
    w.u64(input_dim_);
    for (const auto& e : encoders_)
        e.save(out);
    level_bandit_->save(out);
    class_bandit_->save(out);
    w.header(io::RecordKind::Matrix);
    w.u64(history_.size());
    w.u64(input_dim_);
    for (const auto& x : history_)
        w.vector(x);
    w.u64(batch_buffer_.size());
    for (const auto& x : batch_buffer_)
        w.vector(x);
}

CompressionAgent CompressionAgent::load(std::istream& in) {
    io::Reader r(in);
    r.header(io::RecordKind::CompressionAgent);
    CompressionConfig cfg;
    const auto n_levels = r.u64();
    require(n_levels >= 1 && n_levels <= 4096, ErrorKind::Load, "compression snapshot: level count out of range");
    cfg.levels.resize(n_levels);
    for (auto& c : cfg.levels)
        c = r.f64();
    cfg.encoder_kind = r.u8() == 0 ? EncoderKind::Linear : EncoderKind::Autoencoder;
    cfg.split.alpha_k = r.f64();
    cfg.split.alpha_p = r.f64();
    cfg.staged = r.u8() != 0;
    cfg.arms = r.u64();
    cfg.batch_size = r.u64();
    cfg.pretrain_training.epochs = r.u64();
    cfg.pretrain_training.learning_rate = r.f64();
    cfg.pretrain_training.minibatch_size = r.u64();
    cfg.finetune_epochs = r.u64();
    cfg.seed = r.u64();
    const auto input_dim = r.u64();
    std::vector<Encoder> encoders;
    for (std::uint64_t i = 0; i < n_levels; ++i) {
        encoders.push_back(Encoder::load(in));
        require(encoders.back().input_dim() == input_dim &&
                    encoders.back().output_dim() == compression_width(cfg.levels[i], input_dim),
                ErrorKind::Load, "compression snapshot: encoder width does not match its level");
    }
    auto b1 = CtsBandit::load(in);
    auto b2 = CtsBandit::load(in);
    require(b1.dimension() == input_dim && b2.dimension() == input_dim && b1.arms() == n_levels &&
                b2.arms() == cfg.arms,
            ErrorKind::Load, "compression snapshot: bandit shape mismatch");
    cfg.bandit = b2.config();
    r.header(io::RecordKind::Matrix);
    const auto rows = r.u64();
    require(r.u64() == input_dim, ErrorKind::Load, "compression snapshot: history dimension mismatch");
    const Matrix hist = r.matrix(rows, input_dim);
    const auto buffered = r.u64();
    const Matrix buf = r.matrix(buffered, input_dim);

    CompressionAgent agent(cfg);
    agent.input_dim_ = input_dim;
    agent.encoders_ = std::move(encoders);
    agent.level_bandit_.emplace(std::move(b1));
    agent.class_bandit_.emplace(std::move(b2));
    for (Eigen::Index i = 0; i < hist.rows(); ++i)
        agent.history_.emplace_back(hist.row(i).transpose());
    for (Eigen::Index i = 0; i < buf.rows(); ++i)
        agent.batch_buffer_.emplace_back(buf.row(i).transpose());
    return agent;
}

} // namespace abacode
