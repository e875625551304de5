#pragma once

#include "abacode/agent.hpp"
#include "abacode/cts_bandit.hpp"
#include "abacode/encoders.hpp"

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace abacode {

enum class EncoderKind { Linear, Autoencoder };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Budget weights of the level-selection bandit (alpha_k) and the
/// classification bandit (alpha_p).
struct BudgetSplit {
    double alpha_k = 0.1;
    double alpha_p = 0.0;
};

/// (r_k, r_p) = (r - alpha_k c, r - alpha_p c).
std::pair<double, double> assign_reward(const BudgetSplit& split, double r, double c);

/// Representation width for level c over D inputs: max(1, round(c D)).
std::size_t compression_width(double c, std::size_t D);

struct CompressionConfig {
    std::vector<double> levels{0.25, 0.5, 0.75, 1.0};
    EncoderKind encoder_kind = EncoderKind::Linear;
    BudgetSplit split;
    /// Reinitialize both bandits at every batch boundary.
    bool staged = false;
    std::size_t arms = 2;
    std::size_t batch_size = 1000;
    CtsConfig bandit; // R, epsilon, gamma, scale_override
    TrainConfig pretrain_training;
    std::size_t finetune_epochs = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr std::uint64_t kSeedLevelBandit = 3;
inline constexpr std::uint64_t kSeedClassBandit = 4;

struct CompressionRound {
    std::size_t level = 0;
    std::size_t arm = 0;
    double reward = 0.0;
};

/// Two cooperating bandits: the level bandit picks a compression level from
/// the raw context, the class bandit classifies the compressed context
/// (zero-padded back to D). Each learns from its own budgeted reward.
class CompressionAgent final : public Agent {
public:
    explicit CompressionAgent(const CompressionConfig& cfg);

    void pretrain(const Dataset& unlabeled) override;

    std::size_t select_compression(const Vector& x);
    std::size_t step(const Vector& x) override;
    void observe(double reward) override;
    /// One full round with a locally computed 0/1 reward against label.
    CompressionRound round(const Vector& x, std::size_t label);
    void end_of_batch();

    std::size_t input_dim() const override { return input_dim_; }
    std::optional<CompressionStep> last_compression() const override { return last_; }

    const CompressionConfig& config() const { return cfg_; }
    const std::vector<Encoder>& encoders() const { return encoders_; }
    const CtsBandit& level_bandit() const;
    const CtsBandit& class_bandit() const;
    std::size_t buffered() const { return batch_buffer_.size(); }
    /// Level chosen by a step that is still awaiting its reward.
    std::optional<std::size_t> pending_level() const {
        return pending_ ? std::optional<std::size_t>(pending_->level) : std::nullopt;
    }

    /// Encodes x at level i and pads with trailing zeros to D.
    Vector compressed(std::size_t level, const Vector& x) const;

    void save(std::ostream& out) const override;
    static CompressionAgent load(std::istream& in);

private:
    struct Pending {
        std::size_t level;
        Vector x;
        Vector z;
        std::size_t arm;
    };

    TrainConfig encoder_training(std::size_t level, std::size_t epochs) const;
    Dataset history_matrix() const;

    CompressionConfig cfg_;
    std::size_t input_dim_ = 0;
    std::vector<Encoder> encoders_;
    std::optional<CtsBandit> level_bandit_;
    std::optional<CtsBandit> class_bandit_;
    std::vector<Vector> history_;
    std::vector<Vector> batch_buffer_;
    std::optional<Pending> pending_;
    std::optional<CompressionStep> last_;
};

} // namespace abacode
