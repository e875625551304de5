#pragma once

#include "abacode/abacode_agent.hpp"
#include "abacode/adaptive_compression.hpp"
#include "abacode/agent.hpp"
#include "abacode/environments.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace abacode {

struct CompressionParams {
    std::vector<double> levels{0.25, 0.5, 0.75, 1.0};
    BudgetSplit split;
    bool staged = false;
    EncoderKind encoder_kind = EncoderKind::Linear;
};

struct VariantSpec {
    std::string name;
    std::variant<PolicyVariant, CompressionParams> kind;
};

struct AgentParams {
    double R = 0.5;
    double epsilon = 0.5;
    double gamma = 0.1;
    std::optional<double> scale_override;
    std::size_t embedding_dim = 0;
    TrainConfig training;
    std::size_t finetune_epochs = 5;
    bool universal_full_retrain = false;
};

struct ExperimentConfig {
    StreamSpec stream;
    std::vector<VariantSpec> variants{{"CB", PolicyVariant::BaselineCB},
                                      {"uE", PolicyVariant::UniversalEmbedding},
                                      {"mE", PolicyVariant::MiniBatchEmbedding},
                                      {"oE", PolicyVariant::OnlineEmbedding}};
    std::size_t k = 4;
    std::size_t batch_size = 1000;
    std::size_t rounds = 20000;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "results";
    AgentParams agent;

    /// Throws ErrorKind::Config with the offending field path.
    void validate() const;
};

/// Parses the YAML experiment file (schema in README and gen-config output).
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& yaml_text);
/// Commented template accepted by load_config.
std::string config_template();

/// Standard variants by short name: CB, uE, mE, oE, or "compression".
VariantSpec standard_variant(const std::string& name);

/// What an agent factory may know about the environment. Labels are not
/// part of it.
struct AgentContext {
    std::size_t dimension = 0;
    std::size_t arms = 0;
    std::uint64_t seed = 0;
};

using AgentFactory = std::function<std::unique_ptr<Agent>(const VariantSpec&, const AgentContext&)>;

std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, const VariantSpec& variant, const AgentContext& ctx);

struct RunRecord {
    std::size_t round = 0; // 1-based
    std::size_t batch = 0;
    std::string variant;
    std::size_t arm = 0;
    double reward = 0.0;
    std::optional<CompressionStep> compression;
    double cumulative_reward = 0.0;
    double cumulative_accuracy = 0.0;
};

struct SummaryRow {
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t rounds = 0;
    double accuracy = 0.0;
    std::size_t errors = 0;
    double cumulative_reward = 0.0;
};

struct RankingRow {
    std::size_t rank = 0;
    std::string variant;
    double mean_accuracy = 0.0;
    std::size_t seeds = 0;
};

struct RunOptions {
    /// Start agents from files written by pretrain_snapshot instead of
    /// pretraining inline.
    std::optional<std::string> snapshot_dir;
    /// Replaces make_agent (tests).
    AgentFactory factory;
    bool write_files = true;
};

inline constexpr int kCsvSchemaVersion = 1;

/// Runs one (variant, seed) pair; optional sink receives every record.
SummaryRow run_single(const ExperimentConfig& cfg, const VariantSpec& variant, std::uint64_t seed,
                      const RunOptions& options = {},
                      const std::function<void(const RunRecord&)>& sink = nullptr);

/// Runs every (variant, seed) pair and writes runs/*.csv, curves.csv and
/// summary.csv under cfg.out_dir.
std::vector<SummaryRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Mean accuracy per variant over seeds, descending; ties keep declaration
/// order. Throws when a (variant, seed) row is missing.
std::vector<RankingRow> compare(const ExperimentConfig& cfg, const std::vector<SummaryRow>& rows);
/// Reads summary.csv under cfg.out_dir, ranks, writes ranking.csv.
std::vector<RankingRow> compare(const ExperimentConfig& cfg);

/// Pretrains every (variant, seed) agent and writes snapshots/<name>_seed<N>.bin.
std::vector<std::string> pretrain_snapshot(const ExperimentConfig& cfg);

std::string snapshot_path(const std::string& dir, const std::string& variant, std::uint64_t seed);

std::vector<SummaryRow> read_summary(const std::string& path);

/// Shortest round-trip decimal form; used for every number in CSV output.
std::string format_number(double v);

} // namespace abacode
