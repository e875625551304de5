#include "abacode/harness.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace abacode {

namespace {

constexpr std::uint64_t kSeedAgent = 0xa6e;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(ErrorKind::Io, dir.string() + ": cannot create directory: " + ec.message());
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, path.string() + ": cannot open for writing");
    return out;
}

const char* kRunHeader = "round,batch,variant,arm,reward,level,c,r_k,r_p,cumulative_reward,cumulative_accuracy\n";
const char* kSummaryHeader = "variant,seed,k,rounds,final_accuracy,total_errors,cumulative_reward\n";

void write_record(std::ostream& out, const RunRecord& r) {
    out << r.round << ',' << r.batch << ',' << r.variant << ',' << r.arm << ',' << format_number(r.reward) << ',';
    if (r.compression)
        out << r.compression->level << ',' << format_number(r.compression->c) << ','
            << format_number(r.compression->r_k) << ',' << format_number(r.compression->r_p);
    else
        out << ",,,";
    out << ',' << format_number(r.cumulative_reward) << ',' << format_number(r.cumulative_accuracy) << '\n';
}

std::unique_ptr<Agent> load_agent(const VariantSpec& variant, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Load, path + ": cannot open snapshot");
    if (std::holds_alternative<CompressionParams>(variant.kind))
        return std::make_unique<CompressionAgent>(CompressionAgent::load(in));
    auto agent = std::make_unique<AbacodeAgent>(AbacodeAgent::load(in));
    if (agent->config().variant != std::get<PolicyVariant>(variant.kind))
        fail(ErrorKind::Load, path + ": snapshot holds a different policy variant");
    return agent;
}

std::size_t agent_arms(const Agent& agent) {
    if (const auto* a = dynamic_cast<const AbacodeAgent*>(&agent))
        return a->config().arms;
    if (const auto* c = dynamic_cast<const CompressionAgent*>(&agent))
        return c->config().arms;
    return 0;
}

} // namespace

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        return "nan";
    return std::string(buf, ptr);
}

std::string snapshot_path(const std::string& dir, const std::string& variant, std::uint64_t seed) {
    return (fs::path(dir) / (variant + "_seed" + std::to_string(seed) + ".bin")).string();
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, const VariantSpec& variant, const AgentContext& ctx) {
    CtsConfig bandit;
    bandit.R = cfg.agent.R;
    bandit.epsilon = cfg.agent.epsilon;
    bandit.gamma = cfg.agent.gamma;
    bandit.scale_override = cfg.agent.scale_override;

    if (const auto* params = std::get_if<CompressionParams>(&variant.kind)) {
        CompressionConfig c;
        c.levels = params->levels;
        c.encoder_kind = params->encoder_kind;
        c.split = params->split;
        c.staged = params->staged;
        c.arms = ctx.arms;
        c.batch_size = cfg.batch_size;
        c.bandit = bandit;
        c.pretrain_training = cfg.agent.training;
        c.finetune_epochs = cfg.agent.finetune_epochs;
        c.seed = ctx.seed;
        return std::make_unique<CompressionAgent>(c);
    }
    AbacodeConfig a;
    a.variant = std::get<PolicyVariant>(variant.kind);
    a.arms = ctx.arms;
    a.k = cfg.k;
    a.batch_size = cfg.batch_size;
    a.embedding_dim = cfg.agent.embedding_dim;
    a.bandit = bandit;
    a.pretrain_training = cfg.agent.training;
    a.finetune_epochs = cfg.agent.finetune_epochs;
    a.universal_full_retrain = cfg.agent.universal_full_retrain;
    a.seed = ctx.seed;
    return std::make_unique<AbacodeAgent>(a);
}

SummaryRow run_single(const ExperimentConfig& cfg, const VariantSpec& variant, std::uint64_t seed,
                      const RunOptions& options, const std::function<void(const RunRecord&)>& sink) {
    StreamSpec spec = cfg.stream;
    spec.batch_size = cfg.batch_size;
    auto stream = std::make_shared<const Stream>(build_stream(spec, seed));
    BanditEnvironment env(stream);

    const AgentContext ctx{env.dimension(), env.arms(), derive_seed(seed, kSeedAgent)};
    std::unique_ptr<Agent> agent;
    if (options.snapshot_dir) {
        agent = load_agent(variant, snapshot_path(*options.snapshot_dir, variant.name, seed));
        if (agent->input_dim() != ctx.dimension)
            fail(ErrorKind::Load, "snapshot for " + variant.name + " has dimension " +
                                      std::to_string(agent->input_dim()) + ", stream has " +
                                      std::to_string(ctx.dimension));
        if (agent_arms(*agent) != ctx.arms)
            fail(ErrorKind::Load, "snapshot for " + variant.name + " has " + std::to_string(agent_arms(*agent)) +
                                      " arms, stream has " + std::to_string(ctx.arms));
    } else {
        agent = options.factory ? options.factory(variant, ctx) : make_agent(cfg, variant, ctx);
        agent->pretrain(stream->pretrain);
    }
    stream.reset(); // the environment keeps the only reference from here on

    std::ofstream csv;
    if (options.write_files) {
        const auto dir = fs::path(cfg.out_dir) / "runs";
        ensure_dir(dir);
        csv = open_out(dir / (variant.name + "_seed" + std::to_string(seed) + ".csv"));
        csv << "# schema=" << kCsvSchemaVersion << '\n' << kRunHeader;
    }

    RunRecord rec;
    rec.variant = variant.name;
    double cumulative = 0.0;
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        rec.batch = env.batch_index();
        const auto arm = agent->step(env.context());
        const double reward = env.feedback(arm);
        agent->observe(reward);
        cumulative += reward;
        rec.round = t;
        rec.arm = arm;
        rec.reward = reward;
        rec.compression = agent->last_compression();
        rec.cumulative_reward = cumulative;
        rec.cumulative_accuracy = cumulative / static_cast<double>(t);
        if (csv.is_open())
            write_record(csv, rec);
        if (sink)
            sink(rec);
    }
    if (csv.is_open() && !csv.flush())
        fail(ErrorKind::Io, "failed writing run CSV for " + variant.name);

    SummaryRow row;
    row.variant = variant.name;
    row.seed = seed;
    row.k = cfg.k;
    row.rounds = cfg.rounds;
    row.cumulative_reward = cumulative;
    row.accuracy = cumulative / static_cast<double>(cfg.rounds);
    row.errors = cfg.rounds - static_cast<std::size_t>(std::llround(cumulative));
    return row;
}

std::vector<SummaryRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    cfg.validate();
    std::vector<SummaryRow> rows;
    std::ofstream curves;
    if (options.write_files) {
        ensure_dir(cfg.out_dir);
        curves = open_out(fs::path(cfg.out_dir) / "curves.csv");
        curves << "# schema=" << kCsvSchemaVersion << '\n'
               << "variant,seed,round,cumulative_reward,cumulative_accuracy\n";
    }
    for (const auto& variant : cfg.variants) {
        for (const auto seed : cfg.seeds) {
            const auto sink = [&](const RunRecord& r) {
                if (curves.is_open() && (r.round % cfg.batch_size == 0 || r.round == cfg.rounds))
                    curves << r.variant << ',' << seed << ',' << r.round << ',' << format_number(r.cumulative_reward)
                           << ',' << format_number(r.cumulative_accuracy) << '\n';
            };
            rows.push_back(run_single(cfg, variant, seed, options, sink));
        }
    }
    if (options.write_files) {
        auto out = open_out(fs::path(cfg.out_dir) / "summary.csv");
        out << kSummaryHeader;
        for (const auto& r : rows)
            out << r.variant << ',' << r.seed << ',' << r.k << ',' << r.rounds << ',' << format_number(r.accuracy)
                << ',' << r.errors << ',' << format_number(r.cumulative_reward) << '\n';
        if (!out.flush() || !curves.flush())
            fail(ErrorKind::Io, "failed writing summary files under " + cfg.out_dir);
    }
    return rows;
}

std::vector<RankingRow> compare(const ExperimentConfig& cfg, const std::vector<SummaryRow>& rows) {
    std::vector<RankingRow> ranking;
    for (const auto& variant : cfg.variants) {
        RankingRow r;
        r.variant = variant.name;
        double sum = 0.0;
        for (const auto seed : cfg.seeds) {
            const auto it = std::find_if(rows.begin(), rows.end(),
                                         [&](const SummaryRow& s) { return s.variant == variant.name && s.seed == seed; });
            if (it == rows.end())
                fail(ErrorKind::Input, "compare: missing run for variant " + variant.name + " seed " +
                                           std::to_string(seed));
            sum += it->accuracy;
        }
        r.seeds = cfg.seeds.size();
        r.mean_accuracy = sum / static_cast<double>(r.seeds);
        ranking.push_back(r);
    }
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const RankingRow& a, const RankingRow& b) { return a.mean_accuracy > b.mean_accuracy; });
    for (std::size_t i = 0; i < ranking.size(); ++i)
        ranking[i].rank = i + 1;
    return ranking;
}

std::vector<RankingRow> compare(const ExperimentConfig& cfg) {
    const auto ranking = compare(cfg, read_summary((fs::path(cfg.out_dir) / "summary.csv").string()));
    auto out = open_out(fs::path(cfg.out_dir) / "ranking.csv");
    out << "rank,variant,mean_accuracy,seeds\n";
    for (const auto& r : ranking)
        out << r.rank << ',' << r.variant << ',' << format_number(r.mean_accuracy) << ',' << r.seeds << '\n';
    return ranking;
}

std::vector<SummaryRow> read_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::File, path + ": cannot open summary (run the experiment first)");
    std::string line;
    std::getline(in, line);
    std::vector<SummaryRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::istringstream fields(line);
        std::string variant, seed, k, rounds, acc, errors, cum;
        if (!std::getline(fields, variant, ',') || !std::getline(fields, seed, ',') || !std::getline(fields, k, ',') ||
            !std::getline(fields, rounds, ',') || !std::getline(fields, acc, ',') ||
            !std::getline(fields, errors, ',') || !std::getline(fields, cum, ','))
            fail(ErrorKind::Parse, path + ": line " + std::to_string(line_no) + ": malformed summary row");
        try {
            rows.push_back({variant, std::stoull(seed), std::stoull(k), std::stoull(rounds), std::stod(acc),
                            std::stoull(errors), std::stod(cum)});
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, path + ": line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return rows;
}

std::vector<std::string> pretrain_snapshot(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto dir = fs::path(cfg.out_dir) / "snapshots";
    ensure_dir(dir);
    std::vector<std::string> written;
    for (const auto& variant : cfg.variants) {
        for (const auto seed : cfg.seeds) {
            StreamSpec spec = cfg.stream;
            spec.batch_size = cfg.batch_size;
            const auto stream = build_stream(spec, seed);
            const AgentContext ctx{stream.dimension(), stream.classes, derive_seed(seed, kSeedAgent)};
            auto agent = make_agent(cfg, variant, ctx);
            agent->pretrain(stream.pretrain);
            const auto path = snapshot_path(dir.string(), variant.name, seed);
            auto out = open_out(path);
            agent->save(out);
            if (!out.flush())
                fail(ErrorKind::Io, path + ": write failed");
            written.push_back(path);
        }
    }
    return written;
}

} // namespace abacode
