#include "abacode/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace abacode {

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& message) {
    fail(ErrorKind::Config, path + ": " + message);
}

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.IsMap())
        config_error(path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            config_error(path.empty() ? key : path + "." + key, "unknown key");
    }
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        config_error(path, "malformed value '" + (node.IsScalar() ? node.Scalar() : std::string("<non-scalar>")) + "'");
    }
}

template <class T>
void read(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
    if (const auto n = parent[key])
        out = scalar<T>(n, join(path, key));
}

std::vector<double> read_doubles(const YAML::Node& node, const std::string& path) {
    if (!node.IsSequence())
        config_error(path, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < node.size(); ++i)
        out.push_back(scalar<double>(node[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Source parse_source(const YAML::Node& node, const std::string& path) {
    check_keys(node, path, {"synthetic", "csv", "idx"});
    if (node.size() != 1)
        config_error(path, "exactly one of synthetic, csv, idx is required");
    if (const auto n = node["csv"]) {
        const auto p = join(path, "csv");
        check_keys(n, p, {"path", "label_column", "label_name"});
        CsvSource src;
        read(n, p, "path", src.path);
        if (src.path.empty())
            config_error(join(p, "path"), "required");
        if (n["label_name"])
            src.label_column = scalar<std::string>(n["label_name"], join(p, "label_name"));
        else
            src.label_column = scalar<std::size_t>(n["label_column"], join(p, "label_column"));
        return src;
    }
    if (const auto n = node["idx"]) {
        const auto p = join(path, "idx");
        check_keys(n, p, {"images", "labels"});
        IdxSource src;
        read(n, p, "images", src.images);
        read(n, p, "labels", src.labels);
        if (src.images.empty() || src.labels.empty())
            config_error(p, "images and labels are required");
        return src;
    }
    const auto n = node["synthetic"];
    const auto p = join(path, "synthetic");
    check_keys(n, p, {"components", "dimension", "classes", "spread", "stddev", "weights", "means", "labels"});
    SyntheticSource src;
    read(n, p, "components", src.components);
    read(n, p, "dimension", src.dimension);
    read(n, p, "classes", src.classes);
    read(n, p, "spread", src.spread);
    read(n, p, "stddev", src.stddev);
    if (n["weights"])
        src.weights = read_doubles(n["weights"], join(p, "weights"));
    if (const auto means = n["means"]) {
        for (std::size_t i = 0; i < means.size(); ++i) {
            const auto v = read_doubles(means[i], join(p, "means") + "[" + std::to_string(i) + "]");
            src.means.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        src.components = src.means.size();
    }
    if (const auto labels = n["labels"])
        for (std::size_t i = 0; i < labels.size(); ++i)
            src.labels.push_back(scalar<std::size_t>(labels[i], join(p, "labels") + "[" + std::to_string(i) + "]"));
    if (src.components < 1)
        config_error(join(p, "components"), "must be at least 1");
    if (src.stddev < 0.0)
        config_error(join(p, "stddev"), "must be non-negative");
    if (!src.weights.empty() && src.weights.size() != src.components)
        config_error(join(p, "weights"), "length must equal components");
    return src;
}

Layer parse_layer(const YAML::Node& node, const std::string& path) {
    check_keys(node, path, {"cluster_drift", "negative_inputs", "shuffled_labels", "multitask"});
    if (node.size() != 1)
        config_error(path, "each layer must have exactly one key");
    if (const auto n = node["cluster_drift"]) {
        const auto p = join(path, "cluster_drift");
        ClusterDriftLayer layer;
        if (n.IsScalar()) {
            if (n.Scalar() != "ramp")
                config_error(p, "expected 'ramp' or a list of weight vectors");
        } else if (n.IsSequence()) {
            for (std::size_t i = 0; i < n.size(); ++i)
                layer.schedule.push_back(read_doubles(n[i], p + "[" + std::to_string(i) + "]"));
        } else {
            config_error(p, "expected 'ramp' or a list of weight vectors");
        }
        return layer;
    }
    if (const auto n = node["negative_inputs"]) {
        const auto mode = scalar<std::string>(n, join(path, "negative_inputs"));
        if (mode == "half")
            return NegativeInputsLayer{NegationMode::Half};
        if (mode == "rand")
            return NegativeInputsLayer{NegationMode::Rand};
        config_error(join(path, "negative_inputs"), "expected 'half' or 'rand'");
    }
    if (node["shuffled_labels"])
        return ShuffledLabelsLayer{};
    const auto n = node["multitask"];
    const auto p = join(path, "multitask");
    check_keys(n, p, {"source", "pretrain", "online", "target_dim"});
    MultiTaskLayer layer;
    if (!n["source"])
        config_error(join(p, "source"), "required");
    layer.second = std::make_shared<Source>(parse_source(n["source"], join(p, "source")));
    read(n, p, "pretrain", layer.pretrain_count);
    read(n, p, "online", layer.online_count);
    read(n, p, "target_dim", layer.target_dim);
    return layer;
}

VariantSpec parse_variant(const YAML::Node& node, const std::string& path) {
    if (node.IsScalar()) {
        try {
            return standard_variant(node.Scalar());
        } catch (const Error& e) {
            config_error(path, e.what());
        }
    }
    check_keys(node, path, {"name", "type", "levels", "alpha_k", "alpha_p", "staged", "encoder"});
    const auto type = node["type"] ? scalar<std::string>(node["type"], join(path, "type")) : std::string();
    VariantSpec v;
    if (type == "compression") {
        CompressionParams params;
        if (node["levels"])
            params.levels = read_doubles(node["levels"], join(path, "levels"));
        read(node, path, "alpha_k", params.split.alpha_k);
        read(node, path, "alpha_p", params.split.alpha_p);
        read(node, path, "staged", params.staged);
        if (node["encoder"]) {
            try {
                params.encoder_kind = parse_encoder_kind(scalar<std::string>(node["encoder"], join(path, "encoder")));
            } catch (const Error& e) {
                config_error(join(path, "encoder"), e.what());
            }
        }
        v.kind = params;
        v.name = "compression";
    } else {
        try {
            v = standard_variant(type);
        } catch (const Error& e) {
            config_error(join(path, "type"), e.what());
        }
    }
    read(node, path, "name", v.name);
    return v;
}

} // namespace

VariantSpec standard_variant(const std::string& name) {
    if (name == "compression")
        return {"compression", CompressionParams{}};
    const auto v = parse_policy_variant(name);
    return {std::string(to_string(v)), v};
}

void ExperimentConfig::validate() const {
    if (variants.empty())
        config_error("variants", "at least one variant is required");
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const auto path = "variants[" + std::to_string(i) + "]";
        if (variants[i].name.empty())
            config_error(path + ".name", "must be non-empty");
        if (variants[i].name.find_first_of("/\\,\n") != std::string::npos)
            config_error(path + ".name", "must not contain '/', '\\\\', ',' or newlines");
        for (std::size_t j = 0; j < i; ++j)
            if (variants[j].name == variants[i].name)
                config_error(path + ".name", "duplicate variant name '" + variants[i].name + "'");
        if (const auto* c = std::get_if<CompressionParams>(&variants[i].kind)) {
            CompressionConfig probe;
            probe.levels = c->levels;
            probe.split = c->split;
            try {
                probe.validate();
            } catch (const Error& e) {
                config_error(path, e.what());
            }
        }
    }
    if (rounds < 1)
        config_error("rounds", "must be at least 1");
    if (k < 1)
        config_error("k", "must be at least 1");
    if (batch_size < 1)
        config_error("batch_size", "must be at least 1");
    if (seeds.empty())
        config_error("seeds", "at least one seed is required");
    if (stream.online_count < 1)
        config_error("stream.online", "must be at least 1");
    if (stream.pretrain_count < 2)
        config_error("stream.pretrain", "must be at least 2");
    if (!(agent.R > 0.0))
        config_error("agent.R", "must be positive");
    if (!(agent.epsilon > 0.0 && agent.epsilon <= 1.0))
        config_error("agent.epsilon", "must lie in (0, 1]");
    if (!(agent.gamma > 0.0 && agent.gamma <= 1.0))
        config_error("agent.gamma", "must lie in (0, 1]");
    if (agent.scale_override && !(*agent.scale_override >= 0.0))
        config_error("agent.scale_override", "must be non-negative");
    if (agent.training.epochs < 1)
        config_error("agent.training.epochs", "must be at least 1");
    if (!(agent.training.learning_rate > 0.0))
        config_error("agent.training.learning_rate", "must be positive");
    if (agent.training.minibatch_size < 1)
        config_error("agent.training.minibatch_size", "must be at least 1");
    if (agent.finetune_epochs < 1)
        config_error("agent.finetune_epochs", "must be at least 1");

    if (const auto* syn = std::get_if<SyntheticSource>(&stream.source)) {
        const std::string p = "stream.source.synthetic.";
        if (syn->means.empty()) {
            if (syn->components < 1)
                config_error(p + "components", "must be at least 1");
            if (syn->dimension < 1)
                config_error(p + "dimension", "must be at least 1");
        }
        if (syn->classes < 1)
            config_error(p + "classes", "must be at least 1");
        if (!(syn->spread >= 0.0))
            config_error(p + "spread", "must be non-negative");
        if (!(syn->stddev >= 0.0))
            config_error(p + "stddev", "must be non-negative");
    }
}

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        fail(ErrorKind::Parse, std::string("config: YAML syntax error: ") + e.what());
    }
    ExperimentConfig cfg;
    if (!root || root.IsNull())
        config_error("config", "empty document");
    check_keys(root, "", {"seeds", "rounds", "k", "batch_size", "out", "variants", "agent", "stream"});

    read(root, "", "rounds", cfg.rounds);
    read(root, "", "k", cfg.k);
    read(root, "", "batch_size", cfg.batch_size);
    read(root, "", "out", cfg.out_dir);
    if (const auto seeds = root["seeds"]) {
        cfg.seeds.clear();
        if (seeds.IsScalar()) {
            cfg.seeds.push_back(scalar<std::uint64_t>(seeds, "seeds"));
        } else {
            for (std::size_t i = 0; i < seeds.size(); ++i)
                cfg.seeds.push_back(scalar<std::uint64_t>(seeds[i], "seeds[" + std::to_string(i) + "]"));
        }
    }
    if (const auto variants = root["variants"]) {
        if (!variants.IsSequence())
            config_error("variants", "expected a list");
        cfg.variants.clear();
        for (std::size_t i = 0; i < variants.size(); ++i)
            cfg.variants.push_back(parse_variant(variants[i], "variants[" + std::to_string(i) + "]"));
    }
    if (const auto agent = root["agent"]) {
        check_keys(agent, "agent",
                   {"R", "epsilon", "gamma", "scale_override", "embedding_dim", "finetune_epochs",
                    "universal_full_retrain", "training"});
        read(agent, "agent", "R", cfg.agent.R);
        read(agent, "agent", "epsilon", cfg.agent.epsilon);
        read(agent, "agent", "gamma", cfg.agent.gamma);
        if (agent["scale_override"])
            cfg.agent.scale_override = scalar<double>(agent["scale_override"], "agent.scale_override");
        read(agent, "agent", "embedding_dim", cfg.agent.embedding_dim);
        read(agent, "agent", "finetune_epochs", cfg.agent.finetune_epochs);
        read(agent, "agent", "universal_full_retrain", cfg.agent.universal_full_retrain);
        if (const auto t = agent["training"]) {
            check_keys(t, "agent.training", {"epochs", "learning_rate", "minibatch_size"});
            read(t, "agent.training", "epochs", cfg.agent.training.epochs);
            read(t, "agent.training", "learning_rate", cfg.agent.training.learning_rate);
            read(t, "agent.training", "minibatch_size", cfg.agent.training.minibatch_size);
        }
    }
    if (const auto stream = root["stream"]) {
        check_keys(stream, "stream", {"pretrain", "online", "drift_clusters", "source", "layers"});
        read(stream, "stream", "pretrain", cfg.stream.pretrain_count);
        read(stream, "stream", "online", cfg.stream.online_count);
        cfg.stream.drift_clusters = cfg.k;
        read(stream, "stream", "drift_clusters", cfg.stream.drift_clusters);
        if (stream["source"])
            cfg.stream.source = parse_source(stream["source"], "stream.source");
        if (const auto layers = stream["layers"]; layers && !layers.IsNull()) {
            if (!layers.IsSequence())
                config_error("stream.layers", "expected a list");
            for (std::size_t i = 0; i < layers.size(); ++i)
                cfg.stream.layers.push_back(parse_layer(layers[i], "stream.layers[" + std::to_string(i) + "]"));
        }
    } else {
        cfg.stream.drift_clusters = cfg.k;
    }
    cfg.stream.batch_size = cfg.batch_size;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::File, path + ": cannot open config file");
    std::stringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_template() {
    return R"(# abacode experiment configuration (YAML).
# Every field is optional unless marked required; defaults are shown.

seeds: [1, 2, 3]          # one run per (variant, seed); all randomness derives from the seed
rounds: 20000             # online rounds per run; the stream replays from the start when exhausted
k: 4                      # number of clusters / embeddings for mE and oE
batch_size: 1000          # mini-batch length; embeddings update at each batch end
out: results              # output directory

# Variants: CB (raw-context bandit), uE, mE, oE, or a mapping with
# type: compression for the dual-bandit adaptive compression agent.
variants:
  - CB
  - uE
  - mE
  - oE
  # - name: comp-linear
  #   type: compression
  #   levels: [0.25, 0.5, 0.75, 1.0]   # fractions of D retained, strictly increasing
  #   alpha_k: 0.1                     # budget weight of the level bandit
  #   alpha_p: 0.0                     # budget weight of the class bandit
  #   staged: false                    # true: reinitialize both bandits every batch
  #   encoder: linear                  # linear | autoencoder

agent:
  R: 0.5                  # exploration scale v = R sqrt(24/epsilon * d * ln(1/gamma))
  epsilon: 0.5
  gamma: 0.1
  # scale_override: 0.0   # fixes v directly (0 = greedy)
  embedding_dim: 0        # shared embedding width; 0 = ceil(D/4)
  finetune_epochs: 5      # SGD epochs over batch members at each batch end
  universal_full_retrain: false
  training:               # autoencoder pre-training
    epochs: 20
    learning_rate: 0.5
    minibatch_size: 16

stream:
  pretrain: 2000          # unlabeled pre-training contexts
  online: 20000           # online labeled examples
  # drift_clusters: 4     # clusters defining drift components for csv/idx data (default k)
  source:
    synthetic: {components: 4, dimension: 32, classes: 4, spread: 1.0, stddev: 0.5}
    # csv: {path: data.csv, label_column: 93}     # or label_name: <header name>
    # idx: {images: train-images-idx3-ubyte, labels: train-labels-idx1-ubyte}
  layers:                 # applied in order, per batch
    # - cluster_drift: ramp            # or an explicit list of per-batch weight vectors
    # - negative_inputs: rand          # half | rand
    # - shuffled_labels: {}
    # - multitask: {source: {csv: {path: w.csv, label_column: 0}}, pretrain: 528, online: 5000, target_dim: 93}
)";
}

} // namespace abacode
