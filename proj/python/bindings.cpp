#include "abacode/abacode_agent.hpp"
#include "abacode/adaptive_compression.hpp"
#include "abacode/clustering.hpp"
#include "abacode/cts_bandit.hpp"
#include "abacode/encoders.hpp"
#include "abacode/environments.hpp"
#include "abacode/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace abacode;

namespace {

template <class T>
py::bytes to_bytes(const T& obj) {
    std::ostringstream out;
    obj.save(out);
    return py::bytes(out.str());
}

template <class T>
T from_bytes(const py::bytes& data) {
    std::istringstream in{std::string(data)};
    return T::load(in);
}

CtsConfig bandit_config(double R, double epsilon, double gamma, std::optional<double> scale) {
    CtsConfig c;
    c.R = R;
    c.epsilon = epsilon;
    c.gamma = gamma;
    c.scale_override = scale;
    return c;
}

TrainConfig train_config(std::size_t epochs, double learning_rate, std::size_t minibatch_size, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = learning_rate;
    t.minibatch_size = minibatch_size;
    t.seed = seed;
    return t;
}

py::dict summary_dict(const SummaryRow& r) {
    py::dict d;
    d["variant"] = r.variant;
    d["seed"] = r.seed;
    d["k"] = r.k;
    d["rounds"] = r.rounds;
    d["accuracy"] = r.accuracy;
    d["errors"] = r.errors;
    d["cumulative_reward"] = r.cumulative_reward;
    return d;
}

} // namespace

PYBIND11_MODULE(_abacode, m) {
    m.doc() = "Contextual bandits with context-dependent embeddings and adaptive compression";

    static py::exception<Error> error_type(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object args = py::make_tuple(std::string(to_string(e.kind())), std::string(e.what()));
            PyErr_SetObject(error_type.ptr(), args.ptr());
        }
    });

    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("tag"));

    // --- bandit ---
    m.def(
        "exploration_scale",
        [](double R, double epsilon, double gamma, std::size_t d) {
            auto c = bandit_config(R, epsilon, gamma, std::nullopt);
            c.d = d;
            c.K = 1;
            return exploration_scale(c);
        },
        py::arg("R"), py::arg("epsilon"), py::arg("gamma"), py::arg("d"));

    py::class_<CtsBandit>(m, "CtsBandit")
        .def(py::init([](std::size_t arms, std::size_t dimension, std::uint64_t seed, double R, double epsilon,
                         double gamma, std::optional<double> scale) {
                 auto c = bandit_config(R, epsilon, gamma, scale);
                 c.K = arms;
                 c.d = dimension;
                 c.seed = seed;
                 return CtsBandit(c);
             }),
             py::arg("arms"), py::arg("dimension"), py::arg("seed") = 0, py::arg("R") = 0.5,
             py::arg("epsilon") = 0.5, py::arg("gamma") = 0.1, py::arg("scale_override") = py::none())
        .def("sample_arm", &CtsBandit::sample_arm, py::arg("x"))
        .def("update", &CtsBandit::update, py::arg("arm"), py::arg("x"), py::arg("reward"))
        .def("posterior_mean", &CtsBandit::posterior_mean, py::arg("arm"))
        .def("design_matrix", [](const CtsBandit& b, std::size_t arm) { return b.arm(arm).B; }, py::arg("arm"))
        .def("design_inverse", [](const CtsBandit& b, std::size_t arm) { return b.arm(arm).B_inv; }, py::arg("arm"))
        .def("reinitialize", &CtsBandit::reinitialize)
        .def_property_readonly("scale", &CtsBandit::scale)
        .def_property_readonly("arms", &CtsBandit::arms)
        .def_property_readonly("dimension", &CtsBandit::dimension)
        .def("to_bytes", &to_bytes<CtsBandit>)
        .def_static("from_bytes", &from_bytes<CtsBandit>, py::arg("data"));

    // --- encoders ---
    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("initial_mse", &TrainReport::initial_mse)
        .def_readonly("epoch_mse", &TrainReport::epoch_mse)
        .def_readonly("final_mse", &TrainReport::final_mse);

    py::class_<AutoencoderModel>(m, "Autoencoder")
        .def_readonly("W1", &AutoencoderModel::W1)
        .def_readonly("b1", &AutoencoderModel::b1)
        .def_readonly("W2", &AutoencoderModel::W2)
        .def_readonly("b2", &AutoencoderModel::b2)
        .def_property_readonly("hidden_dim", &AutoencoderModel::hidden_dim)
        .def("encode", [](const AutoencoderModel& a, const Vector& x) { return encode(a, x); }, py::arg("x"))
        .def("reconstruct", [](const AutoencoderModel& a, const Vector& x) { return reconstruct(a, x); },
             py::arg("x"))
        .def("mse", [](const AutoencoderModel& a, const Dataset& d) { return reconstruction_mse(a, d); },
             py::arg("data"))
        .def(
            "update",
            [](AutoencoderModel& a, const Dataset& batch, std::size_t epochs, double lr, std::size_t mb,
               std::uint64_t seed) {
                TrainReport report;
                update_autoencoder(a, batch, train_config(epochs, lr, mb, seed), &report);
                return report;
            },
            py::arg("batch"), py::arg("epochs") = 5, py::arg("learning_rate") = 0.5, py::arg("minibatch_size") = 16,
            py::arg("seed") = 0);

    m.def(
        "train_autoencoder",
        [](const Dataset& data, std::size_t hidden, std::size_t epochs, double lr, std::size_t mb,
           std::uint64_t seed) {
            TrainReport report;
            auto model = train_autoencoder(data, hidden, train_config(epochs, lr, mb, seed), &report);
            return py::make_tuple(model, report);
        },
        py::arg("data"), py::arg("hidden"), py::arg("epochs") = 20, py::arg("learning_rate") = 0.5,
        py::arg("minibatch_size") = 16, py::arg("seed") = 0);

    py::class_<LinearEncoderModel>(m, "LinearEncoder")
        .def_readonly("mean", &LinearEncoderModel::mean)
        .def_readonly("P", &LinearEncoderModel::P)
        .def_readonly("variances", &LinearEncoderModel::variances)
        .def("encode", [](const LinearEncoderModel& l, const Vector& x) { return encode(l, x); }, py::arg("x"))
        .def("reconstruct", [](const LinearEncoderModel& l, const Vector& x) { return reconstruct(l, x); },
             py::arg("x"));
    m.def("fit_linear_encoder", &fit_linear_encoder, py::arg("data"), py::arg("m"));

    // --- clustering ---
    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("centroids", &ClusterModel::centroids)
        .def_readonly("counts", &ClusterModel::counts)
        .def("assign", [](const ClusterModel& c, const Vector& x) { return assign_cluster(c, x); }, py::arg("x"))
        .def("update_online", &update_cluster_online, py::arg("x"), py::arg("cluster"))
        .def("objective", &kmeans_objective, py::arg("data"));
    m.def(
        "kmeans_fit", [](const Dataset& d, std::size_t k, std::uint64_t seed) { return kmeans_fit(d, k, seed); },
        py::arg("data"), py::arg("k"), py::arg("seed") = 0);

    // --- agents ---
    py::class_<AbacodeAgent>(m, "AbacodeAgent")
        .def(py::init([](const std::string& variant, std::size_t arms, std::size_t k, std::size_t batch_size,
                         std::size_t embedding_dim, std::uint64_t seed, double R, std::optional<double> scale,
                         std::size_t epochs, std::size_t finetune_epochs) {
                 AbacodeConfig c;
                 c.variant = parse_policy_variant(variant);
                 c.arms = arms;
                 c.k = k;
                 c.batch_size = batch_size;
                 c.embedding_dim = embedding_dim;
                 c.seed = seed;
                 c.bandit = bandit_config(R, 0.5, 0.1, scale);
                 c.pretrain_training.epochs = epochs;
                 c.finetune_epochs = finetune_epochs;
                 return AbacodeAgent(c);
             }),
             py::arg("variant"), py::arg("arms"), py::arg("k") = 4, py::arg("batch_size") = 1000,
             py::arg("embedding_dim") = 0, py::arg("seed") = 0, py::arg("R") = 0.5,
             py::arg("scale_override") = py::none(), py::arg("epochs") = 20, py::arg("finetune_epochs") = 5)
        .def("pretrain", &AbacodeAgent::pretrain, py::arg("contexts"))
        .def("step", &AbacodeAgent::step, py::arg("x"))
        .def("observe", &AbacodeAgent::observe, py::arg("reward"))
        .def("end_of_batch", &AbacodeAgent::end_of_batch)
        .def_property_readonly("representation_dim", &AbacodeAgent::representation_dim)
        .def_property_readonly("batches_completed", &AbacodeAgent::batches_completed)
        .def_property_readonly("last_cluster", &AbacodeAgent::last_cluster)
        .def_property_readonly("centroids",
                               [](const AbacodeAgent& a) -> std::optional<Matrix> {
                                   if (!a.clusters())
                                       return std::nullopt;
                                   return a.clusters()->centroids;
                               })
        .def_property_readonly("encoder_count", [](const AbacodeAgent& a) { return a.encoders().size(); })
        .def("to_bytes", &to_bytes<AbacodeAgent>)
        .def_static("from_bytes", &from_bytes<AbacodeAgent>, py::arg("data"));

    m.def(
        "assign_reward",
        [](double r, double c, double alpha_k, double alpha_p) { return assign_reward({alpha_k, alpha_p}, r, c); },
        py::arg("r"), py::arg("c"), py::arg("alpha_k") = 0.1, py::arg("alpha_p") = 0.0);
    m.def("compression_width", &compression_width, py::arg("c"), py::arg("D"));

    py::class_<CompressionAgent>(m, "CompressionAgent")
        .def(py::init([](std::size_t arms, std::vector<double> levels, double alpha_k, double alpha_p, bool staged,
                         const std::string& encoder, std::size_t batch_size, std::uint64_t seed, double R,
                         std::optional<double> scale) {
                 CompressionConfig c;
                 c.arms = arms;
                 c.levels = std::move(levels);
                 c.split = {alpha_k, alpha_p};
                 c.staged = staged;
                 c.encoder_kind = parse_encoder_kind(encoder);
                 c.batch_size = batch_size;
                 c.seed = seed;
                 c.bandit = bandit_config(R, 0.5, 0.1, scale);
                 return CompressionAgent(c);
             }),
             py::arg("arms"), py::arg("levels") = std::vector<double>{0.25, 0.5, 0.75, 1.0},
             py::arg("alpha_k") = 0.1, py::arg("alpha_p") = 0.0, py::arg("staged") = false,
             py::arg("encoder") = "linear", py::arg("batch_size") = 1000, py::arg("seed") = 0, py::arg("R") = 0.5,
             py::arg("scale_override") = py::none())
        .def("pretrain", &CompressionAgent::pretrain, py::arg("contexts"))
        .def("select_compression", &CompressionAgent::select_compression, py::arg("x"))
        .def("step", &CompressionAgent::step, py::arg("x"))
        .def("observe", &CompressionAgent::observe, py::arg("reward"))
        .def(
            "round",
            [](CompressionAgent& a, const Vector& x, std::size_t label) {
                const auto r = a.round(x, label);
                return py::make_tuple(r.level, r.arm, r.reward);
            },
            py::arg("x"), py::arg("label"))
        .def("end_of_batch", &CompressionAgent::end_of_batch)
        .def("compressed", &CompressionAgent::compressed, py::arg("level"), py::arg("x"))
        .def_property_readonly("last_compression",
                               [](const CompressionAgent& a) -> py::object {
                                   const auto s = a.last_compression();
                                   if (!s)
                                       return py::none();
                                   py::dict d;
                                   d["level"] = s->level;
                                   d["c"] = s->c;
                                   d["r_k"] = s->r_k;
                                   d["r_p"] = s->r_p;
                                   return d;
                               })
        .def("level_posterior_mean",
             [](const CompressionAgent& a, std::size_t i) { return a.level_bandit().posterior_mean(i); })
        .def("class_posterior_mean",
             [](const CompressionAgent& a, std::size_t i) { return a.class_bandit().posterior_mean(i); })
        .def("to_bytes", &to_bytes<CompressionAgent>)
        .def_static("from_bytes", &from_bytes<CompressionAgent>, py::arg("data"));

    // --- experiments ---
    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readwrite("rounds", &ExperimentConfig::rounds)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("k", &ExperimentConfig::k)
        .def_readwrite("batch_size", &ExperimentConfig::batch_size)
        .def_readwrite("out_dir", &ExperimentConfig::out_dir)
        .def_property_readonly("variants", [](const ExperimentConfig& c) {
            std::vector<std::string> names;
            for (const auto& v : c.variants)
                names.push_back(v.name);
            return names;
        });
    m.def("parse_config", &parse_config, py::arg("yaml_text"));
    m.def("load_config", &load_config, py::arg("path"));
    m.def("config_template", &config_template);

    m.def(
        "build_stream",
        [](const ExperimentConfig& cfg, std::uint64_t seed) {
            StreamSpec spec = cfg.stream;
            spec.batch_size = cfg.batch_size;
            const auto s = build_stream(spec, seed);
            Matrix X(static_cast<Eigen::Index>(s.online.size()), static_cast<Eigen::Index>(s.dimension()));
            std::vector<std::size_t> labels;
            labels.reserve(s.online.size());
            for (std::size_t i = 0; i < s.online.size(); ++i) {
                X.row(static_cast<Eigen::Index>(i)) = s.online[i].x.transpose();
                labels.push_back(s.online[i].label);
            }
            return py::make_tuple(s.pretrain, X, labels, s.classes);
        },
        py::arg("config"), py::arg("seed"),
        "Returns (pretrain contexts, online contexts, online labels, class count).");

    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg) {
            py::list out;
            for (const auto& r : run_experiment(cfg))
                out.append(summary_dict(r));
            return out;
        },
        py::arg("config"));
    m.def(
        "compare",
        [](const ExperimentConfig& cfg) {
            py::list out;
            for (const auto& r : compare(cfg)) {
                py::dict d;
                d["rank"] = r.rank;
                d["variant"] = r.variant;
                d["mean_accuracy"] = r.mean_accuracy;
                d["seeds"] = r.seeds;
                out.append(d);
            }
            return out;
        },
        py::arg("config"));
    m.def("pretrain_snapshot", &pretrain_snapshot, py::arg("config"));
}
