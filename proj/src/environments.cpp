#include "abacode/environments.hpp"

#include "abacode/clustering.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace abacode {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& text) {
    const auto s = trim(text);
    if (s.empty())
        return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        fail(ErrorKind::Format, path + ": truncated IDX header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::size_t draw_index(const std::vector<double>& weights, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double target = unit(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] <= 0.0)
            continue;
        acc += weights[j];
        last_positive = j;
        if (target < acc)
            return j;
    }
    return last_positive;
}

Stream load_source(const Source& source, std::size_t pretrain_count, std::size_t online_count, std::size_t batch_size,
                   std::uint64_t seed) {
    if (const auto* csv = std::get_if<CsvSource>(&source))
        return split_stream(load_csv(csv->path, csv->label_column), pretrain_count, online_count, batch_size);
    if (const auto* idx = std::get_if<IdxSource>(&source))
        return split_stream(load_idx(idx->images, idx->labels), pretrain_count, online_count, batch_size);
    const auto& syn = std::get<SyntheticSource>(source);
    GaussianMixtureSpec spec;
    if (syn.means.empty()) {
        spec = random_mixture(syn.components, syn.dimension, syn.classes, syn.spread, syn.stddev,
                              derive_seed(seed, 0x6d));
    } else {
        spec.means = syn.means;
        spec.stddev = syn.stddev;
    }
    if (!syn.weights.empty())
        spec.weights = syn.weights;
    if (!syn.labels.empty())
        spec.labels = syn.labels;
    auto stream = synth_gaussian_mixture(spec, pretrain_count, online_count, batch_size, derive_seed(seed, 0x67));
    // The arm count is the configured class count even if some class has no
    // component.
    if (syn.labels.empty())
        stream.classes = std::max(stream.classes, syn.classes);
    return stream;
}

} // namespace

LabeledData load_csv(const std::string& path, const LabelColumn& label_column) {
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::File, path + ": cannot open file");

    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        rows.emplace_back(line_no, split_fields(line));
    }
    require(!rows.empty(), ErrorKind::Parse, path + ": no rows");

    const auto width = rows.front().second.size();
    std::size_t label_idx = 0;
    bool header = false;
    if (const auto* name = std::get_if<std::string>(&label_column)) {
        header = true;
        const auto& names = rows.front().second;
        const auto it = std::find_if(names.begin(), names.end(), [&](const auto& f) { return trim(f) == *name; });
        if (it == names.end())
            fail(ErrorKind::Parse, path + ": line " + std::to_string(rows.front().first) + ": no column named '" +
                                       *name + "'");
        label_idx = static_cast<std::size_t>(it - names.begin());
    } else {
        label_idx = std::get<std::size_t>(label_column);
        require(label_idx < width, ErrorKind::Parse,
                path + ": label column " + std::to_string(label_idx) + " out of range for " + std::to_string(width) +
                    " columns");
        const auto& first = rows.front().second;
        for (std::size_t c = 0; c < first.size(); ++c)
            if (c != label_idx && !parse_number(first[c]))
                header = true;
    }

    LabeledData out;
    std::map<std::string, std::size_t> label_ids;
    for (std::size_t r = header ? 1 : 0; r < rows.size(); ++r) {
        const auto& [no, fields] = rows[r];
        if (fields.size() != width)
            fail(ErrorKind::Parse, path + ": line " + std::to_string(no) + ": expected " + std::to_string(width) +
                                       " fields, found " + std::to_string(fields.size()));
        LabeledExample ex;
        ex.x.resize(static_cast<Eigen::Index>(width - 1));
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_idx)
                continue;
            const auto v = parse_number(fields[c]);
            if (!v)
                fail(ErrorKind::Parse, path + ": line " + std::to_string(no) + ": non-numeric feature '" +
                                           trim(fields[c]) + "' in column " + std::to_string(c));
            ex.x[col++] = *v;
        }
        const auto label = trim(fields[label_idx]);
        const auto [it, inserted] = label_ids.emplace(label, label_ids.size());
        ex.label = it->second;
        out.examples.push_back(std::move(ex));
    }
    out.classes = label_ids.size();
    return out;
}

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img)
        fail(ErrorKind::File, images_path + ": cannot open file");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab)
        fail(ErrorKind::File, labels_path + ": cannot open file");

    if (read_be32(img, images_path) != 0x00000803)
        fail(ErrorKind::Format, images_path + ": bad IDX image magic");
    const auto count = read_be32(img, images_path);
    const auto rows = read_be32(img, images_path);
    const auto cols = read_be32(img, images_path);
    if (read_be32(lab, labels_path) != 0x00000801)
        fail(ErrorKind::Format, labels_path + ": bad IDX label magic");
    const auto label_count = read_be32(lab, labels_path);
    if (count != label_count)
        fail(ErrorKind::Format, "IDX count mismatch: " + std::to_string(count) + " images, " +
                                    std::to_string(label_count) + " labels");
    const std::size_t dim = std::size_t{rows} * cols;
    require(dim >= 1, ErrorKind::Format, images_path + ": zero-sized images");

    LabeledData out;
    out.examples.reserve(count);
    std::vector<unsigned char> pixels(dim);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim));
        if (static_cast<std::size_t>(img.gcount()) != dim)
            fail(ErrorKind::Format, images_path + ": truncated at image " + std::to_string(i));
        const int label = lab.get();
        if (label == std::char_traits<char>::eof())
            fail(ErrorKind::Format, labels_path + ": truncated at label " + std::to_string(i));
        LabeledExample ex;
        ex.x.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t p = 0; p < dim; ++p)
            ex.x[static_cast<Eigen::Index>(p)] = pixels[p] / 255.0;
        ex.label = static_cast<std::size_t>(label);
        max_label = std::max(max_label, ex.label);
        out.examples.push_back(std::move(ex));
    }
    out.classes = count ? max_label + 1 : 0;
    return out;
}

GaussianMixtureSpec random_mixture(std::size_t components, std::size_t dimension, std::size_t classes, double spread,
                                   double stddev, std::uint64_t seed) {
    require(components >= 1 && dimension >= 1 && classes >= 1, ErrorKind::Config,
            "mixture: components, dimension and classes must be positive");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, spread);
    GaussianMixtureSpec spec;
    spec.stddev = stddev;
    for (std::size_t j = 0; j < components; ++j) {
        spec.means.push_back(Vector::NullaryExpr(static_cast<Eigen::Index>(dimension), [&](auto&&...) { return u(rng); }));
        spec.labels.push_back(j % classes);
    }
    return spec;
}

Stream synth_gaussian_mixture(const GaussianMixtureSpec& spec, std::size_t pretrain_count, std::size_t online_count,
                              std::size_t batch_size, std::uint64_t seed) {
    const auto k = spec.means.size();
    require(k >= 1, ErrorKind::Config, "mixture: at least one component is required");
    require(spec.stddev >= 0.0, ErrorKind::Config, "mixture: stddev must be non-negative");
    require(batch_size >= 1, ErrorKind::Config, "mixture: batch_size must be positive");
    const auto D = spec.means.front().size();
    for (const auto& m : spec.means)
        require(m.size() == D, ErrorKind::Config, "mixture: component means differ in dimension");
    std::vector<double> weights = spec.weights.empty() ? std::vector<double>(k, 1.0) : spec.weights;
    require(weights.size() == k, ErrorKind::Config, "mixture: weights/components length mismatch");
    std::vector<std::size_t> labels = spec.labels;
    if (labels.empty()) {
        labels.resize(k);
        std::iota(labels.begin(), labels.end(), std::size_t{0});
    }
    require(labels.size() == k, ErrorKind::Config, "mixture: labels/components length mismatch");

    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto sample = [&](std::size_t j) {
        Vector x = spec.means[j];
        if (spec.stddev > 0.0)
            for (Eigen::Index i = 0; i < D; ++i)
                x[i] += spec.stddev * noise(rng);
        return x;
    };

    Stream s;
    s.batch_size = batch_size;
    s.component_count = k;
    s.classes = *std::max_element(labels.begin(), labels.end()) + 1;
    s.pretrain.resize(static_cast<Eigen::Index>(pretrain_count), D);
    for (std::size_t i = 0; i < pretrain_count; ++i)
        s.pretrain.row(static_cast<Eigen::Index>(i)) = sample(draw_index(weights, rng)).transpose();
    s.online.reserve(online_count);
    s.components.reserve(online_count);
    for (std::size_t i = 0; i < online_count; ++i) {
        const auto j = draw_index(weights, rng);
        s.online.push_back({sample(j), labels[j]});
        s.components.push_back(j);
    }
    return s;
}

Stream split_stream(const LabeledData& data, std::size_t pretrain_count, std::size_t online_count,
                    std::size_t batch_size) {
    require(batch_size >= 1, ErrorKind::Config, "stream: batch_size must be positive");
    require(data.examples.size() > pretrain_count, ErrorKind::Input,
            "stream: " + std::to_string(data.examples.size()) + " examples leave nothing after " +
                std::to_string(pretrain_count) + " pre-training contexts");
    require(pretrain_count >= 1, ErrorKind::Config, "stream: pretrain_count must be positive");
    const auto D = data.examples.front().x.size();
    Stream s;
    s.batch_size = batch_size;
    s.classes = data.classes;
    s.pretrain.resize(static_cast<Eigen::Index>(pretrain_count), D);
    for (std::size_t i = 0; i < pretrain_count; ++i)
        s.pretrain.row(static_cast<Eigen::Index>(i)) = data.examples[i].x.transpose();
    const auto end = std::min(data.examples.size(), pretrain_count + online_count);
    s.online.assign(data.examples.begin() + static_cast<std::ptrdiff_t>(pretrain_count),
                    data.examples.begin() + static_cast<std::ptrdiff_t>(end));
    return s;
}

void scale_min_max(Stream& stream) {
    const Vector lo = stream.pretrain.colwise().minCoeff().transpose();
    const Vector hi = stream.pretrain.colwise().maxCoeff().transpose();
    const Vector range = hi - lo;
    const auto scale = [&](Vector& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x[i] = range[i] > 0.0 ? std::clamp((x[i] - lo[i]) / range[i], 0.0, 1.0) : 0.0;
    };
    for (Eigen::Index r = 0; r < stream.pretrain.rows(); ++r) {
        Vector x = stream.pretrain.row(r).transpose();
        scale(x);
        stream.pretrain.row(r) = x.transpose();
    }
    for (auto& ex : stream.online)
        scale(ex.x);
}

Stream apply_cluster_drift(Stream stream, const std::vector<std::vector<double>>& schedule, std::uint64_t seed) {
    require(!stream.components.empty() && stream.components.size() == stream.online.size(), ErrorKind::Config,
            "cluster drift: stream has no component assignment");
    const auto batches = stream.batches();
    require(schedule.size() == batches, ErrorKind::Config,
            "cluster drift: schedule has " + std::to_string(schedule.size()) + " entries for " +
                std::to_string(batches) + " batches");

    std::vector<std::vector<std::size_t>> pools(stream.component_count);
    for (std::size_t i = 0; i < stream.online.size(); ++i)
        pools[stream.components[i]].push_back(i);
    for (std::size_t b = 0; b < batches; ++b) {
        const auto& w = schedule[b];
        require(w.size() == stream.component_count, ErrorKind::Config,
                "cluster drift: batch " + std::to_string(b) + " weight vector has wrong length");
        double sum = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            require(w[j] >= 0.0, ErrorKind::Config, "cluster drift: negative weight");
            require(w[j] == 0.0 || !pools[j].empty(), ErrorKind::Config,
                    "cluster drift: component " + std::to_string(j) + " has weight but no examples");
            sum += w[j];
        }
        require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::Config,
                "cluster drift: batch " + std::to_string(b) + " weights do not sum to 1");
    }

    // Per-batch component counts follow the weights exactly (largest
    // remainder), then the batch order is shuffled.
    Rng rng(seed);
    std::vector<std::size_t> cursor(stream.component_count, 0);
    std::vector<LabeledExample> online;
    std::vector<std::size_t> components;
    online.reserve(stream.online.size());
    components.reserve(stream.online.size());
    for (std::size_t b = 0; b < batches; ++b) {
        const auto begin = b * stream.batch_size;
        const auto n = std::min(stream.batch_size, stream.online.size() - begin);
        const auto& w = schedule[b];
        std::vector<std::size_t> counts(w.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double exact = w[j] * static_cast<double>(n);
            counts[j] = static_cast<std::size_t>(std::floor(exact));
            assigned += counts[j];
            if (w[j] > 0.0)
                remainders.emplace_back(exact - std::floor(exact), j);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& l, const auto& r) { return l.first > r.first; });
        for (std::size_t i = 0; assigned < n; ++i, ++assigned)
            ++counts[remainders[i % remainders.size()].second];

        std::vector<std::size_t> order;
        order.reserve(n);
        for (std::size_t j = 0; j < counts.size(); ++j)
            order.insert(order.end(), counts[j], j);
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto j : order) {
            auto& pool = pools[j];
            online.push_back(stream.online[pool[cursor[j]++ % pool.size()]]);
            components.push_back(j);
        }
    }
    stream.online = std::move(online);
    stream.components = std::move(components);
    return stream;
}

std::vector<std::vector<double>> ramp_schedule(std::size_t components, std::size_t batches) {
    std::vector<std::vector<double>> schedule(batches, std::vector<double>(components));
    for (std::size_t b = 0; b < batches; ++b) {
        const double t = batches > 1 ? static_cast<double>(b) / static_cast<double>(batches - 1) : 0.0;
        double sum = 0.0;
        for (std::size_t j = 0; j < components; ++j) {
            const double w = (1.0 - t) * static_cast<double>(components - j) + t * static_cast<double>(j + 1);
            schedule[b][j] = w;
            sum += w;
        }
        for (auto& w : schedule[b])
            w /= sum;
    }
    return schedule;
}

void assign_components(Stream& stream, std::size_t k, std::uint64_t seed) {
    const auto model = kmeans_fit(stream.pretrain, k, seed);
    stream.components.clear();
    for (const auto& ex : stream.online)
        stream.components.push_back(assign_cluster(model, ex.x));
    stream.component_count = k;
}

Stream apply_negative_inputs(Stream stream, NegationMode mode, std::uint64_t seed) {
    for (std::size_t i = 0; i < stream.online.size(); ++i) {
        const auto& x = stream.online[i].x;
        require(x.size() == 0 || (x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0), ErrorKind::Contract,
                "negative inputs: example " + std::to_string(i) + " has features outside [0, 1]");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double p = 0.5;
    for (std::size_t i = 0; i < stream.online.size(); ++i) {
        if (i % stream.batch_size == 0 && mode == NegationMode::Rand) {
            do {
                p = unit(rng);
            } while (p <= 0.0);
        }
        if (unit(rng) < p)
            stream.online[i].x = (1.0 - stream.online[i].x.array()).matrix();
    }
    return stream;
}

Stream apply_shuffled_labels(Stream stream, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> perm(stream.classes);
    for (std::size_t i = 0; i < stream.online.size(); ++i) {
        if (i % stream.batch_size == 0) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
        }
        stream.online[i].label = perm[stream.online[i].label];
    }
    return stream;
}

Vector stretch(const Vector& x, std::size_t target_dim) {
    require(target_dim >= 1, ErrorKind::Config, "stretch: target dimension must be at least 1");
    require(x.size() >= 1, ErrorKind::Input, "stretch: empty input");
    const auto n = static_cast<std::size_t>(x.size());
    if (n == target_dim)
        return x;
    Vector out(static_cast<Eigen::Index>(target_dim));
    if (target_dim == 1 || n == 1) {
        out.setConstant(x[0]);
        return out;
    }
    const double step = static_cast<double>(n - 1) / static_cast<double>(target_dim - 1);
    for (std::size_t i = 0; i < target_dim; ++i) {
        const double pos = static_cast<double>(i) * step;
        const auto lo = std::min(static_cast<std::size_t>(pos), n - 2);
        const double t = pos - static_cast<double>(lo);
        out[static_cast<Eigen::Index>(i)] =
            (1.0 - t) * x[static_cast<Eigen::Index>(lo)] + t * x[static_cast<Eigen::Index>(lo + 1)];
    }
    out[static_cast<Eigen::Index>(target_dim - 1)] = x[static_cast<Eigen::Index>(n - 1)];
    return out;
}

Stream mix_domains(const Stream& a, const Stream& b, std::size_t target_dim, std::uint64_t seed) {
    require(target_dim >= 1, ErrorKind::Config, "mix: target dimension must be at least 1");
    require(!a.online.empty() && !b.online.empty(), ErrorKind::Input, "mix: both streams must be non-empty");
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);

    Stream out;
    out.batch_size = a.batch_size;
    out.classes = a.classes + b.classes;

    const auto pa = static_cast<std::size_t>(a.pretrain.rows());
    const auto pb = static_cast<std::size_t>(b.pretrain.rows());
    out.pretrain.resize(static_cast<Eigen::Index>(pa + pb), static_cast<Eigen::Index>(target_dim));
    for (std::size_t ia = 0, ib = 0, r = 0; r < pa + pb; ++r) {
        const bool take_a = ia < pa && (ib >= pb || coin(rng));
        const Vector src = take_a ? Vector(a.pretrain.row(static_cast<Eigen::Index>(ia++)).transpose())
                                  : Vector(b.pretrain.row(static_cast<Eigen::Index>(ib++)).transpose());
        out.pretrain.row(static_cast<Eigen::Index>(r)) = stretch(src, target_dim).transpose();
    }

    out.online.reserve(a.online.size() + b.online.size());
    for (std::size_t ia = 0, ib = 0; ia < a.online.size() || ib < b.online.size();) {
        const bool take_a = ia < a.online.size() && (ib >= b.online.size() || coin(rng));
        if (take_a) {
            const auto& ex = a.online[ia++];
            out.online.push_back({stretch(ex.x, target_dim), ex.label});
        } else {
            const auto& ex = b.online[ib++];
            out.online.push_back({stretch(ex.x, target_dim), ex.label + a.classes});
        }
    }
    return out;
}

BanditEnvironment::BanditEnvironment(std::shared_ptr<const Stream> stream) : stream_(std::move(stream)) {
    require(stream_ && !stream_->online.empty(), ErrorKind::Input, "environment: stream has no online examples");
}

const Vector& BanditEnvironment::context() const {
    return stream_->online[round_ % stream_->online.size()].x;
}

double BanditEnvironment::feedback(std::size_t arm) {
    const auto& ex = stream_->online[round_ % stream_->online.size()];
    ++round_;
    return bandit_feedback(arm, ex.label);
}

Stream build_stream(const StreamSpec& spec, std::uint64_t seed) {
    require(spec.batch_size >= 1, ErrorKind::Config, "stream.batch_size: must be positive");
    require(spec.online_count >= 1, ErrorKind::Config, "stream.online_count: must be positive");
    Stream s = load_source(spec.source, spec.pretrain_count, spec.online_count, spec.batch_size, seed);
    scale_min_max(s);
    std::uint64_t layer_no = 0;
    for (const auto& layer : spec.layers) {
        const auto layer_seed = derive_seed(seed, 0x1000 + layer_no++);
        if (const auto* drift = std::get_if<ClusterDriftLayer>(&layer)) {
            if (s.components.empty())
                assign_components(s, spec.drift_clusters, derive_seed(layer_seed, 1));
            const auto schedule =
                drift->schedule.empty() ? ramp_schedule(s.component_count, s.batches()) : drift->schedule;
            s = apply_cluster_drift(std::move(s), schedule, layer_seed);
        } else if (const auto* neg = std::get_if<NegativeInputsLayer>(&layer)) {
            s = apply_negative_inputs(std::move(s), neg->mode, layer_seed);
        } else if (std::holds_alternative<ShuffledLabelsLayer>(layer)) {
            s = apply_shuffled_labels(std::move(s), layer_seed);
        } else {
            const auto& mt = std::get<MultiTaskLayer>(layer);
            require(mt.second != nullptr, ErrorKind::Config, "multitask: second source missing");
            Stream other = load_source(*mt.second, mt.pretrain_count, mt.online_count, spec.batch_size,
                                       derive_seed(layer_seed, 1));
            scale_min_max(other);
            s = mix_domains(s, other, mt.target_dim ? mt.target_dim : s.dimension(), layer_seed);
        }
    }
    return s;
}

} // namespace abacode
