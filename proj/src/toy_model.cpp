#include "spinegrade/toy_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "spinegrade/error.hpp"
#include "spinegrade/kernels.hpp"
#include "spinegrade/volume_io.hpp"

namespace spinegrade::grading {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw Error(ErrorCode::InvalidConfig, "bad value '" + std::string(v) + "' for " + std::string(key));
    return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view v) {
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw Error(ErrorCode::InvalidConfig, "unterminated list for " + std::string(key));
        v = v.substr(1, v.size() - 2);
    }
    std::vector<int> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_number<int>(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v = v.substr(comma + 1);
    }
    return out;
}

}  // namespace

ToyConfig parse_toy_config(std::string_view text) {
    ToyConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        std::string_view value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key == "epochs")
            c.epochs = parse_number<int>(key, value);
        else if (key == "seed")
            c.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "lr")
            c.lr = parse_number<double>(key, value);
        else if (key == "rho")
            c.rho = parse_number<double>(key, value);
        else if (key == "epsilon")
            c.epsilon = parse_number<double>(key, value);
        else if (key == "hidden_sizes")
            c.hidden_sizes = parse_int_list(key, value);
        else if (key == "batch_size")
            c.batch_size = parse_number<int>(key, value);
        else if (key == "leaky_slope")
            c.leaky_slope = parse_number<double>(key, value);
        else if (key == "weight_decay")
            c.weight_decay = parse_number<double>(key, value);
        else if (key == "reduction") {
            if (value == "sum")
                c.mean_reduction = false;
            else if (value == "mean")
                c.mean_reduction = true;
            else
                throw Error(ErrorCode::InvalidConfig, "reduction must be sum or mean");
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown key '" + std::string(key) + "'");
        }
    }
    if (c.epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (c.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(c.rho > 0.0 && c.rho < 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must lie in (0,1)");
    if (!(c.epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
    if (!(c.weight_decay >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
    if (!(c.lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
    if (!(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0))
        throw Error(ErrorCode::InvalidConfig, "leaky_slope must lie in [0,1)");
    if (c.hidden_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "hidden_sizes must not be empty");
    for (int h : c.hidden_sizes)
        if (h < 1) throw Error(ErrorCode::InvalidConfig, "hidden sizes must be >= 1");
    return c;
}

ToyConfig load_toy_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toy_config(ss.str());
}

std::string format_toy_config(const ToyConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "epochs = " << c.epochs << "\nseed = " << c.seed << "\nlr = " << c.lr << "\nrho = " << c.rho
      << "\nepsilon = " << c.epsilon << "\nhidden_sizes = ";
    for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) o << (i ? "," : "") << c.hidden_sizes[i];
    o << "\nbatch_size = " << c.batch_size << "\nleaky_slope = " << c.leaky_slope
      << "\nweight_decay = " << c.weight_decay
      << "\nreduction = " << (c.mean_reduction ? "mean" : "sum") << "\n";
    return o.str();
}

ToyModel::ToyModel(std::size_t input_dim, std::vector<int> hidden_sizes, std::uint64_t seed, double leaky_slope)
    : input_dim_(input_dim), hidden_(std::move(hidden_sizes)), slope_(leaky_slope) {
    if (input_dim_ == 0) throw Error(ErrorCode::InvalidConfig, "input dimension must be positive");
    for (int h : hidden_)
        if (h < 1) throw Error(ErrorCode::InvalidConfig, "hidden sizes must be >= 1");
    build_layers();
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& L = layers_[l];
        const bool head = l + 1 == layers_.size();
        const double limit = head ? std::sqrt(6.0 / static_cast<double>(L.in + L.out))
                                  : std::sqrt(6.0 / static_cast<double>(L.in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < L.in * L.out; ++i) params_[L.weight_offset + i] = dist(rng);
    }
    mean_.assign(input_dim_, 0.0);
    scale_.assign(input_dim_, 1.0);
}

void ToyModel::build_layers() {
    layers_.clear();
    std::size_t in = input_dim_;
    std::size_t offset = 0;
    auto add = [&](std::size_t out) {
        layers_.push_back({in, out, offset, offset + in * out});
        offset += in * out + out;
        in = out;
    };
    for (int h : hidden_) add(static_cast<std::size_t>(h));
    add(kTasks * kClasses);
    params_.assign(offset, 0.0);
}

void ToyModel::fit_normalizer(std::span<const Sample> samples) {
    mean_.assign(input_dim_, 0.0);
    scale_.assign(input_dim_, 1.0);
    if (samples.empty()) return;
    const double n = static_cast<double>(samples.size());
    for (const Sample& s : samples)
        for (std::size_t i = 0; i < input_dim_; ++i) mean_[i] += s.features[i];
    for (double& m : mean_) m /= n;
    // One shared scale: per-feature scaling would inflate near-constant background cells.
    double ss = 0.0;
    for (const Sample& s : samples)
        for (std::size_t i = 0; i < input_dim_; ++i) ss += (s.features[i] - mean_[i]) * (s.features[i] - mean_[i]);
    const double sd = std::sqrt(ss / (n * static_cast<double>(input_dim_)));
    scale_.assign(input_dim_, sd > 1e-12 ? 1.0 / sd : 1.0);
}

std::vector<double> ToyModel::standardize(std::span<const double> features) const {
    if (features.size() != input_dim_)
        throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(input_dim_) + " features, got " +
                                                  std::to_string(features.size()));
    std::vector<double> x(input_dim_);
    for (std::size_t i = 0; i < input_dim_; ++i) x[i] = (features[i] - mean_[i]) * scale_[i];
    return x;
}

namespace {

// Activations of every layer for one sample: acts[0] is the standardized input, acts[l+1]
// the output of layer l (post-activation for trunk layers, raw logits for the head).
struct Trace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> acts;
};

Trace run(const std::vector<ToyModel::Layer>& layers, std::span<const double> params, std::vector<double> x,
          double slope) {
    const kernels::KernelTable& k = kernels::active();
    Trace tr;
    tr.acts.push_back(std::move(x));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::vector<double>& in = tr.acts.back();
        std::vector<double> z(L.out);
        for (std::size_t o = 0; o < L.out; ++o)
            z[o] = params[L.bias_offset + o] + k.dot(params.data() + L.weight_offset + o * L.in, in.data(), L.in);
        std::vector<double> a = z;
        if (l + 1 < layers.size())
            for (double& v : a) v = v > 0.0 ? v : slope * v;
        tr.pre.push_back(std::move(z));
        tr.acts.push_back(std::move(a));
    }
    return tr;
}

TaskLogits to_logits(const std::vector<double>& out) {
    TaskLogits z;
    for (std::size_t t = 0; t < kTasks; ++t)
        for (std::size_t j = 0; j < kClasses; ++j) z[t][j] = out[t * kClasses + j];
    return z;
}

}  // namespace

TaskLogits ToyModel::logits(std::span<const double> features) const {
    return to_logits(run(layers_, params_, standardize(features), slope_).acts.back());
}

TaskProbabilities ToyModel::forward(std::span<const double> features) const {
    const TaskLogits z = logits(features);
    TaskProbabilities p;
    for (std::size_t t = 0; t < kTasks; ++t) p.p[t] = softmax(z[t]);
    return p;
}

double ToyModel::accumulate_gradient(const Sample& sample, const ClassWeights& weights, std::span<double> grad,
                                     double scale) const {
    if (grad.size() != params_.size()) throw Error(ErrorCode::ShapeMismatch, "gradient buffer size");
    const kernels::KernelTable& k = kernels::active();
    const Trace tr = run(layers_, params_, standardize(sample.features), slope_);
    const TaskLogits z = to_logits(tr.acts.back());
    const double loss = weighted_ce_loss_from_logits(z, sample.targets, weights);
    const TaskLogits dz = loss_gradient(z, sample.targets, weights);

    std::vector<double> delta(kTasks * kClasses);
    for (std::size_t t = 0; t < kTasks; ++t)
        for (std::size_t j = 0; j < kClasses; ++j) delta[t * kClasses + j] = scale * dz[t][j];

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& L = layers_[l];
        const std::vector<double>& in = tr.acts[l];
        std::vector<double> din(l > 0 ? L.in : 0, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            if (delta[o] == 0.0) continue;
            grad[L.bias_offset + o] += delta[o];
            k.axpy(delta[o], in.data(), grad.data() + L.weight_offset + o * L.in, L.in);
            if (l > 0) k.axpy(delta[o], params_.data() + L.weight_offset + o * L.in, din.data(), L.in);
        }
        if (l == 0) break;
        const std::vector<double>& pre = tr.pre[l - 1];
        for (std::size_t i = 0; i < din.size(); ++i) din[i] *= pre[i] > 0.0 ? 1.0 : slope_;
        delta = std::move(din);
    }
    return loss;
}

TrainResult toy_train(std::span<const Sample> samples, const ClassWeights& weights, const ToyConfig& config) {
    std::vector<Sample> data;
    for (const Sample& s : samples) {
        if (!s.targets.any()) continue;
        for (double f : s.features)
            if (!std::isfinite(f)) throw Error(ErrorCode::NonFiniteInput, "non-finite feature");
        data.push_back(s);
    }
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no sample carries a label");
    const std::size_t dim = data.front().features.size();
    for (const Sample& s : data)
        if (s.features.size() != dim) throw Error(ErrorCode::ShapeMismatch, "ragged feature vectors");

    TrainResult result;
    result.model = ToyModel(dim, config.hidden_sizes, config.seed, config.leaky_slope);
    ToyModel& model = result.model;
    model.fit_normalizer(data);

    const AdadeltaParams hp = config.adadelta();
    AdadeltaState state(model.parameters().size());
    std::vector<double> grad(model.parameters().size());
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += batch) {
            const std::size_t e = std::min(order.size(), b + batch);
            const double scale = config.mean_reduction ? 1.0 / static_cast<double>(e - b) : 1.0;
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = b; i < e; ++i)
                epoch_loss += model.accumulate_gradient(data[order[i]], weights, grad, scale);
            if (config.weight_decay > 0.0) {
                // Each batch carries its share of (weight_decay / 2) * |W|^2 per epoch.
                const double wd = config.weight_decay * scale * static_cast<double>(e - b) /
                                  static_cast<double>(data.size());
                const auto params = model.parameters();
                for (const ToyModel::Layer& l : model.layers())
                    for (std::size_t k = 0; k < l.in * l.out; ++k)
                        grad[l.weight_offset + k] += wd * params[l.weight_offset + k];
            }
            adadelta_step(model.parameters(), grad, state, hp);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return result;
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'P', 'N', 'M'};
constexpr std::uint16_t kCheckpointVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
}

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    const std::uint8_t* take(std::size_t n) {
        if (bytes.size() - pos < n) throw Error(ErrorCode::TruncatedPayload, "checkpoint is truncated");
        const std::uint8_t* p = bytes.data() + pos;
        pos += n;
        return p;
    }
    std::uint16_t u16() {
        const auto* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        const auto* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

struct Tensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> values;
};

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, std::vector<std::uint32_t> shape,
                std::span<const double> values) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::uint32_t d : shape) put_u32(out, d);
    for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ToyModel& model) {
    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
    put_u16(out, kCheckpointVersion);
    const auto& layers = model.layers();
    put_u32(out, static_cast<std::uint32_t>(3 + 2 * layers.size()));
    const std::vector<double> slope{model.leaky_slope()};
    put_tensor(out, "leaky_slope", {1}, slope);
    const auto n = static_cast<std::uint32_t>(model.input_dim());
    put_tensor(out, "input.mean", {n}, model.feature_mean());
    put_tensor(out, "input.scale", {n}, model.feature_scale());
    const auto params = model.parameters();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::string prefix = l + 1 == layers.size() ? "head" : "layer" + std::to_string(l);
        put_tensor(out, prefix + ".weight", {static_cast<std::uint32_t>(L.out), static_cast<std::uint32_t>(L.in)},
                   params.subspan(L.weight_offset, L.in * L.out));
        put_tensor(out, prefix + ".bias", {static_cast<std::uint32_t>(L.out)}, params.subspan(L.bias_offset, L.out));
    }
    return out;
}

ToyModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw Error(ErrorCode::BadMagic, "not an SPNM checkpoint");
    Reader r{bytes, 4};
    if (const auto v = r.u16(); v != kCheckpointVersion)
        throw Error(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(v));
    const std::uint32_t count = r.u32();
    std::vector<Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor t;
        const std::uint16_t len = r.u16();
        const auto* name = r.take(len);
        t.name.assign(reinterpret_cast<const char*>(name), len);
        const std::uint32_t rank = r.u32();
        if (rank > 4) throw Error(ErrorCode::BadDimensions, "tensor rank " + std::to_string(rank));
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(r.u32());
            total *= t.shape.back();
        }
        if (total > (bytes.size() - r.pos) / 4) throw Error(ErrorCode::TruncatedPayload, "checkpoint is truncated");
        t.values.resize(total);
        for (float& v : t.values) v = r.f32();
        tensors.push_back(std::move(t));
    }
    if (r.pos != bytes.size()) throw Error(ErrorCode::TrailingData, "bytes after the last tensor");

    auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw Error(ErrorCode::MalformedRow, "checkpoint lacks tensor " + name);
    };
    const Tensor& mean = find("input.mean");
    std::vector<int> hidden;
    for (std::size_t l = 0;; ++l) {
        const std::string name = "layer" + std::to_string(l) + ".bias";
        if (std::none_of(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == name; })) break;
        hidden.push_back(static_cast<int>(find(name).values.size()));
    }
    ToyModel model(mean.values.size(), hidden, 0, find("leaky_slope").values.at(0));
    const auto& layers = model.layers();
    auto params = model.parameters();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::string prefix = l + 1 == layers.size() ? "head" : "layer" + std::to_string(l);
        const Tensor& w = find(prefix + ".weight");
        const Tensor& b = find(prefix + ".bias");
        if (w.values.size() != L.in * L.out || b.values.size() != L.out)
            throw Error(ErrorCode::ShapeMismatch, "tensor " + prefix + " has the wrong size");
        std::copy(w.values.begin(), w.values.end(), params.begin() + static_cast<std::ptrdiff_t>(L.weight_offset));
        std::copy(b.values.begin(), b.values.end(), params.begin() + static_cast<std::ptrdiff_t>(L.bias_offset));
    }
    const Tensor& scale = find("input.scale");
    if (scale.values.size() != mean.values.size()) throw Error(ErrorCode::ShapeMismatch, "input.scale size");
    model.feature_mean().assign(mean.values.begin(), mean.values.end());
    model.feature_scale().assign(scale.values.begin(), scale.values.end());
    return model;
}

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
    io::write_bytes(encode_checkpoint(model), path.string());
}

ToyModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_bytes(path.string())); }

}  // namespace spinegrade::grading
