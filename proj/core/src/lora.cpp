#include "portraitgen/lora.h"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen::lora {

std::string weights_digest(const ModelWeights& weights) {
    Digest d;
    for (const auto& [name, w] : weights) {
        d.update(name);
        d.update_value(static_cast<std::int64_t>(w.rows())).update_value(static_cast<std::int64_t>(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double v = w(r, c);
                d.update_value(v == 0.0 ? 0.0 : v);
            }
        }
    }
    return d.hex();
}

void LoraAdapter::validate() const {
    for (const auto& [name, t] : tensors) {
        if (t.a.rows() == 0 || t.a.rows() != t.b.cols()) {
            throw Error(ErrorCode::incompatible, "adapter " + id + " tensor " + name + " has mismatched rank");
        }
        if (t.rank() > std::min(t.a.cols(), t.b.rows())) {
            throw Error(ErrorCode::incompatible, "adapter " + id + " tensor " + name + " rank exceeds min(d_in, d_out)");
        }
        if (!std::isfinite(t.scale)) {
            throw Error(ErrorCode::incompatible, "adapter " + id + " tensor " + name + " has non-finite scale");
        }
    }
}

FusionSpec FusionSpec::defaults(const std::string& face_adapter, const std::string& style_adapter) {
    return {{{face_adapter, kDefaultFaceWeight}, {style_adapter, kDefaultStyleWeight}}};
}

void FusionSpec::validate() const {
    for (const auto& e : entries) {
        if (!std::isfinite(e.weight)) {
            throw Error(ErrorCode::invalid_input, "fusion weight for " + e.adapter_id + " is not finite");
        }
    }
}

namespace {

const LoraAdapter& lookup(const AdapterSet& adapters, const std::string& id) {
    const auto it = adapters.find(id);
    if (it == adapters.end() || !it->second) {
        throw Error(ErrorCode::not_found, "adapter " + id + " is not loaded");
    }
    return *it->second;
}

void check_shapes(const ModelWeights& base, const LoraAdapter& adapter) {
    for (const auto& [name, t] : adapter.tensors) {
        const auto it = base.find(name);
        if (it == base.end()) {
            throw Error(ErrorCode::incompatible, "adapter " + adapter.id + " targets unknown tensor " + name);
        }
        if (t.a.cols() != it->second.cols() || t.b.rows() != it->second.rows() || t.a.rows() != t.b.cols()) {
            throw Error(ErrorCode::incompatible, "adapter " + adapter.id + " shape mismatch on tensor " + name);
        }
    }
}

ModelWeights apply(const ModelWeights& weights, const FusionSpec& fusion, const AdapterSet& adapters, double sign) {
    fusion.validate();
    for (const auto& e : fusion.entries) {
        check_shapes(weights, lookup(adapters, e.adapter_id));
    }
    ModelWeights out = weights;
    auto step = [&](const FusionEntry& e) {
        const auto& adapter = lookup(adapters, e.adapter_id);
        for (const auto& [name, t] : adapter.tensors) {
            out[name] += (sign * e.weight) * t.delta();
        }
    };
    if (sign > 0) {
        for (const auto& e : fusion.entries) {
            step(e);
        }
    } else {
        for (auto it = fusion.entries.rbegin(); it != fusion.entries.rend(); ++it) {
            step(*it);
        }
    }
    return out;
}

}  // namespace

ModelWeights merge_adapters(const ModelWeights& base, const FusionSpec& fusion, const AdapterSet& adapters) {
    return apply(base, fusion, adapters, 1.0);
}

ModelWeights unmerge_adapters(const ModelWeights& merged, const FusionSpec& fusion, const AdapterSet& adapters) {
    return apply(merged, fusion, adapters, -1.0);
}

std::string to_string(LrSchedule schedule) {
    switch (schedule) {
        case LrSchedule::constant: return "constant";
        case LrSchedule::cosine: return "cosine";
        case LrSchedule::cosine_with_restarts: return "cosine_with_restarts";
    }
    return "constant";
}

LrSchedule parse_lr_schedule(const std::string& text) {
    if (text == "constant") return LrSchedule::constant;
    if (text == "cosine") return LrSchedule::cosine;
    if (text == "cosine_with_restarts") return LrSchedule::cosine_with_restarts;
    throw Error(ErrorCode::invalid_config, "unknown learning-rate schedule " + text);
}

void TrainConfig::validate() const {
    if (rank <= 0 || !(learning_rate > 0.0) || epochs <= 0 || restart_cycles <= 0) {
        throw Error(ErrorCode::invalid_config, "rank, learning rate, epochs and restart cycles must be positive");
    }
}

TrainConfig default_train_config() { return TrainConfig{}; }

double scheduled_learning_rate(LrSchedule schedule, double base_lr, int restart_cycles, int step, int total_steps) {
    if (schedule == LrSchedule::constant || total_steps <= 0) {
        return base_lr;
    }
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    if (progress >= 1.0) {
        return 0.0;
    }
    const double cycles = schedule == LrSchedule::cosine ? 1.0 : static_cast<double>(restart_cycles);
    const double phase = std::fmod(cycles * progress, 1.0);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

namespace {

Matrix residual(const Matrix& base, const LoraTensor& adapter, const RegressionData& data) {
    return (base + adapter.delta()) * data.inputs - data.targets;
}

void check_data(const Matrix& base, const RegressionData& data) {
    if (data.inputs.cols() == 0 || data.inputs.cols() != data.targets.cols()) {
        throw Error(ErrorCode::invalid_input, "regression data must be non-empty with matching sample counts");
    }
    if (data.inputs.rows() != base.cols() || data.targets.rows() != base.rows()) {
        throw Error(ErrorCode::incompatible, "regression data does not match the base tensor shape");
    }
}

}  // namespace

double lora_loss(const Matrix& base, const LoraTensor& adapter, const RegressionData& data) {
    check_data(base, data);
    const auto n = static_cast<double>(data.inputs.cols());
    return residual(base, adapter, data).squaredNorm() / (2.0 * n);
}

LoraGradients lora_gradients(const Matrix& base, const LoraTensor& adapter, const RegressionData& data) {
    check_data(base, data);
    const auto n = static_cast<double>(data.inputs.cols());
    const Matrix g = residual(base, adapter, data) * data.inputs.transpose() / n;
    return {adapter.scale * adapter.b.transpose() * g, adapter.scale * g * adapter.a.transpose()};
}

Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed, double stddev) {
    Matrix m(rows, cols);
    std::uint64_t state = splitmix64(seed);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            state = splitmix64(state);
            const double u1 = std::max(unit_interval(state), 1e-300);
            state = splitmix64(state);
            const double u2 = unit_interval(state);
            m(r, c) = stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }
    }
    return m;
}

ToyTrainResult toy_lora_train(const Matrix& base, const RegressionData& data, const TrainConfig& config,
                              const ToyTrainOptions& options) {
    config.validate();
    check_data(base, data);
    if (config.rank > std::min(base.rows(), base.cols())) {
        throw Error(ErrorCode::invalid_config, "LoRA rank exceeds min(d_in, d_out)");
    }
    if (options.steps_per_epoch <= 0 || !(options.learning_rate > 0.0)) {
        throw Error(ErrorCode::invalid_config, "toy trainer needs positive steps and learning rate");
    }

    ToyTrainResult result;
    auto& adapter = result.adapter;
    adapter.scale = options.lora_scale;
    adapter.a = gaussian_matrix(config.rank, static_cast<int>(base.cols()), options.seed,
                                1.0 / std::sqrt(static_cast<double>(base.cols())));
    adapter.b = Matrix::Zero(base.rows(), config.rank);

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    Matrix ma = Matrix::Zero(adapter.a.rows(), adapter.a.cols());
    Matrix va = ma;
    Matrix mb = Matrix::Zero(adapter.b.rows(), adapter.b.cols());
    Matrix vb = mb;

    const int total = config.epochs * options.steps_per_epoch;
    for (int step = 0; step < total; ++step) {
        result.losses.push_back(lora_loss(base, adapter, data));
        const auto grads = lora_gradients(base, adapter, data);
        const double lr =
            scheduled_learning_rate(config.schedule, options.learning_rate, config.restart_cycles, step, total);
        const double c1 = 1.0 - std::pow(kBeta1, step + 1);
        const double c2 = 1.0 - std::pow(kBeta2, step + 1);
        auto adam = [&](Matrix& param, Matrix& m, Matrix& v, const Matrix& g) {
            m = kBeta1 * m + (1.0 - kBeta1) * g;
            v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
            param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
        };
        adam(adapter.a, ma, va, grads.a);
        adam(adapter.b, mb, vb, grads.b);
    }
    result.final_loss = lora_loss(base, adapter, data);
    result.losses.push_back(result.final_loss);
    result.initial_loss = result.losses.front();
    return result;
}

ModelWeights toy_base_model(std::uint64_t seed) {
    ModelWeights w;
    const char* names[] = {"unet.mid.attn1.to_q", "unet.mid.attn1.to_k", "unet.mid.attn1.to_v",
                           "unet.mid.attn2.to_out"};
    std::uint64_t s = seed;
    for (const char* name : names) {
        s = splitmix64(s);
        w[name] = gaussian_matrix(32, 32, s, 1.0 / std::sqrt(32.0));
    }
    return w;
}

LoraAdapter synthetic_adapter(const std::string& id, const ModelWeights& base, int rank, std::uint64_t seed,
                              double stddev) {
    LoraAdapter adapter;
    adapter.id = id;
    std::uint64_t s = splitmix64(seed ^ hash_text(id));
    for (const auto& [name, w] : base) {
        LoraTensor t;
        s = splitmix64(s);
        t.a = gaussian_matrix(rank, static_cast<int>(w.cols()), s, stddev);
        s = splitmix64(s);
        t.b = gaussian_matrix(static_cast<int>(w.rows()), rank, s, stddev);
        adapter.tensors.emplace(name, std::move(t));
    }
    adapter.validate();
    return adapter;
}

namespace {

constexpr std::uint8_t kMagic[8] = {'P', 'G', 'L', 'O', 'R', 'A', 0x0D, 0x0A};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
    void need(std::size_t n) const {
        if (pos + n > bytes.size()) {
            throw Error(ErrorCode::invalid_input, "adapter file truncated");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_adapter(const LoraAdapter& adapter) {
    adapter.validate();
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    const nlohmann::json meta = {{"id", adapter.id},
                                 {"trigger_word", adapter.metadata.trigger_word},
                                 {"created", adapter.metadata.created},
                                 {"kind", adapter.metadata.kind}};
    w.str(meta.dump());
    w.u32(static_cast<std::uint32_t>(adapter.tensors.size()));
    for (const auto& [name, t] : adapter.tensors) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        w.u32(static_cast<std::uint32_t>(t.b.rows()));
        w.u32(static_cast<std::uint32_t>(t.a.cols()));
        w.f64(t.scale);
        for (Eigen::Index r = 0; r < t.a.rows(); ++r)
            for (Eigen::Index c = 0; c < t.a.cols(); ++c) w.f64(t.a(r, c));
        for (Eigen::Index r = 0; r < t.b.rows(); ++r)
            for (Eigen::Index c = 0; c < t.b.cols(); ++c) w.f64(t.b(r, c));
    }
    w.u64(Digest().update(w.bytes).value());
    return std::move(w.bytes);
}

LoraAdapter decode_adapter(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::invalid_input, "not an adapter file");
    }
    const auto body = bytes.first(bytes.size() - 8);
    Reader tail(bytes.last(8));
    if (tail.u64() != Digest().update(body).value()) {
        throw Error(ErrorCode::invalid_input, "adapter checksum mismatch");
    }
    Reader r(body);
    r.pos = sizeof(kMagic);
    if (const auto version = r.u32(); version != kVersion) {
        throw Error(ErrorCode::invalid_input, "unsupported adapter version " + std::to_string(version));
    }
    LoraAdapter adapter;
    const auto meta = nlohmann::json::parse(r.str());
    adapter.id = meta.value("id", "");
    adapter.metadata.trigger_word = meta.value("trigger_word", "");
    adapter.metadata.created = meta.value("created", "");
    adapter.metadata.kind = meta.value("kind", "");
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = r.str();
        const auto rank = static_cast<Eigen::Index>(r.u32());
        const auto d_out = static_cast<Eigen::Index>(r.u32());
        const auto d_in = static_cast<Eigen::Index>(r.u32());
        LoraTensor t;
        t.scale = r.f64();
        r.need(static_cast<std::size_t>((rank * d_in + d_out * rank) * 8));
        t.a.resize(rank, d_in);
        for (Eigen::Index y = 0; y < rank; ++y)
            for (Eigen::Index x = 0; x < d_in; ++x) t.a(y, x) = r.f64();
        t.b.resize(d_out, rank);
        for (Eigen::Index y = 0; y < d_out; ++y)
            for (Eigen::Index x = 0; x < rank; ++x) t.b(y, x) = r.f64();
        adapter.tensors.emplace(std::move(name), std::move(t));
    }
    if (r.pos != body.size()) {
        throw Error(ErrorCode::invalid_input, "trailing bytes in adapter file");
    }
    adapter.validate();
    return adapter;
}

void save_adapter(const LoraAdapter& adapter, const std::filesystem::path& path) {
    const auto bytes = encode_adapter(adapter);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LoraAdapter load_adapter(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot open adapter " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_adapter(bytes);
}

}  // namespace portraitgen::lora
