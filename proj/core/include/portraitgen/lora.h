#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace portraitgen::lora {

using Matrix = Eigen::MatrixXd;

/// Named base tensors (d_out x d_in) of a model.
using ModelWeights = std::map<std::string, Matrix>;

/// Digest over names, shapes and values; -0.0 and +0.0 hash alike.
std::string weights_digest(const ModelWeights& weights);

/// Low-rank update scale * B * A for one base tensor. A is r x d_in, B is d_out x r.
struct LoraTensor {
    Matrix a;
    Matrix b;
    double scale = 1.0;

    int rank() const { return static_cast<int>(a.rows()); }
    Matrix delta() const { return scale * (b * a); }
};

struct AdapterMetadata {
    std::string trigger_word;
    std::string created;  // ISO-8601 UTC
    std::string kind;     // "face", "style", ...
};

struct LoraAdapter {
    std::string id;
    std::map<std::string, LoraTensor> tensors;
    AdapterMetadata metadata;

    /// Throws incompatible when factor shapes disagree or rank exceeds min(d_in, d_out).
    void validate() const;
};

using AdapterSet = std::map<std::string, std::shared_ptr<const LoraAdapter>>;

inline constexpr double kDefaultFaceWeight = 0.25;
inline constexpr double kDefaultStyleWeight = 1.0;

struct FusionEntry {
    std::string adapter_id;
    double weight = 1.0;

    friend bool operator==(const FusionEntry&, const FusionEntry&) = default;
};

struct FusionSpec {
    std::vector<FusionEntry> entries;

    /// Face adapter at 0.25, style adapter at 1.0.
    static FusionSpec defaults(const std::string& face_adapter, const std::string& style_adapter);
    void validate() const;

    friend bool operator==(const FusionSpec&, const FusionSpec&) = default;
};

/// W' = W + sum_i alpha_i * scale_i * B_i A_i on a copy; tensors no adapter touches are copied bit-identically.
ModelWeights merge_adapters(const ModelWeights& base, const FusionSpec& fusion, const AdapterSet& adapters);

/// Inverse of merge_adapters for the same fusion and adapters.
ModelWeights unmerge_adapters(const ModelWeights& merged, const FusionSpec& fusion, const AdapterSet& adapters);

enum class LrSchedule { constant, cosine, cosine_with_restarts };

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& text);

struct TrainConfig {
    int rank = 32;
    double learning_rate = 1e-4;
    LrSchedule schedule = LrSchedule::cosine_with_restarts;
    int epochs = 20;
    bool use_8bit_adamw = true;
    int restart_cycles = 1;

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

TrainConfig default_train_config();

/// Learning rate at `step` of `total_steps` under the configured schedule.
/// Cosine with hard restarts: lr * 0.5 * (1 + cos(pi * ((cycles * progress) mod 1))).
double scheduled_learning_rate(LrSchedule schedule, double base_lr, int restart_cycles, int step, int total_steps);

/// Column-per-sample regression pairs: inputs d_in x n, targets d_out x n.
struct RegressionData {
    Matrix inputs;
    Matrix targets;
};

/// Mean squared error 1/(2n) * ||(W + scale*B*A) X - Y||_F^2.
double lora_loss(const Matrix& base, const LoraTensor& adapter, const RegressionData& data);

struct LoraGradients {
    Matrix a;
    Matrix b;
};

LoraGradients lora_gradients(const Matrix& base, const LoraTensor& adapter, const RegressionData& data);

/// Desk-scale stand-ins for the diffusion trainer's optimizer settings; the
/// configured learning rate is tuned for full-size models and does not move
/// a handful of parameters meaningfully in a few hundred steps.
struct ToyTrainOptions {
    double learning_rate = 0.02;
    int steps_per_epoch = 25;
    std::uint64_t seed = 0;
    double lora_scale = 1.0;
};

struct ToyTrainResult {
    LoraTensor adapter;
    std::vector<double> losses;  // loss before each step, then the final loss
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Trains only A and B against a frozen base with full-precision AdamW and the
/// configured schedule. B starts at zero so the first forward pass equals the base.
ToyTrainResult toy_lora_train(const Matrix& base, const RegressionData& data, const TrainConfig& config,
                              const ToyTrainOptions& options = {});

/// Deterministic Gaussian matrix (SplitMix64 + Box-Muller).
Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed, double stddev = 1.0);

/// Small fixed set of named base tensors standing in for the diffusion model's attention projections.
ModelWeights toy_base_model(std::uint64_t seed = 20230901);

/// Deterministic adapter touching every tensor of `base`.
LoraAdapter synthetic_adapter(const std::string& id, const ModelWeights& base, int rank, std::uint64_t seed,
                              double stddev = 0.05);

std::vector<std::uint8_t> encode_adapter(const LoraAdapter& adapter);
LoraAdapter decode_adapter(std::span<const std::uint8_t> bytes);
void save_adapter(const LoraAdapter& adapter, const std::filesystem::path& path);
LoraAdapter load_adapter(const std::filesystem::path& path);

}  // namespace portraitgen::lora
