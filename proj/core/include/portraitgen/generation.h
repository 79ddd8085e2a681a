#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/backends.h"
#include "portraitgen/clock.h"
#include "portraitgen/labeling.h"
#include "portraitgen/lora.h"
#include "portraitgen/preprocess.h"
#include "portraitgen/styles.h"

namespace portraitgen::generation {

struct TensorTrainingSummary {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

struct IdentityProfile {
    std::string id;
    std::shared_ptr<const lora::LoraAdapter> adapter;
    labeling::TriggerWord trigger{labeling::Gender::male, labeling::AgeGroup::adult};
    std::size_t template_index = 0;          // into faces
    std::vector<face::FaceRecord> faces;
    std::vector<face::SkipRecord> skipped;
    std::vector<double> quality_scores;      // parallel to faces
    std::vector<std::string> captions;       // parallel to faces
    std::vector<double> template_embedding;  // unit norm
    std::map<std::string, TensorTrainingSummary> training;
    lora::TrainConfig config;
    std::string created;

    const face::FaceRecord& template_face() const { return faces.at(template_index); }
};

struct TrainOptions {
    lora::TrainConfig config = lora::default_train_config();
    lora::ToyTrainOptions toy;
    face::PreprocessOptions preprocess;
    /// Empty: derived from the upload digests ("id-" + 12 hex digits).
    std::string identity_id;
    Clock clock = system_clock();
};

/// Identity id derived from the uploaded image contents.
std::string derive_identity_id(std::span<const Image> images);

/// Preprocess -> captions and trigger word -> face-adapter training -> template
/// face selection -> template embedding. The face adapter is fitted by the toy
/// trainer against `base` on a regression task seeded by the normalized faces.
IdentityProfile train_identity(std::span<const Image> images, const backends::BackendRegistry& registry,
                               const lora::ModelWeights& base, const TrainOptions& options = {});

/// Argmax of the quality scores; ties go to the lowest index. Throws invalid-input when empty.
std::size_t select_template_face(std::span<const double> quality_scores);

struct RankedResult {
    std::size_t index = 0;  // position in the candidate list
    double similarity = 0.0;
    std::size_t rank = 0;
};

/// Cosine similarity (dot product of unit vectors), stable descending sort.
/// Throws invalid-input on dimension mismatch or vectors off unit norm by more than 1e-6.
std::vector<RankedResult> rank_by_similarity(std::span<const std::vector<double>> candidates,
                                             std::span<const double> reference);

struct GenerationRequest {
    std::string identity_id;
    std::string style_id;
    std::string prompt_extra;
    int count = 1;
    std::uint64_t seed = 0;
    double face_weight = lora::kDefaultFaceWeight;
    double style_weight = lora::kDefaultStyleWeight;
    /// Keep only the best k results; all when unset.
    std::optional<std::size_t> top_k;

    void validate() const;
};

nlohmann::json to_json(const GenerationRequest& request);
GenerationRequest generation_request_from_json(const nlohmann::json& j);

struct GeneratedSample {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    Image image;
    double similarity = 0.0;
    std::size_t rank = 0;
};

struct SampleFailure {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string cause;
    std::string detail;
};

struct GenerationResult {
    std::vector<GeneratedSample> samples;  // rank order
    std::vector<SampleFailure> failures;
    std::string prompt;
    nlohmann::json manifest;
};

/// "<trigger>, <style additions>, <extra>", empty parts omitted.
std::string assemble_prompt(const labeling::TriggerWord& trigger, const std::string& style_additions,
                            const std::string& extra);

/// Fuses the face and style adapters onto a private copy of `base`, generates
/// `count` images with seeds seed..seed+count-1, refines each with face fusion
/// against the template face, and ranks them by embedding similarity. A failing
/// sample is recorded and skipped; the call fails only when every sample fails.
GenerationResult generate_portraits(const GenerationRequest& request, const IdentityProfile& profile,
                                    const styles::StyleSpec& style,
                                    const std::shared_ptr<const lora::LoraAdapter>& style_adapter,
                                    const lora::ModelWeights& base, const backends::BackendRegistry& registry,
                                    const Clock& clock = system_clock());

/// Default backend ids for the given roles, for manifests.
nlohmann::json backend_ids(const backends::BackendRegistry& registry, std::span<const backends::BackendRole> roles);

}  // namespace portraitgen::generation
