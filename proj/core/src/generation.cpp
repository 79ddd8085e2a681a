#include "portraitgen/generation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen::generation {

using backends::BackendRegistry;
using backends::BackendRole;

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr int kToySamples = 64;
constexpr double kIdentitySignal = 0.5;

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void require_unit(std::span<const double> v, const char* what) {
    const double n = l2_norm(v);
    if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
        throw Error(ErrorCode::invalid_input, std::string(what) + " is not unit-normalized");
    }
}

// Regression task standing in for the diffusion training set: the frozen base
// plus a rank-1 shift whose direction is fixed by the normalized faces.
lora::RegressionData identity_task(const lora::Matrix& w, std::uint64_t seed) {
    lora::Matrix u = lora::gaussian_matrix(static_cast<int>(w.rows()), 1, splitmix64(seed));
    lora::Matrix v = lora::gaussian_matrix(static_cast<int>(w.cols()), 1, splitmix64(seed ^ 0x5eedULL));
    u /= u.norm();
    v /= v.norm();
    lora::RegressionData data;
    data.inputs = lora::gaussian_matrix(static_cast<int>(w.cols()), kToySamples, splitmix64(seed ^ 0xda7aULL));
    data.targets = (w + kIdentitySignal * u * v.transpose()) * data.inputs;
    return data;
}

}  // namespace

std::string derive_identity_id(std::span<const Image> images) {
    Digest d;
    d.update("identity/v1");
    for (const auto& image : images) {
        d.update(image_digest(image));
    }
    return "id-" + d.hex().substr(0, 12);
}

std::size_t select_template_face(std::span<const double> quality_scores) {
    if (quality_scores.empty()) {
        throw Error(ErrorCode::invalid_input, "no quality scores to choose a template face from");
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < quality_scores.size(); ++i) {
        if (!std::isfinite(quality_scores[i])) {
            throw Error(ErrorCode::invalid_input, "quality score " + std::to_string(i) + " is not finite");
        }
        if (quality_scores[i] > quality_scores[best]) {
            best = i;
        }
    }
    return best;
}

IdentityProfile train_identity(std::span<const Image> images, const BackendRegistry& registry,
                               const lora::ModelWeights& base, const TrainOptions& options) {
    options.config.validate();
    const auto tagger = registry.get<backends::Tagger>();
    const auto attributes = registry.get<backends::AttributePredictor>();
    const auto quality = registry.get<backends::QualityAssessor>();
    const auto embedder = registry.get<backends::FaceEmbedder>();

    auto pre = face::run_preprocess_chain(images, registry, options.preprocess);

    IdentityProfile profile;
    profile.id = options.identity_id.empty() ? derive_identity_id(images) : options.identity_id;
    profile.config = options.config;
    profile.created = iso8601(options.clock());
    profile.faces = std::move(pre.faces);
    profile.skipped = std::move(pre.skipped);

    const auto denylist = labeling::default_denylist();
    std::vector<labeling::TagSet> tags;
    std::vector<labeling::AttributePrediction> predictions;
    for (const auto& face : profile.faces) {
        const auto raw = tagger->tag(face.image);
        tags.push_back(labeling::prune_identity_tags(labeling::TagSet(std::span<const std::string>(raw)), denylist));
        predictions.push_back(attributes->predict(face.image));
        profile.quality_scores.push_back(quality->score(face.image, face.head_mask));
    }
    profile.trigger = labeling::select_trigger_word(predictions);
    for (const auto& t : tags) {
        profile.captions.push_back(labeling::assemble_caption(profile.trigger, t));
    }

    Digest faces_digest;
    faces_digest.update("face-lora/v1");
    for (const auto& face : profile.faces) {
        faces_digest.update(image_digest(face.image));
    }
    lora::LoraAdapter adapter;
    adapter.id = profile.id + "/face";
    adapter.metadata = {profile.trigger.text(), profile.created, "face"};
    for (const auto& [name, w] : base) {
        const auto seed = faces_digest.value() ^ hash_text(name);
        auto toy = options.toy;
        toy.seed = splitmix64(seed ^ options.toy.seed);
        const auto result = lora::toy_lora_train(w, identity_task(w, seed), options.config, toy);
        adapter.tensors.emplace(name, result.adapter);
        profile.training[name] = {result.initial_loss, result.final_loss};
    }
    adapter.validate();
    profile.adapter = std::make_shared<const lora::LoraAdapter>(std::move(adapter));

    profile.template_index = select_template_face(profile.quality_scores);
    profile.template_embedding = embedder->embed(profile.template_face().image);
    require_unit(profile.template_embedding, "template embedding");
    return profile;
}

std::vector<RankedResult> rank_by_similarity(std::span<const std::vector<double>> candidates,
                                             std::span<const double> reference) {
    require_unit(reference, "reference embedding");
    std::vector<RankedResult> ranked;
    ranked.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].size() != reference.size()) {
            throw Error(ErrorCode::invalid_input, "embedding " + std::to_string(i) + " has dimension " +
                                                      std::to_string(candidates[i].size()) + ", expected " +
                                                      std::to_string(reference.size()));
        }
        require_unit(candidates[i], "candidate embedding");
        const double sim = std::inner_product(candidates[i].begin(), candidates[i].end(), reference.begin(), 0.0);
        ranked.push_back({i, std::clamp(sim, -1.0, 1.0), 0});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedResult& a, const RankedResult& b) { return a.similarity > b.similarity; });
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        ranked[r].rank = r;
    }
    return ranked;
}

void GenerationRequest::validate() const {
    if (identity_id.empty()) {
        throw Error(ErrorCode::invalid_input, "identity is required");
    }
    if (style_id.empty()) {
        throw Error(ErrorCode::invalid_input, "style is required");
    }
    if (count < 1 || count > 64) {
        throw Error(ErrorCode::invalid_input, "count must be in [1, 64]");
    }
    if (!std::isfinite(face_weight) || !std::isfinite(style_weight)) {
        throw Error(ErrorCode::invalid_input, "fusion weights must be finite");
    }
    if (top_k && *top_k == 0) {
        throw Error(ErrorCode::invalid_input, "top_k must be positive");
    }
}

nlohmann::json to_json(const GenerationRequest& r) {
    nlohmann::json j{{"identity", r.identity_id}, {"style", r.style_id},          {"prompt_extra", r.prompt_extra},
                     {"count", r.count},          {"seed", r.seed},               {"face_weight", r.face_weight},
                     {"style_weight", r.style_weight}};
    j["top_k"] = r.top_k ? nlohmann::json(*r.top_k) : nlohmann::json(nullptr);
    return j;
}

GenerationRequest generation_request_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::invalid_input, "generation request must be a JSON object");
    }
    GenerationRequest r;
    try {
        r.identity_id = j.at("identity").get<std::string>();
        r.style_id = j.at("style").get<std::string>();
        r.prompt_extra = j.value("prompt_extra", std::string());
        r.count = j.value("count", 1);
        r.seed = j.value("seed", std::uint64_t{0});
        r.face_weight = j.value("face_weight", lora::kDefaultFaceWeight);
        r.style_weight = j.value("style_weight", lora::kDefaultStyleWeight);
        if (j.contains("top_k") && !j.at("top_k").is_null()) {
            r.top_k = j.at("top_k").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_input, std::string("bad generation request: ") + e.what());
    }
    r.validate();
    return r;
}

std::string assemble_prompt(const labeling::TriggerWord& trigger, const std::string& style_additions,
                            const std::string& extra) {
    std::string prompt = trigger.text();
    for (const auto* part : {&style_additions, &extra}) {
        if (!part->empty()) {
            prompt += ", " + *part;
        }
    }
    return prompt;
}

nlohmann::json backend_ids(const BackendRegistry& registry, std::span<const BackendRole> roles) {
    nlohmann::json j = nlohmann::json::object();
    for (auto role : roles) {
        const auto id = registry.default_id(role);
        j[std::string(backends::role_name(role))] = id ? nlohmann::json(*id) : nlohmann::json(nullptr);
    }
    return j;
}

GenerationResult generate_portraits(const GenerationRequest& request, const IdentityProfile& profile,
                                    const styles::StyleSpec& style,
                                    const std::shared_ptr<const lora::LoraAdapter>& style_adapter,
                                    const lora::ModelWeights& base, const BackendRegistry& registry,
                                    const Clock& clock) {
    request.validate();
    if (!profile.adapter || !style_adapter) {
        throw Error(ErrorCode::invalid_input, "identity and style adapters are required");
    }
    const auto started = clock();
    const auto t2i = registry.get<backends::TextToImage>();
    const auto fusion_backend = registry.get<backends::FaceFusion>();
    const auto embedder = registry.get<backends::FaceEmbedder>();

    lora::AdapterSet adapters{{profile.adapter->id, profile.adapter}, {style_adapter->id, style_adapter}};
    lora::FusionSpec fusion{{{profile.adapter->id, request.face_weight}, {style_adapter->id, request.style_weight}}};
    fusion.validate();
    const auto merged = lora::merge_adapters(base, fusion, adapters);

    GenerationResult result;
    result.prompt = assemble_prompt(profile.trigger, style.prompt_additions, request.prompt_extra);
    const Image& template_image = profile.template_face().image;

    std::vector<GeneratedSample> produced;
    std::vector<std::vector<double>> embeddings;
    for (int i = 0; i < request.count; ++i) {
        const auto index = static_cast<std::size_t>(i);
        const std::uint64_t seed = request.seed + static_cast<std::uint64_t>(i);
        try {
            backends::GenerationParams params{result.prompt, style.negative_prompt, seed, 0, 0};
            const Image raw = t2i->generate(merged, params, nullptr);
            Image fused = fusion_backend->fuse(raw, template_image, nullptr);
            embeddings.push_back(embedder->embed(fused));
            produced.push_back({index, seed, std::move(fused), 0.0, 0});
        } catch (const Error& e) {
            result.failures.push_back({index, seed, std::string(e.cause()), e.detail()});
        }
    }
    if (produced.empty()) {
        const auto& first = result.failures.front();
        throw Error(parse_error_code(first.cause), "every sample failed; first: " + first.detail);
    }

    const auto ranked = rank_by_similarity(embeddings, profile.template_embedding);
    const std::size_t keep = std::min(ranked.size(), request.top_k.value_or(ranked.size()));
    for (std::size_t r = 0; r < keep; ++r) {
        auto sample = std::move(produced[ranked[r].index]);
        sample.similarity = ranked[r].similarity;
        sample.rank = r;
        result.samples.push_back(std::move(sample));
    }

    const auto restored = lora::unmerge_adapters(merged, fusion, adapters);
    double drift = 0.0;
    for (const auto& [name, w] : base) {
        drift = std::max(drift, (restored.at(name) - w).cwiseAbs().maxCoeff());
    }

    static constexpr BackendRole kRoles[] = {BackendRole::text_to_image, BackendRole::face_fusion,
                                             BackendRole::face_embedder};
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : result.samples) {
        samples.push_back({{"rank", s.rank},
                           {"index", s.index},
                           {"seed", s.seed},
                           {"similarity", s.similarity},
                           {"digest", image_digest(s.image)}});
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : result.failures) {
        failures.push_back({{"index", f.index}, {"seed", f.seed}, {"cause", f.cause}, {"detail", f.detail}});
    }
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : fusion.entries) {
        entries.push_back({{"adapter", e.adapter_id}, {"weight", e.weight}});
    }
    const auto finished = clock();
    result.manifest = {
        {"kind", "generate"},
        {"request", to_json(request)},
        {"identity", profile.id},
        {"trigger_word", profile.trigger.text()},
        {"style", {{"id", style.id}, {"adapter", style.adapter}, {"source", styles::to_string(style.source)}}},
        {"prompt", result.prompt},
        {"negative_prompt", style.negative_prompt},
        {"fusion", {{"face_weight", request.face_weight}, {"style_weight", request.style_weight}, {"entries", entries}}},
        {"backends", backend_ids(registry, kRoles)},
        {"merged_weights_digest", lora::weights_digest(merged)},
        {"base_restore_error", drift},
        {"samples", samples},
        {"failures", failures},
        {"timing",
         {{"started", iso8601(started)},
          {"finished", iso8601(finished)},
          {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(finished - started).count()}}},
    };
    return result;
}

}  // namespace portraitgen::generation
