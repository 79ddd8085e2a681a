#include <benchmark/benchmark.h>

#include <random>

#include "portraitgen/face_normalization.h"
#include "portraitgen/image.h"
#include "portraitgen/inpaint.h"
#include "portraitgen/lora.h"

using namespace portraitgen;

namespace {

LandmarkSet5 jittered_template(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto r = Affine2::rotation(0.4, {56.0, 56.0});
    LandmarkSet5 out;
    const auto& t = face::standard_face_template();
    for (std::size_t i = 0; i < 5; ++i) {
        out[i] = r.apply(t[i]);
        out[i].x += noise(rng);
        out[i].y += noise(rng);
    }
    return out;
}

void BM_FitFaceRotation(benchmark::State& state) {
    const auto p = jittered_template(1);
    const auto& t = face::standard_face_template();
    for (auto _ : state) benchmark::DoNotOptimize(face::fit_face_rotation(p, t));
}
BENCHMARK(BM_FitFaceRotation);

void BM_PlanFaceCrop(benchmark::State& state) {
    const CropRect box{300, 200, 420, 340};
    for (auto _ : state) benchmark::DoNotOptimize(face::plan_face_crop(1024, 768, box));
}
BENCHMARK(BM_PlanFaceCrop);

void BM_AlignmentAffine68(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> pos(0, 256);
    LandmarkSet68 src{}, dst{};
    Affine2 a;
    a.m = {1.1, 0.2, 5.0, -0.1, 0.9, 7.0};
    for (std::size_t i = 0; i < 68; ++i) {
        src[i] = {pos(rng), pos(rng)};
        dst[i] = a.apply(src[i]);
    }
    for (auto _ : state) benchmark::DoNotOptimize(inpaint::compute_alignment_affine(src, dst));
}
BENCHMARK(BM_AlignmentAffine68);

void BM_ExpandFaceMask(benchmark::State& state) {
    Mask m = make_mask(512, 512);
    fill_ellipse(m, {200, 180, 312, 330});
    const int r = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(inpaint::expand_face_mask(m, r));
}
BENCHMARK(BM_ExpandFaceMask)->Arg(4)->Arg(16);

void BM_MergeAdapters(benchmark::State& state) {
    const auto base = lora::toy_base_model();
    const int rank = static_cast<int>(state.range(0));
    const lora::AdapterSet set{
        {"face", std::make_shared<const lora::LoraAdapter>(lora::synthetic_adapter("face", base, rank, 1))},
        {"style", std::make_shared<const lora::LoraAdapter>(lora::synthetic_adapter("style", base, rank, 2))}};
    const auto fusion = lora::FusionSpec::defaults("face", "style");
    for (auto _ : state) benchmark::DoNotOptimize(lora::merge_adapters(base, fusion, set));
}
BENCHMARK(BM_MergeAdapters)->Arg(4)->Arg(16);

void BM_ToyTrainEpoch(benchmark::State& state) {
    const auto w = lora::gaussian_matrix(16, 16, 7, 0.25);
    const lora::Matrix delta = lora::gaussian_matrix(16, 1, 8) * lora::gaussian_matrix(1, 16, 9);
    const auto x = lora::gaussian_matrix(16, 64, 10);
    const lora::RegressionData data{x, (w + delta) * x};
    auto config = lora::default_train_config();
    config.rank = 1;
    config.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(lora::toy_lora_train(w, data, config));
}
BENCHMARK(BM_ToyTrainEpoch);

}  // namespace

BENCHMARK_MAIN();
