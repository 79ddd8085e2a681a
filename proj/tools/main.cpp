// portraitgen command line: thin wrappers over the service operations.

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "portraitgen/error.h"
#include "portraitgen/inpaint.h"
#include "portraitgen/lora.h"
#include "portraitgen/service/http_api.h"
#include "portraitgen/service/service.h"

namespace pg = portraitgen;
namespace svc = portraitgen::service;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string workspace;
    std::string backend_manifest;
    std::uint64_t seed = 0;
    std::size_t workers = svc::kDefaultWorkers;
};

svc::ServiceConfig make_config(const Globals& g, bool start_workers = true) {
    svc::ServiceConfig cfg;
    cfg.workspace = g.workspace.empty() ? svc::workspace_from_environment() : fs::path(g.workspace);
    if (!g.backend_manifest.empty()) cfg.backend_manifest = g.backend_manifest;
    cfg.workers = g.workers;
    cfg.start_workers = start_workers;
    cfg.allow_absolute_paths = true;
    return cfg;
}

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

// Waits for the job; a failed job is rethrown as its recorded cause.
json run_job(svc::Service& service, const std::string& job_id) {
    service.wait_idle();
    const auto job = service.jobs().get(job_id);
    if (job->state == svc::JobState::failed) {
        throw pg::Error(pg::parse_error_code(job->error_cause.value_or("internal")), job->error_detail.value_or(""));
    }
    auto results = service.job_results(job_id);
    results["dir"] = service.workspace().job_dir(job_id).string();
    return results;
}

void print_files(const json& results) {
    for (const auto& f : results.at("files")) {
        std::cout << (fs::path(results.at("dir").get<std::string>()) / f.get<std::string>()).string() << "\n";
    }
}

std::vector<std::string> training_inputs(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (const auto& a : args) {
        if (fs::is_directory(a)) {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(a)) {
                if (e.is_regular_file() && pg::is_image_path(e.path())) found.push_back(absolute(e.path().string()));
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(a)) {
            out.push_back(absolute(a));
        } else {
            throw pg::Error(pg::ErrorCode::not_found, "no such file or directory: '" + a + "'");
        }
    }
    return out;
}

svc::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personalized portrait generation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--workspace", g.workspace, "Workspace root (default: $PORTRAITGEN_WORKSPACE)");
    app.add_option("--backend-manifest", g.backend_manifest, "Backend manifest JSON (default: stubs)");
    app.add_option("--seed", g.seed, "Base seed");
    app.add_option("--workers", g.workers, "Job workers")->check(CLI::Range(1, 64));

    // train
    auto* train = app.add_subcommand("train", "Train an identity from photos");
    std::vector<std::string> train_inputs;
    std::string train_id;
    train->add_option("inputs", train_inputs, "Image files or directories")->required();
    train->add_option("--identity", train_id, "Identity id (default: derived from the images)");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate ranked portraits");
    std::string gen_identity, gen_style, gen_prompt;
    int gen_count = 1;
    double face_weight = pg::lora::kDefaultFaceWeight, style_weight = pg::lora::kDefaultStyleWeight;
    std::optional<int> top_k;
    gen->add_option("--identity", gen_identity)->required();
    gen->add_option("--style", gen_style)->required();
    gen->add_option("--count", gen_count)->capture_default_str();
    gen->add_option("--prompt", gen_prompt, "Extra prompt text");
    gen->add_option("--face-weight", face_weight)->capture_default_str();
    gen->add_option("--style-weight", style_weight)->capture_default_str();
    gen->add_option("--top-k", top_k);

    // inpaint
    auto* inp = app.add_subcommand("inpaint", "Put identities into a template photo");
    std::vector<std::string> inp_ids;
    std::string inp_template, inp_prompt;
    double inp_strength = pg::inpaint::kDefaultInpaintStrength;
    bool no_compensation = false;
    inp->add_option("--identity", inp_ids, "Identity per face, left to right")->required();
    inp->add_option("--template", inp_template)->required()->check(CLI::ExistingFile);
    inp->add_option("--strength", inp_strength)->capture_default_str();
    inp->add_option("--prompt", inp_prompt);
    inp->add_flag("--no-compensation", no_compensation, "Skip autoencoder loss compensation (multi-identity)");

    // tryon
    auto* tryon = app.add_subcommand("tryon", "Virtual try-on around a garment mask");
    std::string try_template, try_mask, try_identity, try_prompt;
    bool try_refine = false;
    tryon->add_option("--template", try_template)->required()->check(CLI::ExistingFile);
    tryon->add_option("--mask", try_mask, "Garment mask PNG")->required()->check(CLI::ExistingFile);
    tryon->add_option("--identity", try_identity);
    tryon->add_option("--prompt", try_prompt);
    tryon->add_flag("--refine", try_refine, "Refine the face with the identity");

    // talk
    auto* talk = app.add_subcommand("talk", "Talking-head clip from a portrait");
    std::string talk_portrait, talk_text, talk_audio, talk_voice = "default";
    int resolution = 256, pose_index = 0;
    double expression_scale = 1.0, blink_rate = 1.0;
    bool upscale = false;
    talk->add_option("--portrait", talk_portrait)->required()->check(CLI::ExistingFile);
    auto* text_opt = talk->add_option("--text", talk_text, "Speak this text");
    auto* audio_opt = talk->add_option("--audio", talk_audio, "WAV file")->check(CLI::ExistingFile);
    text_opt->excludes(audio_opt);
    talk->add_option("--voice", talk_voice);
    talk->add_option("--resolution", resolution)->capture_default_str();
    talk->add_option("--pose-index", pose_index)->capture_default_str();
    talk->add_option("--expression-scale", expression_scale)->capture_default_str();
    talk->add_option("--blink-rate", blink_rate)->capture_default_str();
    talk->add_flag("--upscale", upscale);

    // styles
    auto* styles = app.add_subcommand("styles", "List or add styles");
    styles->require_subcommand(1);
    auto* styles_list = styles->add_subcommand("list", "List available styles");
    auto* styles_add = styles->add_subcommand("add", "Register a style descriptor");
    std::string descriptor;
    styles_add->add_option("descriptor", descriptor, "Descriptor JSON file")->required()->check(CLI::ExistingFile);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string host = "127.0.0.1";
    std::optional<int> port;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "Port (default: $PORTRAITGEN_PORT or 8710)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            svc::Service service(make_config(g));
            const auto images = training_inputs(train_inputs);
            json req{{"images", images}};
            if (!train_id.empty()) req["identity"] = train_id;
            const auto results = run_job(service, service.submit_train(req));
            const auto& identity = results.at("manifest").at("identity");
            std::cout << identity.at("id").get<std::string>() << "\t" << identity.at("face_count") << " faces\t"
                      << identity.at("skipped").size() << " skipped\n";
            for (const auto& s : identity.at("skipped")) {
                std::cerr << "skipped input " << s.at("input_index") << ": " << s.at("reason").get<std::string>()
                          << "\n";
            }
        } else if (*gen) {
            svc::Service service(make_config(g));
            json req{{"identity", gen_identity}, {"style", gen_style},       {"prompt_extra", gen_prompt},
                     {"count", gen_count},       {"seed", g.seed},           {"face_weight", face_weight},
                     {"style_weight", style_weight}};
            if (top_k) req["top_k"] = *top_k;
            const auto results = run_job(service, service.submit_generate(req));
            const fs::path dir = results.at("dir").get<std::string>();
            for (const auto& s : results.at("manifest").at("samples")) {
                std::printf("%d\t%.6f\t%s\t%s\n", s.at("rank").get<int>(), s.at("similarity").get<double>(),
                            s.at("digest").get<std::string>().c_str(),
                            (dir / s.at("image").get<std::string>()).string().c_str());
            }
        } else if (*inp) {
            svc::Service service(make_config(g));
            json req{{"identities", inp_ids},   {"template", absolute(inp_template)},
                     {"strength", inp_strength}, {"seed", g.seed},
                     {"prompt_extra", inp_prompt}, {"compensate", !no_compensation}};
            print_files(run_job(service, service.submit_inpaint(req)));
        } else if (*tryon) {
            svc::Service service(make_config(g));
            json req{{"template", absolute(try_template)}, {"mask", absolute(try_mask)}, {"prompt", try_prompt},
                     {"seed", g.seed}, {"refine", try_refine}};
            if (!try_identity.empty()) req["identity"] = try_identity;
            print_files(run_job(service, service.submit_tryon(req)));
        } else if (*talk) {
            svc::Service service(make_config(g));
            json audio = talk_audio.empty() ? json{{"kind", "tts"}, {"text", talk_text}, {"voice", talk_voice}}
                                            : json{{"kind", "file"}, {"ref", absolute(talk_audio)}};
            json req{{"portrait", absolute(talk_portrait)}, {"audio", audio},
                     {"resolution", resolution},          {"pose_index", pose_index},
                     {"expression_scale", expression_scale}, {"blink_rate", blink_rate},
                     {"upscale", upscale}};
            const auto results = run_job(service, service.submit_talkinghead(req));
            const auto& m = results.at("manifest");
            std::cout << m.at("width") << "x" << m.at("height") << "\t" << m.at("fps") << " fps\t"
                      << m.at("frame_count") << " frames\t" << m.at("duration") << " s\n";
            print_files(results);
        } else if (*styles_list) {
            svc::Service service(make_config(g, false));
            for (const auto& s : service.styles().list()) {
                std::cout << s.id << "\t" << pg::styles::to_string(s.source) << "\t" << s.name << "\n";
            }
            for (const auto& s : service.styles().skipped()) {
                std::cerr << "skipped " << s.path.string() << ": " << s.reason << "\n";
            }
        } else if (*styles_add) {
            svc::Service service(make_config(g, false));
            const auto spec = service.add_style(svc::read_json_file(descriptor));
            std::cout << spec.id << "\n";
        } else if (*serve) {
            svc::Service service(make_config(g));
            svc::HttpServer server(service);
            const int bound = server.bind(host, port ? *port : svc::port_from_environment());
            std::cerr << "listening on " << host << ":" << bound << " (workspace " << service.workspace().root().string()
                      << ")\n";
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            server.listen();
            g_server = nullptr;
        }
    } catch (const pg::Error& e) {
        std::cerr << "error: " << e.cause() << ": " << e.detail() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
