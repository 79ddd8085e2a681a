#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.h"
#include "portraitgen/service/http_api.h"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen's headers.
#include <httplib.h>

using namespace portraitgen;
using namespace portraitgen::service;
using nlohmann::json;

namespace {

const TimePoint kFixed = parse_iso8601("2026-02-03T04:05:06.000Z");

constexpr ErrorCode kAllCodes[] = {
    ErrorCode::invalid_input,   ErrorCode::degenerate_landmarks, ErrorCode::constraint_infeasible,
    ErrorCode::empty_training_set, ErrorCode::no_face,           ErrorCode::fixture_missing,
    ErrorCode::conflict,        ErrorCode::resolution,           ErrorCode::incompatible,
    ErrorCode::invalid_config,  ErrorCode::overlap,              ErrorCode::stage1_failure,
    ErrorCode::out_of_range,    ErrorCode::not_found,            ErrorCode::audio_decode,
    ErrorCode::backend_unavailable, ErrorCode::io,               ErrorCode::internal,
};

httplib::MultipartFormDataItems multipart(const std::vector<fs::path>& pngs) {
    httplib::MultipartFormDataItems items;
    for (const auto& png : pngs)
        for (const auto& f : pgtest::fixture_files(png))
            items.push_back({"files", std::string(f.bytes.begin(), f.bytes.end()), f.filename,
                             "application/octet-stream"});
    return items;
}

}  // namespace

TEST(HttpStatus, ErrorTable) {
    const std::map<ErrorCode, int> expected{
        {ErrorCode::invalid_input, 400},      {ErrorCode::out_of_range, 400},
        {ErrorCode::invalid_config, 400},     {ErrorCode::audio_decode, 400},
        {ErrorCode::not_found, 404},          {ErrorCode::resolution, 404},
        {ErrorCode::conflict, 409},           {ErrorCode::empty_training_set, 422},
        {ErrorCode::constraint_infeasible, 422}, {ErrorCode::overlap, 422},
        {ErrorCode::no_face, 422},            {ErrorCode::incompatible, 422},
        {ErrorCode::degenerate_landmarks, 422}, {ErrorCode::fixture_missing, 422},
        {ErrorCode::stage1_failure, 422},     {ErrorCode::backend_unavailable, 422},
        {ErrorCode::io, 500},                 {ErrorCode::internal, 500},
    };
    for (auto code : kAllCodes) {
        EXPECT_EQ(http_status_for(code), expected.at(code)) << error_code_name(code);
        const auto body = error_body(code, "why");
        EXPECT_EQ(body["error"]["cause"], std::string(error_code_name(code)));
        EXPECT_EQ(body["error"]["message"], "why");
    }
}

TEST(HttpStatus, PortFromEnvironment) {
    ::unsetenv(kPortEnv);
    EXPECT_EQ(port_from_environment(), kDefaultPort);
    ::setenv(kPortEnv, "9123", 1);
    EXPECT_EQ(port_from_environment(), 9123);
    ::unsetenv(kPortEnv);
}

class HttpTest : public ::testing::Test {
protected:
    void SetUp() override {
        ServiceConfig c;
        c.workspace = root.path();
        c.clock = fixed_clock(kFixed);
        service = std::make_unique<Service>(c);
        server = std::make_unique<HttpServer>(*service);
        port = server->bind("127.0.0.1", 0);
        server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(30, 0);
    }
    void TearDown() override {
        server->stop();
        server.reset();
        service.reset();
    }

    json body(const httplib::Result& r) { return json::parse(r->body); }

    void expect_error(const httplib::Result& r, int status, const std::string& cause) {
        ASSERT_TRUE(r) << "no response";
        EXPECT_EQ(r->status, status) << r->body;
        EXPECT_EQ(body(r)["error"]["cause"], cause) << r->body;
    }

    json post(const std::string& path, const json& j, int expect = 202) {
        const auto r = client->Post(path, j.dump(), "application/json");
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, expect) << path << " " << r->body;
        return body(r);
    }

    json wait_job(const std::string& id) {
        service->wait_idle();
        const auto r = client->Get("/jobs/" + id);
        EXPECT_EQ(r->status, 200);
        return body(r);
    }

    std::string train(const std::string& identity = "", int count = 3) {
        auto items = multipart(pgtest::write_training_set(fixtures.path(), count));
        std::string path = "/identities";
        if (!identity.empty()) path += "?identity=" + identity;
        const auto r = client->Post(path, items);
        EXPECT_EQ(r->status, 202) << r->body;
        const auto job = body(r);
        EXPECT_EQ(r->get_header_value("Location"), "/jobs/" + job["id"].get<std::string>());
        // A worker may already have picked the job up when the response is built.
        EXPECT_NE(job["state"], "failed");
        const auto done = wait_job(job["id"]);
        EXPECT_EQ(done["state"], "succeeded") << done.dump();
        const auto results = body(client->Get("/jobs/" + job["id"].get<std::string>() + "/results"));
        return results["manifest"]["identity"]["id"];
    }

    pgtest::TempDir root;
    pgtest::TempDir fixtures;
    std::unique_ptr<Service> service;
    std::unique_ptr<HttpServer> server;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

TEST_F(HttpTest, HealthBackendsAndUnknownRoutes) {
    const auto h = client->Get("/health");
    ASSERT_TRUE(h);
    EXPECT_EQ(h->status, 200);
    EXPECT_EQ(body(h)["status"], "ok");
    const auto b = body(client->Get("/backends"));
    EXPECT_EQ(b["backends"].size(), backends::all_roles().size());
    expect_error(client->Get("/nothing/here"), 404, "not-found");
}

TEST_F(HttpTest, TrainGenerateAndFetchFiles) {
    const auto id = train();
    const auto list = body(client->Get("/identities"));
    ASSERT_EQ(list["identities"].size(), 1u);
    EXPECT_EQ(list["identities"][0]["id"], id);
    const auto profile = body(client->Get("/identities/" + id));
    EXPECT_EQ(profile["trigger_word"], "a handsome man");
    const auto face = profile["faces"][0]["image"].get<std::string>();
    const auto face_res = client->Get("/identities/" + id + "/faces/" + fs::path(face).filename().string());
    EXPECT_EQ(face_res->status, 200);
    EXPECT_EQ(face_res->get_header_value("Content-Type"), "image/png");

    const auto job = post("/generations", {{"identity", id}, {"style", "watercolor"}, {"count", 2}});
    EXPECT_EQ(job["kind"], "generate");
    const auto jid = job["id"].get<std::string>();
    EXPECT_EQ(wait_job(jid)["state"], "succeeded");
    const auto results = body(client->Get("/jobs/" + jid + "/results"));
    EXPECT_EQ(results["manifest"]["fusion"]["face_weight"], 0.25);
    EXPECT_EQ(results["manifest"]["fusion"]["style_weight"], 1.0);
    const auto png = client->Get("/jobs/" + jid + "/files/sample-000.png");
    EXPECT_EQ(png->status, 200);
    EXPECT_EQ(png->body.substr(1, 3), "PNG");
    EXPECT_EQ(client->Get("/jobs/" + jid + "/files/manifest.json")->status, 200);
    expect_error(client->Get("/jobs/" + jid + "/files/job.json"), 404, "not-found");
    expect_error(client->Get("/jobs/" + jid + "/files/..%2Fjob.json"), 404, "not-found");
    EXPECT_GE(body(client->Get("/jobs"))["jobs"].size(), 2u);
}

TEST_F(HttpTest, ErrorsMapToStatuses) {
    const auto id = train("dora", 1);
    expect_error(client->Post("/generations", json{{"identity", "nobody"}, {"style", "watercolor"}}.dump(),
                              "application/json"),
                 404, "not-found");
    expect_error(client->Post("/generations", "{not json", "application/json"), 400, "invalid-input");
    expect_error(client->Post("/generations", "", "application/json"), 400, "invalid-input");
    expect_error(client->Post("/generations", json{{"identity", id}, {"style", "watercolor"}, {"count", "x"}}.dump(),
                              "application/json"),
                 400, "invalid-input");
    expect_error(client->Get("/identities/nobody"), 404, "not-found");
    expect_error(client->Get("/jobs/job-999999"), 404, "not-found");
    expect_error(client->Get("/jobs/job-999999/results"), 404, "not-found");

    // Duplicate identity id.
    auto items = multipart(pgtest::write_training_set(fixtures.path(), 1, 99));
    expect_error(client->Post("/identities?identity=dora", items), 409, "conflict");
    // Multipart without files, JSON without images.
    httplib::MultipartFormDataItems none{{"identity", "x", "", ""}};
    expect_error(client->Post("/identities", none), 422, "empty-training-set");
    expect_error(client->Post("/identities", json{{"images", json::array()}}.dump(), "application/json"), 422,
                 "empty-training-set");
    expect_error(client->Post("/identities", json{{"images", {"/etc/passwd"}}}.dump(), "application/json"), 400,
                 "invalid-input");

    // Talking head option errors.
    const auto assets = body(client->Post("/assets", multipart({pgtest::write_portrait(fixtures.path(), {})})));
    const auto portrait = assets["assets"][0].get<std::string>();
    const json tts{{"kind", "tts"}, {"text", "hello"}};
    expect_error(client->Post("/talkinghead", json{{"portrait", portrait}, {"audio", tts}, {"pose_index", 46}}.dump(),
                              "application/json"),
                 400, "out-of-range");
    expect_error(client->Post("/talkinghead", json{{"portrait", "assets/none.png"}, {"audio", tts}}.dump(),
                              "application/json"),
                 404, "not-found");
    expect_error(client->Post("/tryon", json{{"template", portrait}, {"mask", portrait}, {"refine", true}}.dump(),
                              "application/json"),
                 400, "invalid-input");
    expect_error(client->Post("/inpaint", json{{"identities", {"nobody"}}, {"template", portrait}}.dump(),
                              "application/json"),
                 404, "not-found");
}

TEST_F(HttpTest, FailedJobResultsAreConflict) {
    pgtest::PortraitSpec bare;
    bare.name = "blank";
    bare.faces = {};
    const auto r = client->Post("/identities", multipart({pgtest::write_portrait(fixtures.path(), bare)}));
    ASSERT_EQ(r->status, 202);
    const auto job = wait_job(body(r)["id"]);
    EXPECT_EQ(job["state"], "failed");
    EXPECT_EQ(job["error"]["cause"], "empty-training-set");
    expect_error(client->Get("/jobs/" + job["id"].get<std::string>() + "/results"), 409, "conflict");
}

TEST_F(HttpTest, AssetsAndTalkingHead) {
    const auto r = client->Post("/assets", multipart({pgtest::write_portrait(fixtures.path(), {})}));
    ASSERT_EQ(r->status, 201);
    const auto refs = body(r)["assets"];
    std::string png;
    for (const auto& ref : refs)
        if (ref.get<std::string>().ends_with(".png")) png = ref;
    ASSERT_FALSE(png.empty());
    httplib::MultipartFormDataItems none;
    expect_error(client->Post("/assets", none), 400, "invalid-input");

    const auto job = post("/talkinghead", {{"portrait", png}, {"audio", {{"kind", "tts"}, {"text", "hello"}}}});
    const auto done = wait_job(job["id"]);
    ASSERT_EQ(done["state"], "succeeded");
    const auto m = body(client->Get("/jobs/" + job["id"].get<std::string>() + "/results"))["manifest"];
    EXPECT_DOUBLE_EQ(m["duration"].get<double>(), 0.4);
    const auto wav = client->Get("/jobs/" + job["id"].get<std::string>() + "/files/audio.wav");
    EXPECT_EQ(wav->status, 200);
    EXPECT_EQ(wav->body.substr(0, 4), "RIFF");
}

TEST_F(HttpTest, Styles) {
    auto list = body(client->Get("/styles"));
    EXPECT_EQ(list["styles"].size(), 3u);
    EXPECT_TRUE(list["skipped"].empty());
    const json desc{{"id", "noir"}, {"name", "Noir"}, {"adapter", "builtin:noir"}};
    EXPECT_EQ(post("/styles", desc, 201)["id"], "noir");
    expect_error(client->Post("/styles", desc.dump(), "application/json"), 409, "conflict");
    expect_error(client->Post("/styles", json{{"id", "x"}}.dump(), "application/json"), 400, "invalid-input");
    std::ofstream(service->workspace().styles_dir() / "broken.json") << "{";
    list = body(client->Get("/styles"));
    EXPECT_EQ(list["styles"].size(), 4u);
    ASSERT_EQ(list["skipped"].size(), 1u);
    EXPECT_EQ(list["skipped"][0]["path"], "broken.json");
}
