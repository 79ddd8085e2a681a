#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.h"

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr
};

const char* cli_path() {
#ifdef PORTRAITGEN_CLI_PATH
    return PORTRAITGEN_CLI_PATH;
#else
    return nullptr;
#endif
}

RunResult run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

// "rank\tsim\tdigest\tpath" -> "rank\tsim\tdigest"
std::string without_path(const std::string& line) { return line.substr(0, line.rfind('\t')); }

}  // namespace

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        if (cli_path() == nullptr) GTEST_SKIP() << "CLI not built";
    }
    std::string ws() const { return "--workspace " + root.path().string(); }

    pgtest::TempDir root;
    pgtest::TempDir fixtures;
};

TEST_F(CliTest, TrainAndGenerateAreDeterministic) {
    pgtest::write_training_set(fixtures.path(), 3);
    const auto train = run(ws() + " train " + fixtures.path().string() + " --identity eve");
    ASSERT_EQ(train.exit_code, 0) << train.output;
    EXPECT_EQ(train.output.rfind("eve\t3 faces", 0), 0u) << train.output;

    const std::string gen = ws() + " --seed 11 generate --identity eve --style watercolor --count 3";
    const auto a = run(gen);
    const auto b = run(gen);
    ASSERT_EQ(a.exit_code, 0) << a.output;
    ASSERT_EQ(b.exit_code, 0) << b.output;
    const auto la = lines(a.output), lb = lines(b.output);
    ASSERT_EQ(la.size(), 3u) << a.output;
    ASSERT_EQ(lb.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(without_path(la[i]), without_path(lb[i]));
        EXPECT_EQ(la[i].rfind(std::to_string(i) + "\t", 0), 0u);
        EXPECT_TRUE(std::filesystem::exists(la[i].substr(la[i].rfind('\t') + 1)));
    }
}

TEST_F(CliTest, StylesListAndAdd) {
    const auto list = run(ws() + " styles list");
    ASSERT_EQ(list.exit_code, 0) << list.output;
    const auto rows = lines(list.output);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], "cyberpunk\tbuiltin\tCyberpunk");
    std::ofstream(fixtures / "noir.json") << R"({"id":"noir","name":"Noir","adapter":"builtin:noir"})";
    EXPECT_EQ(run(ws() + " styles add " + (fixtures / "noir.json").string()).exit_code, 0);
    EXPECT_EQ(lines(run(ws() + " styles list").output).size(), 4u);
    const auto again = run(ws() + " styles add " + (fixtures / "noir.json").string());
    EXPECT_NE(again.exit_code, 0);
    EXPECT_NE(again.output.find("conflict"), std::string::npos);
}

TEST_F(CliTest, EmptyTrainingSetFails) {
    const auto r = run(ws() + " train " + fixtures.path().string());
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find("empty-training-set"), std::string::npos) << r.output;
}

TEST_F(CliTest, FacelessTrainingReportsCause) {
    pgtest::PortraitSpec bare;
    bare.faces = {};
    pgtest::write_portrait(fixtures.path(), bare);
    const auto r = run(ws() + " train " + fixtures.path().string());
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find("error: empty-training-set"), std::string::npos) << r.output;
}

TEST_F(CliTest, TalkAndBadPoseIndex) {
    const auto png = pgtest::write_portrait(fixtures.path(), {});
    const auto ok = run(ws() + " talk --portrait " + png.string() + " --text hello");
    EXPECT_EQ(ok.exit_code, 0) << ok.output;
    const auto bad = run(ws() + " talk --portrait " + png.string() + " --text hello --pose-index 46");
    EXPECT_NE(bad.exit_code, 0);
    EXPECT_NE(bad.output.find("out-of-range"), std::string::npos) << bad.output;
}
