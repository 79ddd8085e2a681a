#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.h"
#include "portraitgen/error.h"
#include "portraitgen/styles.h"

using namespace portraitgen;
using namespace portraitgen::styles;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string descriptor(const std::string& id, const std::string& adapter = "") {
    return nlohmann::json{{"id", id},
                          {"name", "Style " + id},
                          {"adapter", adapter.empty() ? "builtin:" + id : adapter},
                          {"prompt_additions", "soft light"},
                          {"negative_prompt", "blurry"},
                          {"recommended_weight", 0.9}}
        .dump();
}

std::map<fs::path, fs::file_time_type> snapshot(const fs::path& dir) {
    std::map<fs::path, fs::file_time_type> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path()] = e.last_write_time();
    return out;
}

}  // namespace

TEST(Styles, ShippedStylesScan) {
    const auto scan = scan_styles(builtin_styles_dir(), StyleSource::builtin);
    ASSERT_EQ(scan.styles.size(), 3u);
    EXPECT_TRUE(scan.skipped.empty());
    EXPECT_EQ(scan.styles[0].id, "cyberpunk");
    EXPECT_EQ(scan.styles[1].id, "id-photo");
    EXPECT_EQ(scan.styles[2].id, "watercolor");
    for (const auto& s : scan.styles) EXPECT_EQ(s.source, StyleSource::builtin);
}

TEST(Styles, MalformedDescriptorIsSkipped) {
    pgtest::TempDir dir;
    write(dir / "a.json", descriptor("alpha"));
    write(dir / "b.json", descriptor("beta"));
    write(dir / "c.json", descriptor("gamma"));
    write(dir / "d.json", "{\"id\": \"broken\", ");
    write(dir / "notes.txt", "ignored");
    const auto scan = scan_styles(dir.path());
    EXPECT_EQ(scan.styles.size(), 3u);
    ASSERT_EQ(scan.skipped.size(), 1u);
    EXPECT_EQ(scan.skipped[0].path.filename(), "d.json");
    EXPECT_NE(scan.skipped[0].reason.find("malformed"), std::string::npos);
}

TEST(Styles, InvalidFieldsAndDuplicatesAreSkipped) {
    pgtest::TempDir dir;
    write(dir / "1.json", descriptor("Bad Id"));
    write(dir / "2.json", R"({"id":"x","name":"X"})");
    write(dir / "3.json", descriptor("dup"));
    write(dir / "4.json", descriptor("dup"));
    write(dir / "5.json", "[1,2]");
    const auto scan = scan_styles(dir.path());
    ASSERT_EQ(scan.styles.size(), 1u);
    EXPECT_EQ(scan.styles[0].id, "dup");
    EXPECT_EQ(scan.skipped.size(), 4u);
}

TEST(Styles, EmptyAndMissingDirectories) {
    pgtest::TempDir dir;
    EXPECT_TRUE(scan_styles(dir.path()).styles.empty());
    EXPECT_TRUE(scan_styles(dir / "absent").styles.empty());
    EXPECT_FALSE(fs::exists(dir / "absent"));
}

TEST(Styles, ScanIsReadOnlyAndStable) {
    pgtest::TempDir dir;
    write(dir / "a.json", descriptor("alpha"));
    write(dir / "d.json", "nope");
    const auto before = snapshot(dir.path());
    const auto s1 = scan_styles(dir.path());
    const auto s2 = scan_styles(dir.path());
    EXPECT_EQ(snapshot(dir.path()), before);
    ASSERT_EQ(s1.styles.size(), s2.styles.size());
    EXPECT_EQ(to_json(s1.styles[0]), to_json(s2.styles[0]));
}

TEST(Styles, JsonRoundTripAndValidation) {
    const auto spec = style_from_json(nlohmann::json::parse(descriptor("alpha")));
    EXPECT_DOUBLE_EQ(spec.recommended_weight, 0.9);
    EXPECT_EQ(style_from_json(to_json(spec)).id, "alpha");
    auto bad = spec;
    bad.recommended_weight = std::numeric_limits<double>::infinity();
    EXPECT_THROW(bad.validate(), Error);
    bad = spec;
    bad.id = "";
    EXPECT_THROW(bad.validate(), Error);
}

TEST(StyleRegistry, RescanPicksUpNewFilesAndEarlierDirectoryWins) {
    pgtest::TempDir local;
    StyleRegistry reg({{builtin_styles_dir(), StyleSource::builtin}, {local.path(), StyleSource::local}});
    EXPECT_EQ(reg.list().size(), 3u);
    write(local / "mine.json", descriptor("mine"));
    write(local / "shadow.json", descriptor("watercolor"));
    EXPECT_EQ(reg.list().size(), 3u);
    reg.rescan();
    EXPECT_EQ(reg.list().size(), 4u);
    EXPECT_EQ(reg.find("watercolor")->source, StyleSource::builtin);
    EXPECT_EQ(reg.find("mine")->source, StyleSource::local);
    EXPECT_FALSE(reg.find("nope").has_value());
    ASSERT_EQ(reg.skipped().size(), 1u);
    reg.rescan();
    EXPECT_EQ(reg.list().size(), 4u);
}

TEST(StyleRegistry, AddWritesToLocalDirectoryAndRejectsConflicts) {
    pgtest::TempDir local;
    StyleRegistry reg({{builtin_styles_dir(), StyleSource::builtin}, {local.path(), StyleSource::local}});
    auto spec = style_from_json(nlohmann::json::parse(descriptor("noir")));
    const auto added = reg.add(spec);
    EXPECT_EQ(added.source, StyleSource::local);
    EXPECT_TRUE(fs::exists(local / "noir.json"));
    EXPECT_TRUE(reg.find("noir").has_value());
    for (const std::string id : {"noir", "cyberpunk"}) {
        spec.id = id;
        try {
            reg.add(spec);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::conflict);
        }
    }
    StyleRegistry readonly({{builtin_styles_dir(), StyleSource::builtin}});
    spec.id = "fresh";
    EXPECT_THROW(readonly.add(spec), Error);
}

TEST(StyleAdapter, BuiltinIsSynthesizedDeterministically) {
    const auto base = lora::toy_base_model();
    const auto spec = scan_styles(builtin_styles_dir(), StyleSource::builtin).styles[0];
    const auto a = load_style_adapter(spec, base);
    const auto b = load_style_adapter(spec, base);
    EXPECT_EQ(a->id, "style/" + spec.id);
    EXPECT_EQ(lora::encode_adapter(*a), lora::encode_adapter(*b));
    EXPECT_EQ(a->tensors.size(), base.size());
    EXPECT_EQ(a->tensors.begin()->second.rank(), kBuiltinStyleRank);
}

TEST(StyleAdapter, FileAdapterRelativeToDescriptor) {
    pgtest::TempDir dir;
    const auto base = lora::toy_base_model();
    lora::save_adapter(lora::synthetic_adapter("file", base, 2, 5), dir / "w.pglora");
    write(dir / "f.json", descriptor("filed", "w.pglora"));
    write(dir / "g.json", descriptor("missing", "nothere.pglora"));
    const auto scan = scan_styles(dir.path());
    ASSERT_EQ(scan.styles.size(), 2u);
    EXPECT_EQ(load_style_adapter(scan.styles[0], base)->tensors.begin()->second.rank(), 2);
    try {
        load_style_adapter(scan.styles[1], base);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}
