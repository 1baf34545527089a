#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "gridnav/mapper.hpp"
#include "gridnav/nn/weights_io.hpp"
#include "test_util.hpp"

using namespace gridnav;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string("'") + GRIDNAV_CLI + "' " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("gen-maps --out /tmp/x").code, 1);  // --seed missing
    const auto r = run("detect --weights w.bin --tau 3");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("usage error"), std::string::npos);
}

TEST(Cli, RuntimeErrorsExitTwo) {
    test::TempDir dir;
    const auto r = run("train --dataset " + (dir / "missing.jsonl").string() + " --out " + (dir / "w.bin").string() + " --seed 1");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.out.rfind("error: ", 0), 0u) << r.out;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST(Cli, HelpListsDefaults) {
    const auto top = run("--help");
    EXPECT_EQ(top.code, 0);
    for (const char* sub : {"gen-maps", "gen-data", "train", "detect", "run", "eval-frames", "eval-tracked", "render"})
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    const auto tr = run("train --help");
    EXPECT_EQ(tr.code, 0);
    for (const char* s : {"--epochs", "--batch-size", "60", "0.61", "0.14", "0.25", "combined"})
        EXPECT_NE(tr.out.find(s), std::string::npos) << s;
    const auto rn = run("run --help");
    for (const char* s : {"--radius", "--lifetime", "30", "--tau", "0.5"}) EXPECT_NE(rn.out.find(s), std::string::npos) << s;
    const auto et = run("eval-tracked --help");
    EXPECT_NE(et.out.find("--repetitions"), std::string::npos);
    EXPECT_NE(et.out.find("30"), std::string::npos);
}

TEST(Cli, DetectPrintsEmptyArray) {
    test::TempDir dir;
    nn::DetectorNet<float> net(checks::tiny_spec(), 3);
    nn::save_weights(net, dir / "w.bin", {{"variant", "combined"}});
    const LocalMap view = make_local_map(16, kWindowExtent, Pose(), kFreePixel);
    save_local_map(dir / "laser.pgm", view);
    save_local_map(dir / "gmap.pgm", view);
    const std::string base = "detect --weights " + (dir / "w.bin").string() + " --laser " + (dir / "laser.pgm").string() +
                             " --gmap " + (dir / "gmap.pgm").string();
    const auto r = run(base + " --tau 1");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out, "[]\n");
    const auto all = run(base + " --tau 0 --out " + (dir / "d.json").string());
    EXPECT_EQ(all.code, 0) << all.out;
    EXPECT_EQ(nlohmann::json::parse(all.out).size(), 25u);
    EXPECT_EQ(nlohmann::json::parse(read_text(dir / "d.json")), nlohmann::json::parse(all.out));
}

TEST(Cli, OracleRunNarrates) {
    test::TempDir dir;
    const auto g = run("gen-maps --out " + dir.path().string() + " --seed 4 --count 3 --validation 1 --test 1 --test-nodes 3x2");
    ASSERT_EQ(g.code, 0) << g.out;
    const auto suite = nlohmann::json::parse(read_text(dir / "suite.json"));
    const auto& m = suite.at("maps").at(2);
    EXPECT_EQ(m.at("split"), "test");
    const std::string args = "run --oracle --seed 1 --map " + (dir / m.at("image").get<std::string>()).string() + " --labels " +
                             (dir / m.at("labels").get<std::string>()).string() + " --trajectory " +
                             (dir / m.at("trajectory").get<std::string>()).string() + " --log-dir " + (dir / "logs").string();
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find(" on the "), std::string::npos);
    EXPECT_EQ(r.out.rfind("[", 0), 0u);
    for (const char* f : {"detections.jsonl", "tracker.jsonl", "utterances.jsonl", "semantic_map.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / "logs" / f)) << f;
    EXPECT_EQ(run(args).out, r.out);
}
