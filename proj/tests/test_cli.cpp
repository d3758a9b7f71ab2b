#include "support.hpp"

#include "vertegrow/io.hpp"
#include "vertegrow/metrics.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace vertegrow;
using nlohmann::json;
using testing_support::TempDir;

namespace {

struct Run {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with `args` (already shell-quoted where needed), capturing
// stdout and stderr through files in `dir`.
Run cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" VERTEGROW_CLI_PATH "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

// Phantom files written once per test into `dir` under prefix "ex".
void make_phantom(const TempDir& dir, const std::string& extra = "--seed 3 --noise 0") {
    const auto r = cli(dir, "phantom --out " + q(dir / "ex") + " " + extra);
    ASSERT_EQ(r.exit_code, 0) << r.err;
}

json without_timing(json j) {
    j.erase("elapsed_s");
    return j;
}

} // namespace

TEST(Cli, PhantomThenSegmentIsAccurate) {
    TempDir dir("cli");
    make_phantom(dir);
    for (const char* f : {"ex.mhd", "ex.raw", "ex.gt.mhd", "ex.gt.raw", "ex.session.json", "ex.spec.json"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    const auto r = cli(dir, "segment " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") + " --gt " +
                                q(dir / "ex.gt.mhd"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_GE(j.at("metrics").at("dsc").get<double>(), 0.99);
    EXPECT_LE(j.at("iterations").get<int>(), 50);
    EXPECT_TRUE(std::filesystem::exists(dir / "ex.mask.mhd"));
    EXPECT_EQ(json::parse(slurp(dir / "ex.mask.summary.json")), j);

    const Mask seg = load_mask(dir / "ex.mask.mhd");
    EXPECT_EQ(j.at("voxels").get<std::size_t>(), count(seg));
    EXPECT_DOUBLE_EQ(j.at("metrics").at("dsc").get<double>(), dice(seg, load_mask(dir / "ex.gt.mhd")));
}

TEST(Cli, SegmentWithSeedVolumeAndReport) {
    TempDir dir("cli");
    make_phantom(dir);
    const Mask gt = load_mask(dir / "ex.gt.mhd");
    LabelField seeds(gt.dims(), kUnlabeled);
    // Interior voxels of the truth as foreground, the volume border as background.
    const Dims& d = gt.dims();
    for (std::size_t z = 0; z < d.slices; ++z)
        for (std::size_t i = 0; i < d.rows; ++i)
            for (std::size_t j = 0; j < d.cols; ++j) {
                if (i == 0 || j == 0 || i + 1 == d.rows || j + 1 == d.cols) seeds.at(i, j, z) = kBackground;
                else if (gt.at(i, j, z) && i % 4 == 0 && j % 4 == 0) seeds.at(i, j, z) = kForeground;
            }
    save_labels(seeds, dir / "seeds.mhd");
    const auto r = cli(dir, "segment " + q(dir / "ex.mhd") + " --seeds " + q(dir / "seeds.mhd") + " --gt " +
                                q(dir / "ex.gt.mhd") + " --report " + q(dir / "report.csv") + " --out " +
                                q(dir / "seg.raw"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "seg.raw"));
    EXPECT_TRUE(std::filesystem::exists(dir / "seg.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "seg.summary.json"));
    const auto report = lines(slurp(dir / "report.csv"));
    ASSERT_EQ(report.size(), 4u);
    EXPECT_EQ(report[0], "id,algorithm,dsc,jac,hd,runtime_s,annotation_s");
    EXPECT_EQ(report[1].substr(0, 13), "ex,bgrowth3d,");
}

TEST(Cli, MissingSeedsFileNamesThePath) {
    TempDir dir("cli");
    make_phantom(dir);
    const auto r = cli(dir, "segment " + q(dir / "ex.mhd") + " --seeds " + q(dir / "nowhere.mhd"));
    EXPECT_NE(r.exit_code, 0);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("nowhere.mhd"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "ex.mask.mhd"));
}

TEST(Cli, AlgorithmsWriteDistinctSummaries) {
    TempDir dir("cli");
    make_phantom(dir, "--seed 4");
    const std::string base = "segment " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json");
    ASSERT_EQ(cli(dir, base + " --algorithm growcut --out " + q(dir / "gc.mhd")).exit_code, 0);
    ASSERT_EQ(cli(dir, base + " --algorithm bgrowth3d --out " + q(dir / "bg.mhd")).exit_code, 0);
    const auto gc = json::parse(slurp(dir / "gc.summary.json"));
    const auto bg = json::parse(slurp(dir / "bg.summary.json"));
    EXPECT_EQ(gc.at("algorithm"), "growcut");
    EXPECT_EQ(bg.at("algorithm"), "bgrowth3d");
    EXPECT_NE(slurp(dir / "gc.summary.json"), slurp(dir / "bg.summary.json"));
}

TEST(Cli, SweepCoversBothAlgorithmsAndAllDistances) {
    TempDir dir("cli");
    make_phantom(dir, "--seed 5");
    const auto r = cli(dir, "sweep " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") + " --gt " +
                                q(dir / "ex.gt.mhd") + " --distances 0..7 --out " + q(dir / "sweep.csv"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto rows = lines(slurp(dir / "sweep.csv"));
    ASSERT_EQ(rows.size(), 1u + 16);
    EXPECT_EQ(rows[0], "algorithm,slice_distance,kept_slices,annotation_s,runtime_s,iterations,dsc,jac");
    const auto j = json::parse(r.out);
    const auto sel = j.at("selected_distance").get<std::size_t>();
    EXPECT_LE(sel, 7u);
    EXPECT_EQ(j.at("slopes").size(), 7u);
    EXPECT_EQ(j.at("threshold"), -1.0);

    // The d = 0 row reproduces a plain segmentation.
    const auto seg = cli(dir, "segment " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") +
                                  " --gt " + q(dir / "ex.gt.mhd"));
    ASSERT_EQ(seg.exit_code, 0) << seg.err;
    const auto s = json::parse(seg.out);
    std::vector<std::string> cells;
    std::istringstream row(rows[1]);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 8u);
    EXPECT_EQ(cells[0], "bgrowth3d");
    EXPECT_EQ(cells[1], "0");
    EXPECT_EQ(std::stoul(cells[2]), s.at("kept_slices").size());
    EXPECT_EQ(std::stoi(cells[5]), s.at("iterations").get<int>());
    EXPECT_NEAR(std::stod(cells[6]), s.at("metrics").at("dsc").get<double>(), 5e-7);
}

TEST(Cli, MetricsSubcommand) {
    TempDir dir("cli");
    Mask a({4, 4, 2}, 0), b({4, 4, 2}, 0);
    a.at(0, 0, 0) = 1;
    b.at(3, 3, 1) = 1;
    save_mask(a, dir / "a.mhd");
    save_mask(b, dir / "b.mhd");
    save_mask(Mask({4, 4, 2}, 0), dir / "e.mhd");

    auto r = cli(dir, "metrics " + q(dir / "a.mhd") + " " + q(dir / "a.mhd"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out), json::parse(R"({"dsc":1.0,"jac":1.0,"hd":0.0})"));

    r = cli(dir, "metrics " + q(dir / "a.mhd") + " " + q(dir / "b.mhd"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j.at("dsc"), 0.0);
    EXPECT_EQ(j.at("jac"), 0.0);
    EXPECT_DOUBLE_EQ(j.at("hd").get<double>(), std::sqrt(9.0 + 9.0 + 1.0));

    r = cli(dir, "metrics " + q(dir / "a.mhd") + " " + q(dir / "e.mhd"));
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UsageErrorsExitTwo) {
    TempDir dir("cli");
    make_phantom(dir);
    EXPECT_EQ(cli(dir, "").exit_code, 2);
    EXPECT_EQ(cli(dir, "frobnicate").exit_code, 2);
    EXPECT_EQ(cli(dir, "segment").exit_code, 2);
    EXPECT_EQ(cli(dir, "segment " + q(dir / "ex.mhd")).exit_code, 2);
    EXPECT_EQ(cli(dir, "segment " + q(dir / "ex.mhd") + " --seeds a --session b").exit_code, 2);
    EXPECT_EQ(cli(dir, "segment " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") +
                           " --max-iters 0")
                  .exit_code,
              2);
    EXPECT_EQ(cli(dir, "segment " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") +
                           " --report r.csv")
                  .exit_code,
              2);
    EXPECT_EQ(cli(dir, "sweep " + q(dir / "ex.mhd") + " --session " + q(dir / "ex.session.json") + " --gt " +
                           q(dir / "ex.gt.mhd") + " --distances 3")
                  .exit_code,
              2);
    EXPECT_EQ(cli(dir, "phantom --out x --seed-style fancy").exit_code, 2);
    EXPECT_EQ(cli(dir, "--help").exit_code, 0);
}

TEST(Cli, EnvironmentSeedOverridesAndRunsReproduce) {
    TempDir dir("cli");
    auto run_pair = [&](const std::string& env, const std::string& tag) {
        const auto r = cli(dir, "phantom --seed 1 --out " + q(dir / tag), env);
        EXPECT_EQ(r.exit_code, 0) << r.err;
        return slurp(dir / (tag + ".raw"));
    };
    const auto a = run_pair("", "a");
    const auto b = run_pair("", "b");
    const auto c = run_pair("VERTEGROW_SEED=2", "c");
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(cli(dir, "phantom --out " + q(dir / "bad"), "VERTEGROW_SEED=abc").exit_code, 2);

    // Full pipeline byte-identical apart from wall-clock fields.
    for (const char* tag : {"a", "b"}) {
        const auto r = cli(dir, "segment " + q(dir / (std::string(tag) + ".mhd")) + " --session " +
                                    q(dir / (std::string(tag) + ".session.json")) + " --out " +
                                    q(dir / (std::string(tag) + ".seg.mhd")));
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "a.seg.raw"), slurp(dir / "b.seg.raw"));
    EXPECT_EQ(without_timing(json::parse(slurp(dir / "a.seg.summary.json"))),
              without_timing(json::parse(slurp(dir / "b.seg.summary.json"))));
}

TEST(Cli, RawSidecarFormat) {
    TempDir dir("cli");
    make_phantom(dir, "--seed 2 --noise 0 --format raw");
    EXPECT_TRUE(std::filesystem::exists(dir / "ex.raw"));
    EXPECT_TRUE(std::filesystem::exists(dir / "ex.json"));
    EXPECT_FALSE(std::filesystem::exists(dir / "ex.mhd"));
    const auto r = cli(dir, "segment " + q(dir / "ex.raw") + " --session " + q(dir / "ex.session.json") +
                                " --gt " + q(dir / "ex.gt.raw") + " --format raw");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_GE(json::parse(r.out).at("metrics").at("dsc").get<double>(), 0.99);
}
