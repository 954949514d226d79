#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    static fs::path dir() {
        static fs::path d = [] {
            auto p = fs::temp_directory_path() / "dxr_cli_test";
            fs::remove_all(p);
            fs::create_directories(p);
            return p;
        }();
        return d;
    }

    static RunResult run(const std::string& args) {
        const fs::path out = dir() / "stdout.txt";
        const fs::path err = dir() / "stderr.txt";
        const std::string cmd = std::string(DXR_CLI_PATH) + " " + args + " >" + out.string() +
                                " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    // three quick synthetic traces and an experiment spec around them
    static fs::path make_spec(std::uint64_t seed) {
        const auto base = dir();
        for (const auto& [name, rate] : {std::pair{"alpha", 60.0}, {"beta", 30.0}}) {
            if (fs::exists(base / (std::string(name) + ".csv"))) continue;
            std::ostringstream cmd;
            cmd << "synth --profile-file " << (base / (std::string(name) + ".profile.json")).string()
                << " --out " << (base / name).string();
            nlohmann::json profile{{"name", name},
                                   {"frame_rate", rate},
                                   {"packets_per_frame", {12, 12}},
                                   {"frame_packet_length", {1200, 1200}},
                                   {"intra_frame_iat", {1e-4, 1e-4}},
                                   {"control_packet_rate", 40.0},
                                   {"control_packet_length", {80, 160}},
                                   {"uplink_fraction", 0.5},
                                   {"duration", 10.0},
                                   {"seed", seed + (name[0] == 'a' ? 1 : 2)}};
            std::ofstream p(base / (std::string(name) + ".profile.json"));
            p << profile.dump();
            p.close();
            const auto r = run(cmd.str());
            EXPECT_EQ(r.exit_code, 0) << r.err;
        }
        const fs::path spec_path = base / "exp.json";
        nlohmann::json spec{
            {"name", "cli-exp"},
            {"train_traces",
             {{{"path", (base / "alpha.csv").string()}, {"label", "Alpha"}},
              {{"path", (base / "beta.csv").string()}, {"label", "Beta"}}}},
            {"test_holdout_fraction", 0.4},
            {"output_dir", (base / "out").string()},
            {"a2r", {{"trees", 40}, {"seed", 7}}}};
        std::ofstream s(spec_path);
        s << spec.dump(2);
        return spec_path;
    }
};

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run("").exit_code, 2);
    EXPECT_EQ(run("no-such-command").exit_code, 2);
    EXPECT_EQ(run("classify --model").exit_code, 2);
}

TEST_F(CliTest, SynthWritesTraceAndGroundTruth) {
    const auto r = run("synth --profile ar --duration 5 --out " + (dir() / "ar5").string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir() / "ar5.csv"));
    ASSERT_TRUE(fs::exists(dir() / "ar5.truth.json"));
    nlohmann::json truth;
    std::ifstream in(dir() / "ar5.truth.json");
    in >> truth;
    EXPECT_EQ(truth["frame_count"].get<std::size_t>(), 225u);  // 45 Hz * 5 s
}

TEST_F(CliTest, SynthListsPresets) {
    const auto r = run("synth --list");
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("vr_chat"), std::string::npos);
}

TEST_F(CliTest, FiaReportRecoversSixtyHertz) {
    const auto synth = run("synth --profile vr_video --duration 10 --seed 5 --out " +
                           (dir() / "video").string());
    ASSERT_EQ(synth.exit_code, 0) << synth.err;
    const auto r =
        run("fia-report --trace " + (dir() / "video.csv").string() + " --segment-size 2000");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("segment_index,len_th,t1,t2,dur_th,frame_count,frame_rate"),
              std::string::npos);
    // overall rate printed on stderr: "overall_frame_rate <value> Hz ..."
    const auto pos = r.err.find("overall_frame_rate ");
    ASSERT_NE(pos, std::string::npos) << r.err;
    const double rate = std::stod(r.err.substr(pos + 19));
    EXPECT_NEAR(rate, 60.0, 0.6);
}

TEST_F(CliTest, TrainWritesModelAndManifest) {
    const auto spec = make_spec(100);
    const auto r = run("train --spec " + spec.string() + " --fast");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir() / "out" / "cli-exp.dxr.json"));
    EXPECT_TRUE(fs::exists(dir() / "out" / "cli-exp.manifest.json"));

    nlohmann::json manifest;
    std::ifstream in(dir() / "out" / "cli-exp.manifest.json");
    in >> manifest;
    EXPECT_EQ(manifest["result"]["converged"].get<bool>(), true);
    EXPECT_FALSE(manifest["datasets"][0]["sha256"].get<std::string>().empty());
    EXPECT_GE(manifest["final_metrics"]["overall_accuracy"].get<double>(), 0.9);
}

TEST_F(CliTest, TrainTwiceIsByteIdentical) {
    const auto spec = make_spec(100);
    const auto m1 = dir() / "det1.dxr.json";
    const auto m2 = dir() / "det2.dxr.json";
    ASSERT_EQ(run("train --spec " + spec.string() + " --fast --seed 11 --out " + m1.string())
                  .exit_code,
              0);
    ASSERT_EQ(run("train --spec " + spec.string() + " --fast --seed 11 --out " + m2.string())
                  .exit_code,
              0);
    EXPECT_EQ(slurp(dir() / "det1.manifest.json"), slurp(dir() / "det2.manifest.json"));
    // models differ only in the manifest digest name? no: identical manifests
    // hash identically, so the whole model files must match byte for byte
    EXPECT_EQ(slurp(m1), slurp(m2));
}

TEST_F(CliTest, MissingTraceFileLeavesNoPartialModel) {
    const fs::path spec_path = dir() / "broken.json";
    nlohmann::json spec{
        {"name", "broken"},
        {"train_traces",
         {{{"path", (dir() / "does_not_exist.csv").string()}, {"label", "X"}},
          {{"path", (dir() / "alpha.csv").string()}, {"label", "Y"}}}},
        {"output_dir", (dir() / "broken_out").string()}};
    std::ofstream s(spec_path);
    s << spec.dump();
    s.close();
    const auto r = run("train --spec " + spec_path.string() + " --fast");
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_FALSE(fs::exists(dir() / "broken_out" / "broken.dxr.json"));
    EXPECT_FALSE(fs::exists(dir() / "broken_out" / "broken.manifest.json"));
}

TEST_F(CliTest, ClassifyEmitsStableCsv) {
    const auto spec = make_spec(100);
    const auto model = dir() / "out" / "cli-exp.dxr.json";
    if (!fs::exists(model))
        ASSERT_EQ(run("train --spec " + spec.string() + " --fast").exit_code, 0);
    const auto r = run("classify --model " + model.string() + " --trace " +
                       (dir() / "alpha.csv").string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("segment_index,label_id,label_name\n", 0), 0u);
    EXPECT_NE(r.out.find("0,"), std::string::npos);
    EXPECT_NE(r.err.find("plurality Alpha"), std::string::npos);
}

TEST_F(CliTest, ClassifySegmentSizeMismatchExitsNonzero) {
    const auto model = dir() / "out" / "cli-exp.dxr.json";
    ASSERT_TRUE(fs::exists(model));
    const auto r = run("classify --model " + model.string() + " --trace " +
                       (dir() / "alpha.csv").string() + " --segment-size 12345");
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("segment size"), std::string::npos);
}

TEST_F(CliTest, OneVsRestWritesOneModelPerClass) {
    const auto spec = make_spec(100);
    const auto out = dir() / "ovr.dxr.json";
    const auto r =
        run("train --spec " + spec.string() + " --fast --one-vs-rest --out " + out.string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto alpha = dir() / "ovr.Alpha.dxr.json";
    const auto beta = dir() / "ovr.Beta.dxr.json";
    ASSERT_TRUE(fs::exists(alpha));
    ASSERT_TRUE(fs::exists(beta));

    // each binary model classifies its own class against the rest
    const auto c = run("classify --model " + alpha.string() + " --trace " +
                       (dir() / "alpha.csv").string());
    ASSERT_EQ(c.exit_code, 0) << c.err;
    EXPECT_NE(c.err.find("plurality Alpha"), std::string::npos);
}

TEST_F(CliTest, EvaluatePerfectSetPrintsFullMarks) {
    const auto spec = make_spec(100);
    const auto model = dir() / "out" / "cli-exp.dxr.json";
    ASSERT_TRUE(fs::exists(model));
    const auto r = run("evaluate --model " + model.string() + " --spec " + spec.string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(
        r.out.rfind("class_id,class_name,test_segments,accuracy_pct,fnr,precision,recall,f1\n",
                    0),
        0u);
    // separable synthetic classes: every class at 100% accuracy, FNR 0
    EXPECT_NE(r.out.find("1,Alpha,"), std::string::npos);
    EXPECT_NE(r.out.find(",100.00,0.0000,"), std::string::npos);
}

}  // namespace
