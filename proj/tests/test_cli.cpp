#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "evtrack/event_io.hpp"
#include "json.hpp"
#include "oracles.hpp"

using nlohmann::json;

namespace {

std::string tmp(const std::string& name) { return ::testing::TempDir() + "evtrack_cli_" + name; }

struct Run {
    int status = 0;
    json report;
};

Run run(const std::string& args, const std::string& report_name) {
    const std::string rep = tmp(report_name + ".json");
    std::remove(rep.c_str());
    const std::string cmd = std::string(EVTRACK_CLI_PATH) + " --report " + rep + " " + args + " 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(rep);
    if (in) r.report = json::parse(in);
    return r;
}

void write_csv(const std::string& path, const std::vector<evtrack::Event>& ev) {
    std::ofstream out(path);
    out << "# t_us,x,y,p\n";
    evtrack::write_events_csv(out, ev);
}

}  // namespace

TEST(Cli, AggregateTimeAndCountModes) {
    const auto ev = oracle::random_stream(1, 20000, {}, 2);  // ~1 event/us
    write_csv(tmp("ev.csv"), ev);
    auto r = run("aggregate " + tmp("ev.csv") + " -o " + tmp("frames.bin") + " --dt-us 5000", "agg");
    ASSERT_EQ(r.status, 0) << r.report.dump();
    EXPECT_EQ(r.report["schema_version"], 1);
    EXPECT_EQ(r.report["manifest"]["subcommand"], "aggregate");
    EXPECT_EQ(r.report["manifest"]["parameters"]["dt_us"], 5000);
    EXPECT_TRUE(r.report["error"].is_null());
    const auto expect = evtrack::aggregate_time(ev, 5000);
    EXPECT_EQ(r.report["results"]["frames"], expect.size());
    EXPECT_EQ(r.report["results"]["effective_frame_rate_hz"], 200.0);
    std::ifstream in(tmp("frames.bin"), std::ios::binary);
    const auto frames = evtrack::read_frames(in);
    ASSERT_EQ(frames.size(), expect.size());
    EXPECT_EQ(frames[0].data, evtrack::downsample(expect[0]).data);

    r = run("aggregate " + tmp("ev.csv") + " -o " + tmp("frames_c.bin") + " --mode count --n-evt 3000", "aggc");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.report["results"]["frames"], 6);
}

TEST(Cli, EmptyStreamGivesNoFrames) {
    std::ofstream(tmp("empty.csv")) << "# nothing\n";
    const auto r = run("aggregate " + tmp("empty.csv") + " -o " + tmp("empty.bin"), "empty");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.report["results"]["frames"], 0);
}

TEST(Cli, ParseErrorsCarryCodeAndLine) {
    std::ofstream(tmp("bad.csv")) << "1,2,3,1\n0,2,3,1\n";
    const auto r = run("aggregate " + tmp("bad.csv") + " -o " + tmp("bad.bin"), "bad");
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.report["error"]["code"], "parse_error");
    EXPECT_NE(r.report["error"]["message"].get<std::string>().find("line 2"), std::string::npos);
    const auto m = run("infer " + tmp("missing.jane") + " " + tmp("bad.bin"), "missing");
    EXPECT_NE(m.status, 0);
    EXPECT_FALSE(m.report["error"].is_null());
}

TEST(Cli, ModelPipelineIsDeterministic) {
    const auto ev = oracle::random_stream(2, 30000, {}, 1);
    write_csv(tmp("ev2.csv"), ev);
    ASSERT_EQ(run("aggregate " + tmp("ev2.csv") + " -o " + tmp("f2.bin") + " --mode count --n-evt 5000", "a2").status, 0);
    ASSERT_EQ(run("init-model --float-only --seed 4 -o " + tmp("float.jane"), "init").status, 0);
    auto q = run("quantize " + tmp("float.jane") + " -o " + tmp("q.jane"), "quant");
    ASSERT_EQ(q.status, 0) << q.report.dump();
    EXPECT_EQ(q.report["results"]["footprint"]["weight_ratio"], 0.25);
    EXPECT_EQ(q.report["counters"]["params"], 17730);

    std::ofstream(tmp("gt.csv")) << "frame_idx,x,y\n0,40,30\n1,41,29\n";
    const std::string infer = "infer " + tmp("q.jane") + " " + tmp("f2.bin") + " --ground-truth " + tmp("gt.csv") + " --compare";
    const auto a = run(infer, "inf_a");
    const auto b = run(infer, "inf_b");
    ASSERT_EQ(a.status, 0) << a.report.dump();
    EXPECT_EQ(a.report["results"], b.report["results"]);
    EXPECT_EQ(a.report["results"]["predictions"].size(), 6u);
    EXPECT_EQ(a.report["results"]["pixel_error"]["frames_with_ground_truth"], 2);
    EXPECT_EQ(a.report["counters"]["params"], 17730);

    const auto ref = run("infer " + tmp("q.jane") + " " + tmp("f2.bin") + " --mode reference --gates original", "inf_r");
    EXPECT_EQ(ref.status, 0);
    const auto bad = run("infer " + tmp("q.jane") + " " + tmp("f2.bin") + " --gates original", "inf_bad");
    EXPECT_NE(bad.status, 0);
    EXPECT_EQ(bad.report["error"]["code"], "invalid_argument");

    const auto v = run("verify-datapath " + tmp("q.jane") + " " + tmp("f2.bin"), "ver");
    ASSERT_EQ(v.status, 0) << v.report.dump();
    EXPECT_TRUE(v.report["results"]["equivalent"].get<bool>());

    const auto s = run("simulate " + tmp("q.jane") + " " + tmp("f2.bin") + " --sparsity measured", "sim_m");
    ASSERT_EQ(s.status, 0) << s.report.dump();
    EXPECT_GT(s.report["results"]["sparsity"].get<double>(), 0.0);

    const auto c = run("calibrate-ranges " + tmp("q.jane") + " " + tmp("f2.bin"), "cal");
    ASSERT_EQ(c.status, 0);
    EXPECT_EQ(c.report["results"]["frames"], 6);
}

TEST(Cli, SimulateReportsHeadlineFigures) {
    const auto r = run("simulate --sparsity inject=0.4 --trace", "sim");
    ASSERT_EQ(r.status, 0) << r.report.dump();
    const auto& res = r.report["results"];
    EXPECT_NEAR(res["energy_uj_per_frame"].get<double>(), 18.9, 0.01);
    EXPECT_EQ(res["latency_ms"].get<double>(), res["total_cycles"].get<double>() / 4.0e8 * 1000.0);
    EXPECT_FALSE(res["fsm_trace"].empty());
    EXPECT_EQ(res["stages"].size(), 13u);

    const auto slow = run("simulate --sparsity inject=0.4 --clock-hz 2e8", "sim_slow");
    // Same bandwidth at half the clock: latency follows the new cycle count.
    const auto& sr = slow.report["results"];
    EXPECT_EQ(sr["latency_ms"].get<double>(), sr["total_cycles"].get<double>() / 2.0e8 * 1000.0);
    EXPECT_LE(sr["total_cycles"].get<int64_t>(), res["total_cycles"].get<int64_t>());

    std::ofstream(tmp("partial.json")) << R"({"schema_version": 1, "units": "pJ", "coefficients": {"mac": 1.0}})";
    const auto miss = run("simulate --coefficients " + tmp("partial.json"), "sim_miss");
    EXPECT_NE(miss.status, 0);
    EXPECT_EQ(miss.report["error"]["code"], "missing_coefficients");

    const auto bad = run("simulate --sparsity inject=2", "sim_bad");
    EXPECT_NE(bad.status, 0);
    EXPECT_EQ(bad.report["error"]["code"], "invalid_argument");
}

TEST(Cli, ResolveConfigAndCalibrateEnergy) {
    const auto r = run("resolve-config -o " + tmp("cfg.json"), "res");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.report["results"]["top"][0]["c2"], 32);
    ASSERT_EQ(run("init-model --config " + tmp("cfg.json") + " -o " + tmp("resolved.jane"), "init_cfg").status, 0);

    const auto e = run("calibrate-energy -o " + tmp("coeffs.json"), "cen");
    ASSERT_EQ(e.status, 0);
    EXPECT_NEAR(e.report["results"]["energy_uj_at_reference"].get<double>(), 18.9, 1e-6);
    const auto s = run("simulate --coefficients " + tmp("coeffs.json"), "sim_c");
    EXPECT_NEAR(s.report["results"]["energy_uj_per_frame"].get<double>(), 18.9, 1e-6);
}
