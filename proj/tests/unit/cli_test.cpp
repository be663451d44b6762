// SPDX-License-Identifier: Apache-2.0
#include <imagent/cli.hpp>
#include <imagent/sim_world.hpp>
#include <imagent/trace_store.hpp>

#include <test_support.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace imagent;
using imagent::testing::TempDir;

namespace
{

struct CliResult
{
    int code = -1;
    std::string out;
    std::string err;
    std::map<std::string, std::string> keys;
};

std::map<std::string, std::string> key_values(const std::string& text)
{
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (auto eq = line.find('='); eq != std::string::npos)
            out[line.substr(0, eq)] = line.substr(eq + 1);
    return out;
}

/// Runs the CLI in-process with a private config home and a clean environment.
class CliTest: public ::testing::Test
{
protected:
    void SetUp() override
    {
        ::setenv("XDG_CONFIG_HOME", (_home / "config").c_str(), 1);
        for (auto const* v: { "IMAGENT_ENDPOINT", "IMAGENT_API_KEY", "IMAGENT_OUT_DIR" })
            ::unsetenv(v);
    }
    void TearDown() override
    {
        for (auto const* v: { "IMAGENT_ENDPOINT", "IMAGENT_API_KEY", "IMAGENT_OUT_DIR" })
            ::unsetenv(v);
    }

    CliResult run(std::vector<std::string> args, bool withOutDir = true)
    {
        if (withOutDir)
        {
            args.emplace_back("--out-dir");
            args.push_back((_home / "runs").string());
        }
        std::vector<const char*> argv { "imagent" };
        for (auto const& a: args)
            argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        CliResult r;
        r.code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
        r.out = out.str();
        r.err = err.str();
        r.keys = key_values(r.out);
        return r;
    }

    void write_config(const std::string& text)
    {
        std::filesystem::create_directories(_home / "config" / "imagent");
        std::ofstream(_home / "config/imagent/config") << text;
    }

    std::filesystem::path write_image(const sim::AttributeBag& attrs)
    {
        auto p = _home / "input.json";
        std::ofstream(p) << sim::encode_attributes(attrs);
        return p;
    }

    TempDir _home { "imagent-cli" };
};

std::map<std::string, std::string> settings_of(const std::string& tracePath)
{
    auto t = load_trace(tracePath);
    return { t.effective_settings.begin(), t.effective_settings.end() };
}

} // namespace

TEST_F(CliTest, RunGenPrintsKeysAndWritesTrace)
{
    auto r = run({ "run-gen", "a red cube on a table", "--seed", "3" });
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.keys["status"], "stopped");
    EXPECT_TRUE(r.keys.count("steps"));
    EXPECT_EQ(r.keys["run_id"].substr(0, 4), "gen-");
    EXPECT_EQ(r.keys["run_id"].size(), 4U + 12U);
    ASSERT_TRUE(r.keys.count("trace"));
    EXPECT_TRUE(std::filesystem::path(r.keys["trace"]).is_absolute());
    EXPECT_TRUE(std::filesystem::exists(r.keys["trace"]));
    EXPECT_TRUE(std::filesystem::exists(r.keys["final_image"]));
    EXPECT_TRUE(validate(r.keys["trace"]).empty());
    EXPECT_NE(r.err.find("step 1: "), std::string::npos);
    // Key order is part of the format.
    EXPECT_EQ(r.out.rfind("run_id=", 0), 0U);
}

TEST_F(CliTest, RunIdIsDeterministicAndOverridable)
{
    auto a = run({ "run-gen", "a red cube" });
    auto b = run({ "run-gen", "a red cube" });
    auto c = run({ "run-gen", "a red cube", "--seed", "9" });
    EXPECT_EQ(a.keys["run_id"], b.keys["run_id"]);
    EXPECT_NE(a.keys["run_id"], c.keys["run_id"]);
    auto d = run({ "run-gen", "a red cube", "--run-id", "mine" });
    EXPECT_EQ(d.keys["run_id"], "mine");
    EXPECT_NE(d.keys["trace"].find("mine"), std::string::npos);
}

TEST_F(CliTest, RunEdit)
{
    auto img = write_image({ "bread" });
    auto r = run({ "run-edit", "bread with mold", img.string() });
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.keys["run_id"].substr(0, 5), "edit-");
    auto t = load_trace(r.keys["trace"]);
    EXPECT_EQ(t.mode, Mode::Editing);
    ASSERT_TRUE(t.final_image);
    std::ifstream in(r.keys["final_image"]);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(sim::decode_attributes(bytes), (sim::AttributeBag { "bread", "mold" }));
}

TEST_F(CliTest, UsageErrors)
{
    EXPECT_EQ(run({}, false).code, cli::kExitUsage);
    EXPECT_EQ(run({ "frobnicate" }, false).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-edit", "add mold" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-edit", "add mold", (_home / "nope.png").string() }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen", "x", "--t-max", "0" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen", "x", "--seed", "abc" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen", "x", "--noise-rate", "1.5" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen", "x", "--backend", "http" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "replay", (_home / "missing.json").string() }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "validate", (_home / "missing.json").string() }, false).code, cli::kExitUsage);
    EXPECT_EQ(run({ "bench" }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "bench", "--synthetic", "2", "--variants", "fixed:STOP" }).code, cli::kExitUsage);

    auto r = run({ "run-gen" });
    EXPECT_EQ(r.err.rfind("error: ", 0), 0U);
    EXPECT_NE(r.err.find("run-gen"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero)
{
    auto r = run({ "--help" }, false);
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("run-gen"), std::string::npos);
}

TEST_F(CliTest, ValidateReportsViolations)
{
    auto r = run({ "run-gen", "a blue hat" });
    ASSERT_EQ(r.code, 0);
    auto ok = run({ "validate", r.keys["trace"] }, false);
    EXPECT_EQ(ok.code, cli::kExitOk);
    EXPECT_EQ(ok.keys["valid"], "true");
    EXPECT_EQ(ok.keys["violations"], "0");

    auto t = load_trace(r.keys["trace"]);
    ASSERT_TRUE(t.final_image);
    std::filesystem::remove(std::filesystem::path(r.keys["final_image"]));
    auto bad = run({ "validate", r.keys["trace"] }, false);
    EXPECT_EQ(bad.code, cli::kExitAborted);
    EXPECT_EQ(bad.keys["valid"], "false");
    EXPECT_NE(bad.keys["violations"], "0");
}

TEST_F(CliTest, ValidateMalformedTrace)
{
    auto p = _home / "garbage.json";
    std::ofstream(p) << "{ not json";
    auto r = run({ "validate", p.string() }, false);
    EXPECT_EQ(r.code, cli::kExitAborted);
    EXPECT_EQ(r.keys["valid"], "false");
}

TEST_F(CliTest, ReplayIdenticalAndDiverged)
{
    auto r = run({ "run-gen", "a green bird on a tree", "--noise-rate", "0.5", "--seed", "4" });
    ASSERT_EQ(r.code, 0) << r.err;

    auto same = run({ "replay", r.keys["trace"] });
    ASSERT_EQ(same.code, cli::kExitOk) << same.err;
    EXPECT_EQ(same.keys["verdict"], "identical");
    EXPECT_EQ(same.keys["divergences"], "0");
    EXPECT_FALSE(same.keys.count("diff"));
    EXPECT_TRUE(std::filesystem::exists(same.keys["trace"]));
    EXPECT_NE(same.keys["trace"], r.keys["trace"]);

    auto other = run({ "replay", r.keys["trace"], "--noise-rate", "0.95" });
    ASSERT_EQ(other.code, cli::kExitOk) << other.err;
    EXPECT_EQ(other.keys["verdict"], "diverged");
    EXPECT_NE(other.keys["divergences"], "0");
    ASSERT_TRUE(other.keys.count("diff"));
    std::ifstream in(other.keys["diff"]);
    EXPECT_FALSE(nlohmann::json::parse(in).empty());
}

TEST_F(CliTest, BenchSynthetic)
{
    auto r = run({ "bench", "--synthetic", "4", "--noise-rate", "0.4", "--save-traces" });
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.keys["rows"], "12");
    EXPECT_EQ(r.keys["failed_runs"], "0");
    EXPECT_TRUE(r.keys.count("mean_score[controller]"));
    EXPECT_TRUE(r.keys.count("mean_score[random]"));
    EXPECT_TRUE(r.keys.count("mean_score[fixed:naive_generation]"));
    EXPECT_TRUE(std::filesystem::exists(r.keys["report"]));
    EXPECT_TRUE(std::filesystem::exists(r.keys["report_text"]));
    auto traces = std::filesystem::path(r.keys["report"]).parent_path() / "traces";
    EXPECT_TRUE(std::filesystem::exists(traces / "p0000" / "controller" / "trace.json"));
    EXPECT_TRUE(std::filesystem::exists(traces / "p0003" / "fixed_naive_generation" / "trace.json"));
}

TEST_F(CliTest, BenchCorpus)
{
    std::ofstream(_home / "c.jsonl") << "{\"id\":\"one\",\"prompt\":\"a red cube\"}\n";
    auto r = run({ "bench", "--corpus", (_home / "c.jsonl").string(), "--variants", "controller" });
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.keys["rows"], "1");
    EXPECT_EQ(r.keys["mean_score[controller]"], "1");

    std::ofstream(_home / "bad.jsonl") << "oops\n";
    EXPECT_EQ(run({ "bench", "--corpus", (_home / "bad.jsonl").string() }).code, cli::kExitUsage);
}

TEST_F(CliTest, SettingsPrecedenceFileEnvFlag)
{
    write_config("# defaults for tests\nseed = 11\nt_max = 3\nnoise_rate = 0.2\nout_dir = /nonexistent/never\n");
    ::setenv("IMAGENT_OUT_DIR", (_home / "env-runs").c_str(), 1);

    auto fromFile = run({ "run-gen", "a red cube" }, false);
    ASSERT_EQ(fromFile.code, 0) << fromFile.err;
    auto s = settings_of(fromFile.keys["trace"]);
    EXPECT_EQ(s["seed"], "11");
    EXPECT_EQ(s["t_max"], "3");
    EXPECT_EQ(s["noise_rate"], "0.2");
    EXPECT_EQ(fromFile.keys["trace"].rfind((_home / "env-runs").string(), 0), 0U);

    auto fromFlag = run({ "run-gen", "a red cube", "--seed", "12" });
    ASSERT_EQ(fromFlag.code, 0) << fromFlag.err;
    s = settings_of(fromFlag.keys["trace"]);
    EXPECT_EQ(s["seed"], "12");
    EXPECT_EQ(s["t_max"], "3");
    EXPECT_EQ(fromFlag.keys["trace"].rfind((_home / "runs").string(), 0), 0U);
    EXPECT_EQ(load_trace(fromFlag.keys["trace"]).config.seed, 12U);
}

TEST_F(CliTest, ExplicitConfigFile)
{
    std::ofstream(_home / "alt.conf") << "best_of_n = 2\n";
    auto r = run({ "run-gen", "a red cube", "--config", (_home / "alt.conf").string() });
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(settings_of(r.keys["trace"])["best_of_n"], "2");

    std::ofstream(_home / "broken.conf") << "no equals sign here\n";
    EXPECT_EQ(run({ "run-gen", "x", "--config", (_home / "broken.conf").string() }).code, cli::kExitUsage);
    std::ofstream(_home / "unknown.conf") << "flavour = mint\n";
    EXPECT_EQ(run({ "run-gen", "x", "--config", (_home / "unknown.conf").string() }).code, cli::kExitUsage);
    EXPECT_EQ(run({ "run-gen", "x", "--config", (_home / "absent.conf").string() }).code, cli::kExitUsage);
}

TEST_F(CliTest, SecretsStayOutOfTraces)
{
    ::setenv("IMAGENT_API_KEY", "hunter2", 1);
    auto r = run({ "run-gen", "a red cube" });
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(r.keys["trace"]);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(text.find("hunter2"), std::string::npos);
}

TEST_F(CliTest, ReplayUsesRecordedWorld)
{
    auto r = run({ "run-gen", "a frozen lake", "--noise-rate", "0.6", "--seed", "2" });
    ASSERT_EQ(r.code, 0);
    // No world flags on replay: the recorded noise rate must be used.
    auto again = run({ "replay", r.keys["trace"] });
    EXPECT_EQ(again.keys["verdict"], "identical");
    EXPECT_EQ(settings_of(again.keys["trace"])["noise_rate"], "0.6");
}

TEST(CliConfig, SetAndEffective)
{
    cli::CliConfig c;
    c.set("best-of-n", "6");
    c.set("noise_rate", "0.25");
    EXPECT_EQ(c.run.best_of_n, 6);
    EXPECT_THROW(c.set("colour", "red"), std::invalid_argument);
    EXPECT_THROW(c.set("seed", "-1"), std::invalid_argument);
    EXPECT_THROW(c.set("t_max", "2x"), std::invalid_argument);
    auto eff = c.effective();
    EXPECT_TRUE(std::ranges::is_sorted(eff));
    std::map<std::string, std::string> m(eff.begin(), eff.end());
    EXPECT_EQ(m["best_of_n"], "6");
    EXPECT_EQ(m["noise_rate"], "0.25");
    EXPECT_FALSE(m.count("api_key"));
    EXPECT_FALSE(m.count("out_dir"));
    EXPECT_FALSE(m.count("endpoint"));

    c.set("backend", "http");
    c.set("endpoint", "http://localhost:1");
    auto httpEff = c.effective();
    std::map<std::string, std::string> h(httpEff.begin(), httpEff.end());
    EXPECT_EQ(h["endpoint"], "http://localhost:1");
    EXPECT_FALSE(h.count("noise_rate"));
}

TEST(CliConfig, ParseFile)
{
    TempDir dir;
    std::ofstream(dir / "c") << "# comment\n\n  seed = 5  \nendpoint=http://x:1 # trailing\n";
    auto m = cli::parse_config_file(dir / "c");
    EXPECT_EQ(m["seed"], "5");
    EXPECT_EQ(m["endpoint"], "http://x:1");
}

TEST(CliBinary, SpawnedExecutableRuns)
{
    TempDir dir;
    auto cmd = "XDG_CONFIG_HOME=" + (dir / "cfg").string() + " " + imagent::testing::cli_path().string()
               + " run-gen 'a red cube' --out-dir " + (dir / "runs").string() + " 2>/dev/null";
    std::FILE* pipe = ::popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::string out;
    char buf[512];
    while (auto n = std::fread(buf, 1, sizeof buf, pipe))
        out.append(buf, n);
    int const status = ::pclose(pipe);
    EXPECT_EQ(WEXITSTATUS(status), 0);
    auto keys = key_values(out);
    EXPECT_EQ(keys["status"], "stopped");
    EXPECT_TRUE(std::filesystem::exists(keys["trace"]));
}
