// SPDX-License-Identifier: Apache-2.0
#include <imagent/actions.hpp>
#include <imagent/bench.hpp>
#include <imagent/trace_store.hpp>

#include <test_support.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <map>

using namespace imagent;
using imagent::testing::make_sim;
using imagent::testing::TempDir;

namespace
{

std::vector<CorpusEntry> three_prompts()
{
    return {
        { "p1", "a red cube on a wooden table", Mode::Generation, std::nullopt },
        { "p2", "a cat wearing a blue hat", Mode::Generation, std::nullopt },
        { "p3", "a lighthouse at night with fog", Mode::Generation, std::nullopt },
    };
}

std::vector<PolicyVariant> three_variants()
{
    return { PolicyVariant::fixed(ActionKind::NaiveGeneration), PolicyVariant::random(3), PolicyVariant::controller() };
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

} // namespace

TEST(PolicyVariant, ParseAndLabel)
{
    EXPECT_EQ(PolicyVariant::parse("controller").kind, PolicyVariant::Kind::Controller);
    auto r = PolicyVariant::parse("random:42");
    EXPECT_EQ(r.kind, PolicyVariant::Kind::Random);
    EXPECT_EQ(r.seed, 42U);
    EXPECT_EQ(PolicyVariant::parse("random", 9).seed, 9U);
    auto f = PolicyVariant::parse("fixed:image_detail_refinement");
    EXPECT_EQ(f.kind, PolicyVariant::Kind::Fixed);
    EXPECT_EQ(f.action, ActionKind::ImageDetailRefinement);
    EXPECT_EQ(f.label(), "fixed:image_detail_refinement");
    EXPECT_EQ(PolicyVariant::controller().label(), "controller");
    EXPECT_EQ(PolicyVariant::random(1).label(), "random");

    for (auto bad: { "", "fixed", "fixed:STOP", "fixed:jump", "random:x", "oracle" })
        EXPECT_THROW(PolicyVariant::parse(bad), std::invalid_argument) << bad;
    EXPECT_THROW(PolicyVariant::fixed(ActionKind::Stop), std::invalid_argument);
}

TEST(Bench, OneRowPerPromptAndVariant)
{
    auto sim = make_sim();
    RunConfig config;
    auto report = run_bench(three_prompts(), three_variants(), config, *sim);
    ASSERT_EQ(report.rows.size(), 9U);
    std::map<std::string, int> perVariant;
    for (auto const& row: report.rows)
    {
        ++perVariant[row.variant];
        EXPECT_TRUE(row.error.empty()) << row.prompt_id << " " << row.variant << ": " << row.error;
        EXPECT_GE(row.final_score, 0.0);
        EXPECT_LE(row.final_score, 1.0);
    }
    EXPECT_EQ(perVariant.size(), 3U);
    for (auto const& [v, n]: perVariant)
        EXPECT_EQ(n, 3) << v;
}

TEST(Bench, FixedVariantExecutesItsActionOnce)
{
    auto sim = make_sim();
    RunConfig config;
    std::vector<PolicyVariant> variants;
    for (auto a: { ActionKind::NaiveGeneration, ActionKind::PromptEnhancement, ActionKind::PromptRevision,
                   ActionKind::ImageDetailRefinement, ActionKind::BestOfN })
        variants.push_back(PolicyVariant::fixed(a));
    auto report = run_bench(three_prompts(), variants, config, *sim);
    for (auto const& row: report.rows)
    {
        EXPECT_EQ(row.steps_executed, 1) << row.variant;
        bool const needsImage =
            row.variant == "fixed:prompt_refinement" || row.variant == "fixed:image_detail_refinement";
        EXPECT_EQ(row.setup_steps, needsImage ? 1 : 0) << row.variant;
        EXPECT_EQ(row.terminal, "stopped") << row.variant;
    }
}

TEST(Bench, FinalScoreIsJudgedAgainstTheOriginalPrompt)
{
    SimWorldConfig world;
    world.noise_rate = 0.5;
    auto sim = make_sim(world);
    RunConfig config;
    TempDir dir;
    BenchOptions options;
    options.trace_root = dir.path();
    auto corpus = three_prompts();
    auto report = run_bench(corpus, { PolicyVariant::controller() }, config, *sim, options);
    for (std::size_t i = 0; i < corpus.size(); ++i)
    {
        auto trace = load_trace(dir / (corpus[i].id + "/controller/trace.json"));
        ASSERT_TRUE(trace.final_image);
        auto attrs = sim->attributes_of(*trace.final_image);
        auto [m, k] = imagent::testing::overlap_oracle(world.vocabulary, corpus[i].prompt, attrs);
        EXPECT_DOUBLE_EQ(report.rows[i].final_score, k == 0 ? 1.0 : double(m) / double(k));
    }
}

TEST(Bench, RandomVariantIsReproducible)
{
    SimWorldConfig world;
    world.noise_rate = 0.4;
    RunConfig config;
    config.seed = 5;
    auto corpus = synthetic_corpus(12, sim::Vocabulary(world.vocabulary), 1);
    auto a = run_bench(corpus, { PolicyVariant::random(8) }, config, *make_sim(world));
    BenchOptions options;
    options.parallel = 4;
    auto b = run_bench(corpus, { PolicyVariant::random(8) }, config, *make_sim(world), options);
    EXPECT_EQ(a.to_json(), b.to_json());
    auto c = run_bench(corpus, { PolicyVariant::random(9) }, config, *make_sim(world));
    EXPECT_NE(a.to_json(), c.to_json());
}

TEST(Bench, ParallelEqualsSequential)
{
    SimWorldConfig world;
    world.noise_rate = 0.4;
    RunConfig config;
    auto corpus = synthetic_corpus(10, sim::Vocabulary(world.vocabulary), 2);
    auto seq = run_bench(corpus, three_variants(), config, *make_sim(world));
    BenchOptions options;
    options.parallel = 3;
    auto par = run_bench(corpus, three_variants(), config, *make_sim(world), options);
    EXPECT_EQ(seq.to_json(), par.to_json());
}

TEST(Bench, AggregateMatchesRecomputation)
{
    std::vector<BenchRow> rows {
        { "a", "x", 0.5, 2, 0, 0, "stopped", "" },
        { "a", "y", 1.0, 1, 0, 0, "stopped", "" },
        { "b", "x", 0.25, 4, 0, 0, "stopped", "" },
        { "b", "y", 0.0, 3, 1, 0, "stopped", "" },
        { "c", "x", 0.75, 0, 0, 0, "aborted", "boom" },
    };
    auto agg = aggregate_rows(rows);
    ASSERT_EQ(agg.size(), 2U);
    EXPECT_EQ(agg[0].variant, "x");
    EXPECT_EQ(agg[0].runs, 3U);
    EXPECT_DOUBLE_EQ(agg[0].mean_score, 0.5);
    EXPECT_DOUBLE_EQ(agg[0].mean_steps, 2.0);
    EXPECT_EQ(agg[1].variant, "y");
    EXPECT_DOUBLE_EQ(agg[1].mean_score, 0.5);
    EXPECT_DOUBLE_EQ(agg[1].mean_steps, 2.0);
}

TEST(Bench, ReportFiles)
{
    auto sim = make_sim();
    auto report = run_bench(three_prompts(), three_variants(), RunConfig {}, *sim);
    TempDir dir;
    write_report(report, dir.path());
    std::ifstream in(dir / "report.json");
    auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["rows"].size(), 9U);
    EXPECT_EQ(j["aggregate"].size(), 3U);
    EXPECT_EQ(j, report.to_json());
    std::ifstream txt(dir / "report.txt");
    std::string text((std::istreambuf_iterator<char>(txt)), {});
    EXPECT_NE(text.find("controller"), std::string::npos);
    EXPECT_NE(text.find("fixed:naive_generation"), std::string::npos);
}

TEST(Bench, EditingEntriesRun)
{
    TempDir dir;
    write_file(dir / "bread.json", sim::encode_attributes({ "bread" }));
    write_file(dir / "corpus.jsonl",
               "{\"id\":\"e1\",\"prompt\":\"bread with mold\",\"mode\":\"editing\",\"image_path\":\"bread.json\"}\n");
    auto corpus = load_corpus(dir / "corpus.jsonl");
    ASSERT_EQ(corpus.size(), 1U);
    EXPECT_EQ(corpus[0].mode, Mode::Editing);
    EXPECT_EQ(*corpus[0].image_path, dir / "bread.json");
    auto sim = make_sim();
    auto report = run_bench(corpus, { PolicyVariant::controller() }, RunConfig {}, *sim);
    ASSERT_EQ(report.rows.size(), 1U);
    EXPECT_TRUE(report.rows[0].error.empty()) << report.rows[0].error;
    EXPECT_DOUBLE_EQ(report.rows[0].final_score, 1.0);
}

TEST(Corpus, LoadSkipsBlankLines)
{
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"a\",\"prompt\":\"red cube\"}\n\n   \n{\"id\":\"b\",\"prompt\":\"blue hat\"}\n");
    auto corpus = load_corpus(dir / "c.jsonl");
    ASSERT_EQ(corpus.size(), 2U);
    EXPECT_EQ(corpus[1].id, "b");
    EXPECT_EQ(corpus[1].mode, Mode::Generation);
}

TEST(Corpus, ErrorsNameTheLine)
{
    TempDir dir;
    auto expect_line = [&](const std::string& text, const std::string& needle) {
        write_file(dir / "bad.jsonl", text);
        try
        {
            load_corpus(dir / "bad.jsonl");
            ADD_FAILURE() << "accepted: " << text;
        }
        catch (const std::runtime_error& e)
        {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_line("{\"id\":\"a\",\"prompt\":\"x\"}\nnot json\n", "bad.jsonl:2: ");
    expect_line("{\"prompt\":\"x\"}\n", "bad.jsonl:1: ");
    expect_line("{\"id\":\"a\",\"prompt\":\"x\",\"mode\":\"editing\"}\n", "bad.jsonl:1: ");
    expect_line("{\"id\":\"a\",\"prompt\":\"x\",\"mode\":\"dream\"}\n", "bad.jsonl:1: ");
    EXPECT_THROW(load_corpus(dir / "missing.jsonl"), std::runtime_error);
}

TEST(Corpus, SyntheticIsSeededAndInVocabulary)
{
    sim::Vocabulary vocab(sim::default_vocabulary());
    auto a = synthetic_corpus(50, vocab, 7);
    auto b = synthetic_corpus(50, vocab, 7);
    ASSERT_EQ(a.size(), 50U);
    EXPECT_EQ(a[0].id, "p0000");
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        EXPECT_EQ(a[i].prompt, b[i].prompt);
        auto k = vocab.keywords(a[i].prompt).size();
        EXPECT_GE(k, 2U) << a[i].prompt;
        EXPECT_LE(k, 5U) << a[i].prompt;
    }
    EXPECT_NE(synthetic_corpus(50, vocab, 8)[0].prompt + synthetic_corpus(50, vocab, 8)[1].prompt,
              a[0].prompt + a[1].prompt);
}
