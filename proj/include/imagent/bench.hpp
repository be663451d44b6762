// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/agent.hpp>
#include <imagent/backend.hpp>
#include <imagent/sim_world.hpp>
#include <imagent/types.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace imagent
{

/// How actions are chosen in a bench run: the model controller, uniform random over the
/// action mask (STOP included when permitted), or one fixed action executed once.
struct PolicyVariant
{
    enum class Kind
    {
        Controller,
        Random,
        Fixed,
    };

    Kind kind = Kind::Controller;
    std::uint64_t seed = 0;                           // Random only
    ActionKind action = ActionKind::NaiveGeneration;  // Fixed only

    static PolicyVariant controller() { return {}; }
    static PolicyVariant random(std::uint64_t seed) { return { Kind::Random, seed, ActionKind::NaiveGeneration }; }
    /// Throws std::invalid_argument for Stop.
    static PolicyVariant fixed(ActionKind action);

    /// "controller", "random[:seed]" or "fixed:<action wire name>". Throws std::invalid_argument.
    static PolicyVariant parse(std::string_view spec, std::uint64_t default_seed = 0);

    [[nodiscard]] std::string label() const;
};

/// Decision source realizing `variant` for one run. Random variants are seeded per run from
/// (variant.seed, run_key) so results do not depend on scheduling.
DecisionSource make_decision_source(const PolicyVariant& variant, Backend& backend, const RunConfig& config,
                                    std::string_view run_key);

struct CorpusEntry
{
    std::string id;
    std::string prompt;
    Mode mode = Mode::Generation;
    std::optional<std::filesystem::path> image_path; // required for editing
};

/// Reads one JSON object per line: {"id", "prompt", "mode"?, "image_path"?}. Blank lines are
/// skipped; relative image paths resolve against the corpus file's directory.
/// Throws std::runtime_error naming the offending line.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& file);

/// Seeded generation prompts of 2 to 5 distinct vocabulary tokens each.
std::vector<CorpusEntry> synthetic_corpus(std::size_t count, const sim::Vocabulary& vocabulary, std::uint64_t seed);

struct BenchRow
{
    std::string prompt_id;
    std::string variant;
    double final_score = 0.0; // judged against the original prompt
    int steps_executed = 0;   // Fixed: executions of the fixed action
    int setup_steps = 0;      // Fixed: naive generation run first to give the action an image
    int fallback_count = 0;
    std::string terminal;
    std::string error;
};

struct VariantAggregate
{
    std::string variant;
    std::size_t runs = 0;
    double mean_score = 0.0;
    double mean_steps = 0.0;
};

struct BenchReport
{
    std::vector<BenchRow> rows;
    std::vector<VariantAggregate> aggregate;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_text() const;
};

/// Per-variant means over `rows`, in first-appearance order of the variants.
std::vector<VariantAggregate> aggregate_rows(const std::vector<BenchRow>& rows);

struct BenchOptions
{
    int parallel = 1;
    /// When set, every run's trace is saved under `<trace_root>/<prompt_id>/<variant>/`.
    std::optional<std::filesystem::path> trace_root;
};

/// Runs every (prompt, variant) pair. Each pair uses the run seed derived from config.seed and
/// the prompt id, so variants see the same sampling noise. Failures are recorded per row.
BenchReport run_bench(const std::vector<CorpusEntry>& corpus, const std::vector<PolicyVariant>& variants,
                      const RunConfig& config, Backend& backend, const BenchOptions& options = {});

/// Writes report.json and report.txt into `dir`.
void write_report(const BenchReport& report, const std::filesystem::path& dir);

} // namespace imagent
