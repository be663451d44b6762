// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <initializer_list>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imagent
{

enum class ActionKind
{
    NaiveGeneration,
    PromptEnhancement,
    PromptRevision,
    ImageDetailRefinement,
    BestOfN,
    Stop,
};

inline constexpr std::array<ActionKind, 6> kAllActions {
    ActionKind::NaiveGeneration,       ActionKind::PromptEnhancement, ActionKind::PromptRevision,
    ActionKind::ImageDetailRefinement, ActionKind::BestOfN,           ActionKind::Stop,
};

/// Canonical wire name used in controller replies and traces.
std::string_view wire_name(ActionKind action) noexcept;

/// Case-insensitive lookup that tolerates `_`, `$\_$`, `-` and space separators.
std::optional<ActionKind> action_from_name(std::string_view name);

/// Small bit set over ActionKind, ordered by enum value when iterated.
class ActionSet
{
public:
    constexpr ActionSet() = default;
    constexpr ActionSet(std::initializer_list<ActionKind> actions)
    {
        for (auto a: actions)
            insert(a);
    }

    constexpr void insert(ActionKind a) noexcept { _bits |= bit(a); }
    constexpr void erase(ActionKind a) noexcept { _bits &= static_cast<std::uint8_t>(~bit(a)); }
    [[nodiscard]] constexpr bool contains(ActionKind a) const noexcept { return (_bits & bit(a)) != 0; }
    [[nodiscard]] constexpr bool empty() const noexcept { return _bits == 0; }
    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::vector<ActionKind> to_vector() const;

    static constexpr ActionSet all() noexcept
    {
        ActionSet s;
        for (auto a: kAllActions)
            s.insert(a);
        return s;
    }

    friend constexpr bool operator==(ActionSet, ActionSet) = default;

private:
    static constexpr std::uint8_t bit(ActionKind a) noexcept
    {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
    }
    std::uint8_t _bits = 0;
};

enum class Mode
{
    Generation,
    Editing,
};

std::string_view mode_name(Mode mode) noexcept;
std::optional<Mode> mode_from_name(std::string_view name);

enum class ImageFormat
{
    Png,
    Jpeg,
    SimJson,
};

std::string_view format_name(ImageFormat format) noexcept;
std::optional<ImageFormat> format_from_name(std::string_view name);

/// Opaque image artifact. Bytes live in an ArtifactStore, addressed by digest.
struct ImageRef
{
    std::string digest; // lowercase hex SHA-256 of the bytes
    ImageFormat format = ImageFormat::SimJson;
    std::string path;   // empty for in-memory stores
    std::optional<int> width;
    std::optional<int> height;

    /// File name inside an artifact directory: `<digest>.<format>`.
    [[nodiscard]] std::string file_name() const;

    friend bool operator==(const ImageRef& a, const ImageRef& b)
    {
        return a.digest == b.digest && a.format == b.format;
    }
};

struct RunConfig
{
    int t_max = 5;
    int best_of_n = 4;
    std::uint64_t seed = 0;
    int parse_retries = 2;
    int history_window = 5;
    bool parallel_candidates = false;

    /// Throws std::invalid_argument when a bound is violated.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct Observation
{
    int step = 0;
    ActionKind action = ActionKind::NaiveGeneration;
    std::string rationale;
    std::string feedback;
    std::optional<double> score;
    // Present iff action == BestOfN; a null entry marks a failed candidate.
    std::optional<std::vector<std::optional<double>>> candidate_scores;
    bool failed = false;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct Decision
{
    ActionKind action = ActionKind::Stop;
    std::string rationale;
    std::string raw;
    int parse_attempts = 0;
    bool fallback = false;       // produced by the parse-exhaustion fallback
    bool images_omitted = false; // backend could not take images in understand

    friend bool operator==(const Decision&, const Decision&) = default;
};

struct AgentState
{
    std::string initial_prompt;
    std::optional<ImageRef> initial_image;
    std::string current_prompt;
    std::optional<ImageRef> current_image;
    std::vector<Observation> history;
    int step_index = 1;
    Mode mode = Mode::Generation;

    static AgentState for_generation(std::string prompt);
    static AgentState for_editing(std::string prompt, ImageRef image);
};

struct StepRecord
{
    Decision decision;
    Observation observation;
    std::string prompt_before;
    std::string prompt_after;
    std::optional<ImageRef> image_before;
    std::optional<ImageRef> image_after;
    double duration_ms = 0.0;
};

enum class TerminalStatus
{
    Stopped,
    MaxStepsReached,
    Aborted,
};

std::string_view terminal_name(TerminalStatus status) noexcept;
std::optional<TerminalStatus> terminal_from_name(std::string_view name);

struct Terminal
{
    TerminalStatus status = TerminalStatus::Aborted;
    std::string reason; // set for Aborted

    friend bool operator==(const Terminal&, const Terminal&) = default;
};

struct Trace
{
    RunConfig config;
    Mode mode = Mode::Generation;
    std::string template_version;
    std::string backend;
    std::string initial_prompt;
    std::optional<ImageRef> initial_image;
    std::vector<StepRecord> steps;
    std::optional<Decision> stop_decision; // the STOP that ended a Stopped run
    Terminal terminal;
    std::optional<ImageRef> final_image;
    std::vector<std::pair<std::string, std::string>> effective_settings; // echoed CLI config

    [[nodiscard]] int fallback_count() const;
};

} // namespace imagent
