// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/artifact_store.hpp>
#include <imagent/backend.hpp>
#include <imagent/types.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace imagent
{

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::string_view kTraceFileName = "trace.json";
inline constexpr std::string_view kArtifactDirName = "artifacts";

struct TraceFile
{
    std::filesystem::path path; // .../trace.json
    int schema_version = kTraceSchemaVersion;
    std::filesystem::path artifact_dir; // relative to the trace's directory
};

/// Serializes a trace. Image paths are written relative to the artifact directory, so traces
/// of identical runs are byte-identical once durations are excluded.
nlohmann::json trace_to_json(const Trace& trace, bool include_durations = true);

/// Throws TraceError(SchemaMismatch) on a foreign schema_version, TraceError(Malformed) otherwise.
Trace trace_from_json(const nlohmann::json& j, const std::filesystem::path& artifact_dir = {});

/// Writes `<dir>/trace.json` atomically. Every referenced image must already be in
/// `<dir>/artifacts/` or be exportable from `source`; otherwise throws TraceError(DanglingArtifact).
TraceFile save_trace(const Trace& trace, const std::filesystem::path& dir, const ArtifactStore* source = nullptr);

/// Accepts the trace file or its directory. Throws TraceError.
Trace load_trace(const std::filesystem::path& path);

/// Human-readable schema and invariant violations; empty when the trace is valid.
std::vector<std::string> validate(const std::filesystem::path& path);

/// Re-executes `trace` with its recorded decisions (the controller is bypassed) on `backend`.
Trace replay(const Trace& trace, Backend& backend);

struct Divergence
{
    int step = 0; // 0 for run-level fields
    std::string field;
    std::string original;
    std::string replayed;
};

struct TraceDiff
{
    std::vector<Divergence> divergences;

    [[nodiscard]] bool identical() const noexcept { return divergences.empty(); }
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Compares decisions, prompts, image digests and terminal status step by step.
TraceDiff diff_traces(const Trace& original, const Trace& replayed);

} // namespace imagent
