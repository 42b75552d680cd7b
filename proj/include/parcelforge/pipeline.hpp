#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "parcelforge/config.hpp"
#include "parcelforge/dataset.hpp"
#include "parcelforge/error.hpp"
#include "parcelforge/synthetic.hpp"

namespace parcelforge {

/// Subjects sharing one design, as read from disk or generated.
struct CohortInput {
    std::vector<BoldDataset> subjects;
    std::vector<std::string> names;  // sub-000, sub-001, ...
    DesignMatrix design;
    std::vector<int> truth;  // per voxel row; empty when unknown
};

/// Cohort directory: cohort.json, design.csv, truth_labels.csv and one
/// dataset directory per subject.
void save_cohort(const std::filesystem::path& dir, const SyntheticCohort& cohort, const SyntheticCohortSpec& spec);

/// Accepts a cohort directory or a single dataset directory (grid.json,
/// X.f64, design.csv).
CohortInput load_input(const std::filesystem::path& path);

CohortInput from_synthetic(const SyntheticCohort& cohort);

/// A pipeline stage failed; keeps the kind of the underlying error.
struct StageError : Error {
    StageError(std::string stage_name, const Error& cause)
        : Error(cause.kind(), "stage '" + stage_name + "': " + cause.what()), stage(std::move(stage_name)) {}
    std::string stage;
};

using LogFn = std::function<void(const std::string&)>;

struct RunSummary {
    std::filesystem::path manifest;
    std::vector<std::string> warnings;
};

/// Runs every stage, writing artifacts and manifest.json under `out_dir`.
/// On failure the manifest records the failed stage, the artifacts written
/// so far stay on disk, and a StageError is thrown.
RunSummary run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir, const LogFn& log = {});

}  // namespace parcelforge
