#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parcelforge/evaluate.hpp"
#include "parcelforge/ic_match.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/synthetic.hpp"

namespace parcelforge {

/// Every knob of a full run. Serialises to an INI-style file with one
/// section per stage; unknown keys are rejected so typos do not go silent.
struct PipelineConfig {
    // [input] either a dataset/cohort directory or an in-process synthetic cohort
    std::string input_path;
    bool synthetic = false;
    SyntheticCohortSpec synth;

    // [ica]
    int n_components = 0;  // 0: variance rule (default_ic_count)
    FastIcaOptions fastica;
    std::uint64_t ica_seed = 0;
    CorrelationMode mode = CorrelationMode::absolute;
    int n_clusters = 3;
    int n_select = 2;
    std::vector<int> ic_indices;  // manual picks for single-subject runs

    // [seeds]
    double seed_radius = kDefaultSeedRadius;
    int n_seeds = 0;  // 0: 15 per map with several subjects, 30 with one

    // [pca], [pls]
    TruncationPolicy truncation;
    int n_latents = 1;

    // [parcellate]
    int n_parcels = 600;
    int embed_dims = 20;
    std::uint64_t parcel_seed = 0;
    KMeansOptions kmeans;

    // [evaluate]
    double glm_threshold = kGlmReportThreshold;
    double pls_threshold = kPlsReportThreshold;
    Eq6Form eq6 = Eq6Form::standard;

    bool operator==(const PipelineConfig&) const = default;
};

std::string to_ini(const PipelineConfig& config);
PipelineConfig parse_ini(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace parcelforge
