// parcelforge command-line driver.

#include <omp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "parcelforge/config.hpp"
#include "parcelforge/evaluate.hpp"
#include "parcelforge/ic_match.hpp"
#include "parcelforge/ica.hpp"
#include "parcelforge/io.hpp"
#include "parcelforge/nifti.hpp"
#include "parcelforge/parcellate.hpp"
#include "parcelforge/pipeline.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/seeds.hpp"

using namespace parcelforge;
namespace fs = std::filesystem;

namespace {

DesignMatrix require_design(const fs::path& data_dir, const std::string& design_csv) {
    if (!design_csv.empty()) {
        auto t = io::read_csv(design_csv);
        return DesignMatrix(std::move(t.values), std::move(t.header));
    }
    auto d = io::load_design(data_dir);
    if (!d) throw ParameterError("missing required input: --design (no design.csv in " + data_dir.string() + ")");
    return std::move(*d);
}

// ICA output directories carry ics.json so the map file can be read back.
ICDecomposition load_ics_dir(const fs::path& dir, int subject_id) {
    const auto meta = nlohmann::json::parse(io::read_text(dir / "ics.json"));
    return import_ics(dir / "timecourses.csv", dir / "maps.f64", subject_id, meta.at("n_voxels").get<Eigen::Index>());
}

void save_ics_dir(const fs::path& dir, const ICDecomposition& ics, const nlohmann::ordered_json& extra) {
    fs::create_directories(dir);
    export_ics(ics, dir / "timecourses.csv", dir / "maps.f64");
    auto meta = extra;
    meta["n_components"] = ics.n_components();
    meta["n_voxels"] = ics.maps.cols();
    io::write_text(dir / "ics.json", meta.dump(2) + "\n");
}

Matrix load_features(const fs::path& path, std::string* provenance = nullptr) {
    const auto meta_path = fs::path(path).replace_extension(".json");
    if (!fs::exists(meta_path)) throw FormatError("missing " + meta_path.string() + " next to the feature file");
    const auto meta = nlohmann::json::parse(io::read_text(meta_path));
    if (provenance) *provenance = meta.value("provenance", "features");
    return io::read_f64(path, meta.at("columns").get<Eigen::Index>());
}

void save_features(const fs::path& path, const Matrix& R, const std::string& provenance,
                   nlohmann::ordered_json meta = nlohmann::ordered_json::object()) {
    io::write_f64(path, R);
    meta["columns"] = R.cols();
    meta["rows"] = R.rows();
    meta["provenance"] = provenance;
    io::write_text(fs::path(path).replace_extension(".json"), meta.dump(2) + "\n");
}

std::string stdin_line() {
    if (isatty(STDIN_FILENO)) return {};
    std::string line;
    std::getline(std::cin, line);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    return line;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-fMRI parcellation with IC-seeded PLS features and spectral clustering"};
    app.require_subcommand(1);
    int workers = 0;
    app.add_option("-j,--workers", workers, "OpenMP worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic block-design cohort");
    std::string synth_out, synth_config;
    std::uint64_t synth_seed = 0;
    int synth_subjects = 0;
    synth->add_option("--out", synth_out, "Output directory (default: synth-<seed>)");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--subjects", synth_subjects, "Number of subjects (overrides the config)");
    synth->add_option("--config", synth_config, "Config file; its [synthetic] section is used")->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert a 4-D NIfTI-1 file to a dataset directory");
    std::string nifti_path, ingest_mask, ingest_design, ingest_out;
    ingest->add_option("--nifti", nifti_path, "4-D NIfTI-1 file")->required();
    ingest->add_option("--mask", ingest_mask, "3-D NIfTI-1 mask (nonzero = keep); default keeps non-constant voxels");
    ingest->add_option("--design", ingest_design, "Design CSV (header row, one column per regressor)");
    ingest->add_option("--out", ingest_out, "Output dataset directory")->required();

    // ica
    auto* ica = app.add_subcommand("ica", "Temporal ICA of one dataset, or import external components");
    std::string ica_data, ica_out, import_tc, import_maps;
    int ica_n = 0;
    std::uint64_t ica_seed = 0;
    FastIcaOptions ica_opts;
    ica->add_option("--data", ica_data, "Dataset directory")->required();
    ica->add_option("--out", ica_out, "Output directory")->required();
    ica->add_option("--n-components", ica_n, "Number of ICs (0: 95% variance rule)");
    ica->add_option("--seed", ica_seed, "FastICA seed");
    ica->add_option("--max-iterations", ica_opts.max_iterations);
    ica->add_option("--tolerance", ica_opts.tolerance);
    auto* imp_tc = ica->add_option("--import-timecourses", import_tc, "External time courses CSV");
    auto* imp_maps = ica->add_option("--import-maps", import_maps, "External N x V float64 maps");
    imp_tc->needs(imp_maps);
    imp_maps->needs(imp_tc);

    // match
    auto* match = app.add_subcommand("match", "Cross-subject IC similarity, Ward clustering and task cluster choice");
    std::vector<std::string> match_ics;
    std::string match_design, match_out, match_mode = "absolute";
    int n_clusters = 3, n_select = 2;
    match->add_option("--ics", match_ics, "ICA output directories, one per subject")->required();
    match->add_option("--design", match_design, "Design CSV")->required();
    match->add_option("--out", match_out, "Output directory")->required();
    match->add_option("--clusters", n_clusters, "Ward clusters");
    match->add_option("--select", n_select, "Task clusters to keep");
    match->add_option("--mode", match_mode, "Correlation mode")->check(CLI::IsMember({"absolute", "signed"}));

    // seeds
    auto* seeds = app.add_subcommand("seeds", "Greedy seed voxels from IC maps");
    std::string seeds_ics, seeds_data, seeds_out;
    std::vector<int> seeds_maps;
    double radius = kDefaultSeedRadius;
    int n_seeds = kSeedsPerMapSingleSubject;
    seeds->add_option("--ics", seeds_ics, "ICA output directory")->required();
    seeds->add_option("--data", seeds_data, "Dataset directory (for the grid)")->required();
    seeds->add_option("--ic", seeds_maps, "IC index; repeat for several maps")->required();
    seeds->add_option("--radius", radius, "Minimum seed distance in voxels");
    seeds->add_option("--n", n_seeds, "Seeds per map");
    seeds->add_option("--out", seeds_out, "Seed CSV")->required();

    // pls
    auto* pls = app.add_subcommand("pls", "PCA truncation, PLS on the seed signals, covariance features");
    std::string pls_data, pls_seeds, pls_out;
    std::vector<int> latents{1};
    TruncationPolicy trunc;
    pls->add_option("--data", pls_data, "Dataset directory")->required();
    pls->add_option("--seeds", pls_seeds, "Seed CSV")->required();
    pls->add_option("--out", pls_out, "Output directory")->required();
    pls->add_option("--latents", latents, "Number of PLS latents K; several values write one feature file each");
    pls->add_option("--drop-leading", trunc.drop_leading);
    pls->add_option("--drop-trailing", trunc.drop_trailing);
    pls->add_option("--variance-floor", trunc.variance_floor_fraction);

    // parcellate
    auto* parc = app.add_subcommand("parcellate", "Spectral clustering of a feature field");
    std::string parc_data, parc_features, parc_design, parc_out, parc_tag;
    bool parc_glm = false, parc_spatial = false;
    ParcellateOptions popts;
    parc->add_option("--data", parc_data, "Dataset directory")->required();
    auto* feat_opt = parc->add_option("--features", parc_features, "Feature file (.f64 with .json sidecar)");
    auto* glm_flag = parc->add_flag("--glm", parc_glm, "Use per-voxel GLM t-values as features");
    auto* sc_flag = parc->add_flag("--spatial", parc_spatial, "Coordinate-only k-means baseline");
    feat_opt->excludes(glm_flag)->excludes(sc_flag);
    glm_flag->excludes(sc_flag);
    parc->add_option("--design", parc_design, "Design CSV for --glm (default: the dataset's)");
    parc->add_option("--parcels", popts.n_parcels, "Number of parcels K_p");
    parc->add_option("--dims", popts.embed_dims, "Embedding dimensions");
    parc->add_option("--seed", popts.rng_seed, "k-means seed");
    parc->add_option("--restarts", popts.kmeans.restarts, "k-means restarts");
    parc->add_option("--tag", parc_tag, "Provenance tag");
    parc->add_option("--out", parc_out, "Output directory")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "t-maps and intra-parcel variance of one or more parcellations");
    std::string eval_data, eval_design, eval_out;
    std::vector<std::string> eval_labels;
    bool eq6_literal = false;
    double glm_thr = kGlmReportThreshold, pls_thr = kPlsReportThreshold;
    TruncationPolicy eval_trunc;
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--design", eval_design, "Design CSV (default: the dataset's)");
    eval->add_option("--labels", eval_labels, "Label CSVs; labels_<tag>.csv is reported as <tag>")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_flag("--eq6-literal", eq6_literal, "Use (1 - r^2) instead of sqrt(1 - r^2) in the correlation t");
    eval->add_option("--glm-threshold", glm_thr, "Report parcels with mean GLM t above this");
    eval->add_option("--pls-threshold", pls_thr, "Report parcels with mean PLS t above this");
    eval->add_option("--drop-leading", eval_trunc.drop_leading);
    eval->add_option("--drop-trailing", eval_trunc.drop_trailing);

    // run
    auto* run = app.add_subcommand("run", "Full pipeline");
    std::string run_config, run_input, run_out = "parcelforge-run", dump_config;
    bool run_synth = false;
    std::vector<int> run_ic_index;
    run->add_option("--config", run_config, "Config file")->check(CLI::ExistingFile);
    run->add_option("--input", run_input, "Dataset or cohort directory (default: config, then stdin)");
    run->add_flag("--synthetic", run_synth, "Generate the input from the [synthetic] section");
    run->add_option("--out", run_out, "Output directory");
    run->add_option("--ic-index", run_ic_index, "Single-subject IC(s) to seed from (default: best design match)");
    run->add_option("--print-config", dump_config, "Write the effective config to this file and exit");

    // compare
    auto* cmp = app.add_subcommand("compare", "Mean and quartiles of variance reports");
    std::vector<std::string> cmp_reports;
    std::string cmp_out;
    cmp->add_option("--reports", cmp_reports, "variance CSVs (method,parcel,v)")->required();
    cmp->add_option("--out", cmp_out, "Comparison CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }

    if (workers > 0) omp_set_num_threads(workers);

    try {
        if (*synth) {
            SyntheticCohortSpec spec = synth_config.empty() ? SyntheticCohortSpec{} : load_config(synth_config).synth;
            if (synth->count("--seed")) spec.rng_seed = synth_seed;
            if (synth_subjects > 0) spec.n_subjects = synth_subjects;
            if (synth_out.empty()) synth_out = "synth-" + std::to_string(spec.rng_seed);
            save_cohort(synth_out, generate_synthetic_cohort(spec), spec);
            std::cout << synth_out << "\n";
        } else if (*ingest) {
            const auto vol = load_nifti(nifti_path);
            std::vector<std::uint8_t> mask;
            MaskRule rule = MaskRule::nonzero_variance;
            if (!ingest_mask.empty()) {
                const auto m = load_nifti(ingest_mask);
                if (m.dims[0] != vol.dims[0] || m.dims[1] != vol.dims[1] || m.dims[2] != vol.dims[2])
                    throw ShapeError("mask dims differ from the data dims");
                const std::size_t cells = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
                for (std::size_t c = 0; c < cells; ++c) mask.push_back(m.at(c, 0) != 0.0);
                rule = MaskRule::explicit_mask;
            }
            const auto ds = mask_and_flatten(vol, rule, mask);
            std::optional<DesignMatrix> design;
            if (!ingest_design.empty()) {
                design = require_design({}, ingest_design);
                if (design->Y.rows() != ds.n_timepoints())
                    throw ShapeError("design has " + std::to_string(design->Y.rows()) + " rows, data has " +
                                     std::to_string(ds.n_timepoints()) + " volumes");
            }
            io::save_dataset(ingest_out, ds, design ? &*design : nullptr);
            std::cout << ingest_out << ": " << ds.n_voxels() << " voxels x " << ds.n_timepoints() << " volumes\n";
        } else if (*ica) {
            const auto ds = io::load_dataset(ica_data);
            nlohmann::ordered_json meta;
            ICDecomposition ics;
            if (!import_tc.empty()) {
                ics = import_ics(import_tc, import_maps, 0, static_cast<Eigen::Index>(ds.n_voxels()));
                if (ics.timecourses.rows() != ds.n_timepoints())
                    throw ShapeError("imported time courses have " + std::to_string(ics.timecourses.rows()) +
                                     " rows, data has " + std::to_string(ds.n_timepoints()));
                meta["source"] = "import";
            } else {
                const int n = ica_n > 0 ? ica_n : default_ic_count(ds);
                ics = fastica(ds, n, ica_seed, ica_opts);
                meta["source"] = "fastica";
                meta["rng_seed"] = ica_seed;
            }
            save_ics_dir(ica_out, ics, meta);
            std::cout << ica_out << ": " << ics.n_components() << " components\n";
        } else if (*match) {
            std::vector<ICDecomposition> cohort;
            for (std::size_t i = 0; i < match_ics.size(); ++i)
                cohort.push_back(load_ics_dir(match_ics[i], static_cast<int>(i)));
            auto d = io::read_csv(match_design);
            const DesignMatrix design(std::move(d.values), std::move(d.header));
            const auto mode = match_mode == "signed" ? CorrelationMode::signed_corr : CorrelationMode::absolute;
            const auto sim = similarity_matrix(cohort, mode);
            auto clustering = ward_cluster(sim, n_clusters);
            const auto selected = select_task_clusters(clustering, cohort, design, n_select);
            fs::create_directories(match_out);
            io::write_f64(fs::path(match_out) / "similarity.f64", sim.S);
            Matrix rows(static_cast<Eigen::Index>(sim.owner.size()), 4);
            for (std::size_t m = 0; m < sim.owner.size(); ++m)
                rows.row(static_cast<Eigen::Index>(m)) << static_cast<double>(m), sim.owner[m], sim.local_index[m],
                    clustering.labels[m];
            io::write_csv(fs::path(match_out) / "clusters.csv", {"pooled", "subject", "local", "cluster"}, rows);
            nlohmann::ordered_json sel;
            sel["selected_clusters"] = selected;
            for (std::size_t i = 0; i < cohort.size(); ++i) {
                nlohmann::ordered_json list = nlohmann::ordered_json::array();
                for (const auto& p : ics_for_subject(static_cast<int>(i), clustering, sim, selected))
                    list.push_back({{"cluster", p.cluster},
                                    {"ic", sim.local_index[static_cast<std::size_t>(p.pooled_index)]},
                                    {"fallback", p.fallback}});
                sel["picks"][match_ics[i]] = list;
            }
            io::write_text(fs::path(match_out) / "selection.json", sel.dump(2) + "\n");
            std::cout << "selected clusters:";
            for (int c : selected) std::cout << ' ' << c;
            std::cout << "\n";
        } else if (*seeds) {
            const auto ds = io::load_dataset(seeds_data);
            const auto ics = load_ics_dir(seeds_ics, 0);
            if (ics.maps.cols() != static_cast<Eigen::Index>(ds.n_voxels()))
                throw ShapeError("IC maps and dataset differ in voxel count");
            std::vector<SeedSet> sets;
            for (int k : seeds_maps) {
                if (k < 0 || k >= ics.n_components())
                    throw ParameterError("--ic " + std::to_string(k) + " is outside 0.." +
                                         std::to_string(ics.n_components() - 1));
                sets.push_back(select_seeds(ics.maps.row(k).transpose(), ds.grid(), radius, n_seeds, k));
                if (sets.back().exhausted)
                    std::cerr << "warning: IC " << k << ": only " << sets.back().voxel_rows.size()
                              << " seeds fit at this radius\n";
            }
            write_seeds_csv(seeds_out, sets, ds.grid());
        } else if (*pls) {
            const auto ds = io::load_dataset(pls_data);
            const auto sets = read_seeds_csv(pls_seeds);
            const Matrix Xc = center_rows(ds.X());
            const auto kept = truncate(pca_decompose(Xc), trunc);
            const auto D = build_seed_matrix(ds, sets);
            const Matrix X0 = unit_normalize_rows(Xc).X0;
            fs::create_directories(pls_out);
            nlohmann::ordered_json meta;
            meta["seeds"] = pls_seeds;
            meta["n_seed_signals"] = D.D.cols();
            meta["duplicate_seeds"] = D.duplicates;
            meta["drop_leading"] = trunc.drop_leading;
            meta["drop_trailing"] = trunc.drop_trailing;
            meta["variance_floor_fraction"] = trunc.variance_floor_fraction;
            for (int K : latents) {
                const auto model = pls_fit(kept.scores, D.D, K);
                const auto tag = latents.size() == 1 ? std::string() : "_k" + std::to_string(K);
                save_features(fs::path(pls_out) / ("features" + tag + ".f64"), covariance_features(X0, model).R,
                              "PLS" + std::to_string(K), meta);
                std::vector<std::string> names;
                for (int k = 0; k < K; ++k) names.push_back("t" + std::to_string(k + 1));
                io::write_csv(fs::path(pls_out) / ("latents" + tag + ".csv"), names, model.latents);
            }
        } else if (*parc) {
            const auto ds = io::load_dataset(parc_data);
            Parcellation p;
            if (parc_spatial) {
                p = spatial_baseline(ds.grid(), popts.n_parcels, popts.rng_seed, popts.kmeans);
            } else {
                Matrix features;
                std::string tag;
                if (parc_glm) {
                    features = glm_tvalues(ds.X(), require_design(parc_data, parc_design)).t;
                    tag = "GLM";
                } else {
                    if (parc_features.empty())
                        throw ParameterError("missing required input: --features (or --glm / --spatial)");
                    features = load_features(parc_features, &tag);
                }
                if (features.rows() != static_cast<Eigen::Index>(ds.n_voxels()))
                    throw ShapeError("feature rows differ from the dataset voxel count");
                p = parcellate_pipeline(features, ds.grid(), popts, parc_tag.empty() ? tag : parc_tag);
            }
            if (p.mask_components > 1)
                std::cerr << "warning: mask has " << p.mask_components
                          << " disconnected components; unreachable pairs use geodesic distance " << p.surrogate << "\n";
            if (static_cast<std::size_t>(popts.n_parcels) * 2 > ds.n_voxels())
                std::cerr << "warning: " << popts.n_parcels << " parcels exceeds half of " << ds.n_voxels()
                          << " voxels\n";
            fs::create_directories(parc_out);
            const std::string base = "labels_" + p.provenance;
            write_labels_csv(fs::path(parc_out) / (base + ".csv"), p, ds.grid());
            Matrix volume = Matrix::Constant(static_cast<Eigen::Index>(ds.grid().n_cells()), 1, -1.0);
            for (std::size_t r = 0; r < ds.n_voxels(); ++r)
                volume(static_cast<Eigen::Index>(ds.grid().cell_of_row(r)), 0) = p.labels[r];
            io::write_f64(fs::path(parc_out) / (base + "_volume.f64"), volume);
            std::cout << (fs::path(parc_out) / (base + ".csv")).string() << "\n";
        } else if (*eval) {
            const auto ds = io::load_dataset(eval_data);
            const auto design = require_design(eval_data, eval_design);
            const Matrix Xc = center_rows(ds.X());
            const auto kept = truncate(pca_decompose(Xc), eval_trunc);
            const auto glm = glm_tvalues(ds.X(), design);
            const auto plst = pls_tmap(unit_normalize_rows(Xc).X0, design, kept.scores,
                                       eq6_literal ? Eq6Form::literal : Eq6Form::standard);
            write_statmap(eval_out, glm);
            write_statmap(eval_out, plst);
            std::vector<ParcelVarianceReport> reports;
            nlohmann::ordered_json active;
            for (const auto& path : eval_labels) {
                const auto labels = read_labels_csv(path);
                if (labels.labels.size() != ds.n_voxels()) throw ShapeError(path + ": voxel count mismatch");
                auto stem = fs::path(path).stem().string();
                if (stem.rfind("labels_", 0) == 0 && stem.size() > 7) stem = stem.substr(7);
                reports.push_back(intra_parcel_variance(glm, labels, "glm_t/" + stem));
                reports.push_back(intra_parcel_variance(plst, labels, "pls_t/" + stem));
                for (Eigen::Index k = 0; k < design.n_regressors(); ++k) {
                    const auto& name = design.names[static_cast<std::size_t>(k)];
                    active[stem]["glm"][name] = active_parcels(glm, labels, k, glm_thr);
                    active[stem]["pls"][name] = active_parcels(plst, labels, k, pls_thr);
                }
            }
            write_variance_report_csv(fs::path(eval_out) / "variance.csv", reports);
            io::write_text(fs::path(eval_out) / "active_parcels.json", active.dump(2) + "\n");
            if (reports.size() >= 2) write_comparison_csv(fs::path(eval_out) / "comparison.csv", compare_methods(reports));
        } else if (*run) {
            PipelineConfig config = run_config.empty() ? PipelineConfig{} : load_config(run_config);
            if (run_synth) config.synthetic = true;
            if (!run_input.empty()) config.input_path = run_input;
            if (!run_ic_index.empty()) config.ic_indices = run_ic_index;
            if (!config.synthetic && config.input_path.empty()) config.input_path = stdin_line();
            if (!dump_config.empty()) {
                io::write_text(dump_config, to_ini(config));
                return 0;
            }
            const auto summary = run_pipeline(config, run_out, [](const std::string& m) { std::cerr << "[run] " << m << "\n"; });
            std::cout << summary.manifest.string() << "\n";
        } else if (*cmp) {
            std::vector<ParcelVarianceReport> all;
            for (const auto& path : cmp_reports)
                for (auto& r : read_variance_report_csv(path)) all.push_back(std::move(r));
            const auto rows = compare_methods(all);
            if (!cmp_out.empty()) {
                write_comparison_csv(cmp_out, rows);
            } else {
                std::cout << "method,mean,q1,q3\n";
                for (const auto& r : rows) std::cout << r.method << ',' << r.mean << ',' << r.q1 << ',' << r.q3 << '\n';
            }
        }
    } catch (const Error& e) {
        std::cerr << "parcelforge: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "parcelforge: malformed JSON: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::data);
    } catch (const std::exception& e) {
        std::cerr << "parcelforge: internal error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::internal);
    }
    return 0;
}
