#include "parcelforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"
#include "parcelforge/evaluate.hpp"
#include "parcelforge/ic_match.hpp"
#include "parcelforge/ica.hpp"
#include "parcelforge/io.hpp"
#include "parcelforge/parcellate.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/seeds.hpp"
#include "parcelforge/stats.hpp"

namespace parcelforge {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string subject_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "sub-%03zu", i);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

Parcellation as_parcellation(const std::vector<int>& labels, const std::string& tag) {
    Parcellation p;
    p.labels = labels;
    for (int l : labels) p.n_parcels = std::max(p.n_parcels, l + 1);
    p.provenance = tag;
    return p;
}

ojson config_json(const PipelineConfig& config) {
    // Same keys and text as the config file, so the manifest is the config.
    ojson out = ojson::object();
    std::istringstream in(to_ini(config));
    std::string line, section;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '[') {
            section = line.substr(1, line.size() - 2);
            out[section] = ojson::object();
            continue;
        }
        const auto eq = line.find(" = ");
        out[section][line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

class Manifest {
public:
    Manifest(fs::path root, const PipelineConfig& config) : root_(std::move(root)) {
        j_["tool"] = "parcelforge";
        j_["config"] = config_json(config);
        j_["interpretations"] = {
            "SC baseline: k-means on voxel grid coordinates only",
            std::string("correlation t: ") + (config.eq6 == Eq6Form::standard ? "r sqrt(T-2)/sqrt(1-r^2)" : "r sqrt(T-2)/(1-r^2)"),
            "similarity: min of the two directed z-scored correlations",
        };
        j_["stages"] = ojson::array();
        j_["warnings"] = ojson::array();
        j_["results"] = ojson::object();
    }

    void begin(const std::string& stage) {
        ojson s;
        s["name"] = stage;
        s["artifacts"] = ojson::object();
        j_["stages"].push_back(std::move(s));
    }

    void artifact(const fs::path& path) {
        const auto rel = fs::relative(path, root_).generic_string();
        j_["stages"].back()["artifacts"][rel] = io::file_checksum(path);
    }

    void note(const std::string& key, ojson value) { j_["stages"].back()[key] = std::move(value); }
    void warn(const std::string& w) { j_["warnings"].push_back(w); }
    ojson& results() { return j_["results"]; }

    fs::path write(const std::string& status, const std::string& failed_stage = "", const std::string& error = "") {
        j_["status"] = status;
        if (!failed_stage.empty()) {
            j_["failed_stage"] = failed_stage;
            j_["error"] = error;
        }
        const auto path = root_ / "manifest.json";
        io::write_text(path, j_.dump(2) + "\n");
        return path;
    }

private:
    fs::path root_;
    ojson j_;
};

// Per-subject state carried between stages.
struct Subject {
    ICDecomposition ics;
    std::vector<int> picked;  // local IC indices feeding the seeds
    std::vector<SeedSet> seeds;
    PCAModel pca;
    TruncatedScores kept;
    Matrix X0;
    PLSModel pls;
    FeatureField features;
    StatMap glm;
    std::map<std::string, Parcellation> parcellations;  // ordered by tag
};

int best_design_match(const ICDecomposition& ics, const DesignMatrix& design) {
    int best = 0;
    double best_r = -1.0;
    for (Eigen::Index j = 0; j < ics.n_components(); ++j)
        for (Eigen::Index k = 0; k < design.n_regressors(); ++k) {
            const double r = std::abs(pearson(ics.timecourses.col(j), design.Y.col(k)));
            if (r > best_r) {
                best_r = r;
                best = static_cast<int>(j);
            }
        }
    return best;
}

}  // namespace

CohortInput from_synthetic(const SyntheticCohort& cohort) {
    CohortInput in;
    in.subjects = cohort.datasets;
    for (std::size_t i = 0; i < in.subjects.size(); ++i) in.names.push_back(subject_name(i));
    in.design = cohort.design;
    in.truth = cohort.truth_labels;
    return in;
}

void save_cohort(const fs::path& dir, const SyntheticCohort& cohort, const SyntheticCohortSpec& spec) {
    fs::create_directories(dir);
    ojson j;
    j["subjects"] = ojson::array();
    for (std::size_t i = 0; i < cohort.datasets.size(); ++i) {
        const auto name = subject_name(i);
        io::save_dataset(dir / name, cohort.datasets[i], &cohort.design);
        j["subjects"].push_back(name);
    }
    io::write_csv(dir / "design.csv", cohort.design.names, cohort.design.Y);
    write_labels_csv(dir / "truth_labels.csv", as_parcellation(cohort.truth_labels, "truth"),
                     cohort.datasets.front().grid());
    j["design"] = "design.csv";
    j["truth"] = "truth_labels.csv";
    j["per_subject_latency"] = cohort.per_subject_latency;
    j["rng_seed"] = spec.rng_seed;
    io::write_text(dir / "cohort.json", j.dump(2) + "\n");
}

CohortInput load_input(const fs::path& path) {
    if (path.empty()) throw ParameterError("missing required input: input.path (or input.synthetic = true)");
    if (!fs::exists(path)) throw ParameterError("input.path does not exist: " + path.string());

    CohortInput in;
    fs::path design_dir = path;
    if (fs::exists(path / "cohort.json")) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_text(path / "cohort.json"));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError((path / "cohort.json").string() + ": " + e.what());
        }
        if (!j.contains("subjects") || !j["subjects"].is_array() || j["subjects"].empty())
            throw FormatError((path / "cohort.json").string() + ": missing field 'subjects'");
        for (const auto& s : j["subjects"]) {
            in.names.push_back(s.get<std::string>());
            in.subjects.push_back(io::load_dataset(path / in.names.back()));
        }
        if (!fs::exists(path / "design.csv")) design_dir = path / in.names.front();
    } else if (fs::exists(path / "grid.json")) {
        in.subjects.push_back(io::load_dataset(path));
        in.names.push_back(subject_name(0));
    } else {
        throw FormatError(path.string() + ": neither cohort.json nor grid.json found");
    }

    auto design = io::load_design(design_dir);
    if (!design) throw ParameterError("missing required input: design.csv in " + design_dir.string());
    in.design = std::move(*design);

    const auto& g0 = in.subjects.front().grid();
    for (std::size_t i = 0; i < in.subjects.size(); ++i) {
        if (in.subjects[i].n_timepoints() != in.design.Y.rows())
            throw ShapeError(in.names[i] + ": " + std::to_string(in.subjects[i].n_timepoints()) +
                             " time points but the design has " + std::to_string(in.design.Y.rows()) + " rows");
        if (!(in.subjects[i].grid() == g0)) throw ShapeError(in.names[i] + ": grid differs from " + in.names[0]);
    }

    if (fs::exists(path / "truth_labels.csv")) {
        auto truth = read_labels_csv(path / "truth_labels.csv");
        if (truth.labels.size() != g0.n_voxels()) throw ShapeError("truth_labels.csv: voxel count mismatch");
        in.truth = std::move(truth.labels);
    }
    return in;
}

RunSummary run_pipeline(const PipelineConfig& config, const fs::path& out_dir, const LogFn& log_fn) {
    auto log = [&](const std::string& msg) {
        if (log_fn) log_fn(msg);
    };
    fs::create_directories(out_dir);
    Manifest manifest(out_dir, config);
    RunSummary summary;
    io::write_text(out_dir / "config.ini", to_ini(config));

    auto run = [&](const std::string& name, auto&& body) {
        log(name);
        manifest.begin(name);
        try {
            body();
        } catch (const Error& e) {
            manifest.write("failed", name, e.what());
            throw StageError(name, e);
        } catch (const std::exception& e) {
            const Error wrapped(ErrorKind::internal, e.what());
            manifest.write("failed", name, e.what());
            throw StageError(name, wrapped);
        }
    };
    auto warn = [&](const std::string& w) {
        manifest.warn(w);
        summary.warnings.push_back(w);
        log("warning: " + w);
    };

    CohortInput input;
    run("input", [&] {
        if (config.synthetic) {
            const auto cohort = generate_synthetic_cohort(config.synth);
            save_cohort(out_dir / "input", cohort, config.synth);
            for (const auto& e : fs::recursive_directory_iterator(out_dir / "input"))
                if (e.is_regular_file()) manifest.artifact(e.path());
            input = from_synthetic(cohort);
        } else {
            input = load_input(config.input_path);
        }
        manifest.note("subjects", input.names);
    });

    const std::size_t n_sub = input.subjects.size();
    const bool multi = n_sub > 1;
    const auto& grid = input.subjects.front().grid();
    std::vector<Subject> subjects(n_sub);

    run("ica", [&] {
        ojson seeds = ojson::object();
        for (std::size_t i = 0; i < n_sub; ++i) {
            const auto& ds = input.subjects[i];
            const int n = config.n_components > 0 ? config.n_components : default_ic_count(ds);
            const std::uint64_t seed = config.ica_seed + i;
            subjects[i].ics = fastica(ds, n, seed, config.fastica, static_cast<int>(i));
            const auto dir = out_dir / "ica" / input.names[i];
            fs::create_directories(dir);
            export_ics(subjects[i].ics, dir / "timecourses.csv", dir / "maps.f64");
            manifest.artifact(dir / "timecourses.csv");
            manifest.artifact(dir / "maps.f64");
            seeds[input.names[i]] = {{"n_components", n}, {"rng_seed", seed}};
        }
        manifest.note("per_subject", seeds);
    });

    run("match", [&] {
        if (!multi) {
            auto& s = subjects.front();
            if (config.ic_indices.empty()) {
                s.picked = {best_design_match(s.ics, input.design)};
                manifest.note("selection", "best |correlation| with a design regressor");
            } else {
                for (int k : config.ic_indices) {
                    if (k < 0 || k >= s.ics.n_components())
                        throw ParameterError("ica.ic_indices: " + std::to_string(k) + " is outside 0.." +
                                             std::to_string(s.ics.n_components() - 1));
                    s.picked.push_back(k);
                }
                manifest.note("selection", "manual");
            }
            manifest.note("picked", {{input.names.front(), s.picked}});
            return;
        }
        if (!config.ic_indices.empty()) throw ParameterError("ica.ic_indices only applies to single-subject input");

        std::vector<ICDecomposition> cohort;
        for (const auto& s : subjects) cohort.push_back(s.ics);
        const auto sim = similarity_matrix(cohort, config.mode);
        auto clustering = ward_cluster(sim, config.n_clusters);
        const auto selected = select_task_clusters(clustering, cohort, input.design, config.n_select);

        const auto dir = out_dir / "match";
        fs::create_directories(dir);
        io::write_f64(dir / "similarity.f64", sim.S);
        Matrix rows(static_cast<Eigen::Index>(sim.owner.size()), 4);
        for (std::size_t m = 0; m < sim.owner.size(); ++m)
            rows.row(static_cast<Eigen::Index>(m)) << static_cast<double>(m), sim.owner[m], sim.local_index[m],
                clustering.labels[m];
        io::write_csv(dir / "clusters.csv", {"pooled", "subject", "local", "cluster"}, rows);
        manifest.artifact(dir / "similarity.f64");
        manifest.artifact(dir / "clusters.csv");

        ojson picks = ojson::object();
        for (std::size_t i = 0; i < n_sub; ++i) {
            ojson list = ojson::array();
            for (const auto& p : ics_for_subject(static_cast<int>(i), clustering, sim, selected)) {
                const int local = sim.local_index[static_cast<std::size_t>(p.pooled_index)];
                subjects[i].picked.push_back(local);
                list.push_back({{"cluster", p.cluster}, {"ic", local}, {"fallback", p.fallback}});
                if (p.fallback) warn(input.names[i] + " has no IC in cluster " + std::to_string(p.cluster) +
                                     "; using its closest IC");
            }
            picks[input.names[i]] = list;
        }
        ojson scores = ojson::array();
        for (Eigen::Index c = 0; c < clustering.cluster_task_scores.rows(); ++c) {
            std::vector<double> row(clustering.cluster_task_scores.cols());
            for (Eigen::Index k = 0; k < clustering.cluster_task_scores.cols(); ++k)
                row[static_cast<std::size_t>(k)] = clustering.cluster_task_scores(c, k);
            scores.push_back(row);
        }
        ojson sel;
        sel["selected_clusters"] = selected;
        sel["cluster_task_scores"] = scores;
        sel["picks"] = picks;
        io::write_text(dir / "selection.json", sel.dump(2) + "\n");
        manifest.artifact(dir / "selection.json");
    });

    run("seeds", [&] {
        const int n_seeds =
            config.n_seeds > 0 ? config.n_seeds : (multi ? kSeedsPerMapMultiSubject : kSeedsPerMapSingleSubject);
        fs::create_directories(out_dir / "seeds");
        for (std::size_t i = 0; i < n_sub; ++i) {
            auto& s = subjects[i];
            for (int k : s.picked) {
                auto set = select_seeds(s.ics.maps.row(k).transpose(), grid, config.seed_radius, n_seeds, k);
                if (set.exhausted)
                    warn(input.names[i] + " IC " + std::to_string(k) + ": only " +
                         std::to_string(set.voxel_rows.size()) + " seeds fit at radius " + num(config.seed_radius));
                s.seeds.push_back(std::move(set));
            }
            const auto path = out_dir / "seeds" / (input.names[i] + ".csv");
            write_seeds_csv(path, s.seeds, grid);
            manifest.artifact(path);
        }
        manifest.note("n_seeds_per_map", n_seeds);
    });

    const std::string pls_tag = "PLS" + std::to_string(config.n_latents);
    run("pls", [&] {
        for (std::size_t i = 0; i < n_sub; ++i) {
            auto& s = subjects[i];
            const auto& ds = input.subjects[i];
            const Matrix Xc = center_rows(ds.X());
            s.X0 = unit_normalize_rows(Xc).X0;
            s.pca = pca_decompose(Xc);
            s.kept = truncate(s.pca, config.truncation);
            const auto D = build_seed_matrix(ds, s.seeds);
            if (D.duplicates > 0)
                warn(input.names[i] + ": " + std::to_string(D.duplicates) + " duplicate seed voxels across maps");
            s.pls = pls_fit(s.kept.scores, D.D, config.n_latents);
            s.features = covariance_features(s.X0, s.pls);

            const auto dir = out_dir / "pls" / input.names[i];
            fs::create_directories(dir);
            io::write_f64(dir / "features.f64", s.features.R);
            ojson meta;
            meta["columns"] = s.features.R.cols();
            meta["rows"] = s.features.R.rows();
            meta["provenance"] = pls_tag;
            meta["seed_maps"] = s.picked;
            meta["n_seed_signals"] = D.D.cols();
            meta["pca_kept"] = s.kept.kept.size();
            meta["power_iterations"] = s.pls.power_iterations;
            io::write_text(dir / "features.json", meta.dump(2) + "\n");
            manifest.artifact(dir / "features.json");
            std::vector<std::string> names;
            for (Eigen::Index k = 0; k < s.pls.n_latents(); ++k) names.push_back("t" + std::to_string(k + 1));
            io::write_csv(dir / "latents.csv", names, s.pls.latents);
            manifest.artifact(dir / "features.f64");
            manifest.artifact(dir / "latents.csv");
        }
    });

    run("parcellate", [&] {
        const auto V = grid.n_voxels();
        if (static_cast<std::size_t>(config.n_parcels) * 2 > V)
            warn("parcellate.n_parcels = " + std::to_string(config.n_parcels) + " exceeds half the voxel count (" +
                 std::to_string(V) + ")");
        ParcellateOptions opts;
        opts.n_parcels = config.n_parcels;
        opts.embed_dims = std::min<int>(config.embed_dims, static_cast<int>(V) - 1);
        opts.rng_seed = config.parcel_seed;
        opts.kmeans = config.kmeans;
        if (opts.embed_dims != config.embed_dims)
            warn("parcellate.embed_dims capped at " + std::to_string(opts.embed_dims));

        for (std::size_t i = 0; i < n_sub; ++i) {
            auto& s = subjects[i];
            s.glm = glm_tvalues(input.subjects[i].X(), input.design);
            s.parcellations[pls_tag] = parcellate_pipeline(s.features.R, grid, opts, pls_tag);
            s.parcellations["GLM"] = parcellate_pipeline(s.glm.t, grid, opts, "GLM");
            s.parcellations["SC"] = spatial_baseline(grid, config.n_parcels, config.parcel_seed, config.kmeans);
            if (const auto& pp = s.parcellations[pls_tag]; pp.mask_components > 1)
                warn(input.names[i] + ": mask has " + std::to_string(pp.mask_components) +
                     " disconnected components; unreachable pairs use geodesic distance " + std::to_string(pp.surrogate));

            const auto dir = out_dir / "parcellate" / input.names[i];
            fs::create_directories(dir);
            for (const auto& [tag, parc] : s.parcellations) {
                write_labels_csv(dir / ("labels_" + tag + ".csv"), parc, grid);
                Matrix volume = Matrix::Constant(static_cast<Eigen::Index>(grid.n_cells()), 1, -1.0);
                for (std::size_t r = 0; r < V; ++r)
                    volume(static_cast<Eigen::Index>(grid.cell_of_row(r)), 0) = parc.labels[r];
                io::write_f64(dir / ("labels_" + tag + "_volume.f64"), volume);
                manifest.artifact(dir / ("labels_" + tag + ".csv"));
                manifest.artifact(dir / ("labels_" + tag + "_volume.f64"));
            }
        }
        manifest.note("embed_dims", opts.embed_dims);
    });

    run("evaluate", [&] {
        std::map<std::string, ParcelVarianceReport> pooled;  // key: stat/method
        std::vector<std::string> order;
        for (std::size_t i = 0; i < n_sub; ++i) {
            auto& s = subjects[i];
            const auto dir = out_dir / "evaluate" / input.names[i];
            fs::create_directories(dir);
            const auto pls_t = pls_tmap(s.X0, input.design, s.kept.scores, config.eq6);
            write_statmap(dir, s.glm);
            write_statmap(dir, pls_t);
            for (const char* ext : {".f64", ".json"}) {
                manifest.artifact(dir / (std::string("tmap_glm") + ext));
                manifest.artifact(dir / (std::string("tmap_pls") + ext));
            }

            std::vector<ParcelVarianceReport> reports;
            ojson subject_results;
            for (const StatMap* stat : {static_cast<const StatMap*>(&s.glm), &pls_t}) {
                for (const auto& tag : {pls_tag, std::string("GLM"), std::string("SC")}) {
                    const auto method = std::string(to_string(stat->kind)) + "_t/" + tag;
                    reports.push_back(intra_parcel_variance(*stat, s.parcellations.at(tag), method));
                    auto& acc = pooled[method];
                    if (acc.method.empty()) {
                        acc.method = method;
                        order.push_back(method);
                    }
                    acc.v.insert(acc.v.end(), reports.back().v.begin(), reports.back().v.end());
                }
            }
            write_variance_report_csv(dir / "variance.csv", reports);
            write_comparison_csv(dir / "comparison.csv", compare_methods(reports));
            manifest.artifact(dir / "variance.csv");
            manifest.artifact(dir / "comparison.csv");

            ojson active;
            for (Eigen::Index k = 0; k < input.design.n_regressors(); ++k) {
                const auto& name = input.design.names[static_cast<std::size_t>(k)];
                active["glm"][name] = active_parcels(s.glm, s.parcellations.at("GLM"), k, config.glm_threshold);
                active["pls"][name] = active_parcels(pls_t, s.parcellations.at(pls_tag), k, config.pls_threshold);
            }
            io::write_text(dir / "active_parcels.json", active.dump(2) + "\n");
            manifest.artifact(dir / "active_parcels.json");

            for (const auto& r : reports) subject_results["mean_v"][r.method] = r.mean;
            if (!input.truth.empty())
                for (const auto& [tag, parc] : s.parcellations)
                    subject_results["adjusted_rand"][tag] = adjusted_rand(parc.labels, input.truth);
            subject_results["glm_saturated"] = s.glm.saturated;
            subject_results["pls_saturated"] = pls_t.saturated;
            manifest.results()[input.names[i]] = subject_results;
        }

        std::vector<ParcelVarianceReport> all;
        for (const auto& m : order) {
            auto r = pooled.at(m);
            summarize(r);
            all.push_back(std::move(r));
        }
        write_comparison_csv(out_dir / "evaluate" / "comparison.csv", compare_methods(all));
        manifest.artifact(out_dir / "evaluate" / "comparison.csv");
    });

    summary.manifest = manifest.write("ok");
    return summary;
}

}  // namespace parcelforge
