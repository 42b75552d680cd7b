#include "parcelforge/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

#include "json.hpp"
#include "parcelforge/error.hpp"
#include "parcelforge/io.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/stats.hpp"

namespace parcelforge {

StatMap glm_tvalues(const Matrix& X, const DesignMatrix& design, kernels::Exec exec) {
    const Eigen::Index T = X.cols();
    const Eigen::Index R = design.n_regressors();
    if (design.Y.rows() != T)
        throw ShapeError("design has " + std::to_string(design.Y.rows()) + " rows, data has " + std::to_string(T) +
                         " time points");
    if (T <= R + 1) throw ParameterError("GLM needs T > N_r + 1");
    Matrix full(T, R + 1);
    full.col(0).setOnes();
    full.rightCols(R) = design.Y;
    kernels::OlsResult r;
    try {
        r = exec == kernels::Exec::parallel ? kernels::ols_tvalues(X, full) : kernels::serial::ols_tvalues(X, full);
    } catch (const DegenerateError&) {
        throw DegenerateError("design matrix (with intercept) is rank deficient");
    }
    return {std::move(r.t), StatKind::glm, static_cast<int>(T - R - 1), r.saturated, design.names};
}

double pls_tvalue(double r, int n_timepoints, Eq6Form form) {
    if (!(std::abs(r) < 1.0)) throw DomainError("correlation-t needs |r| < 1, got " + std::to_string(r));
    if (n_timepoints < 3) throw ParameterError("correlation-t needs at least 3 time points");
    const double num = r * std::sqrt(static_cast<double>(n_timepoints - 2));
    const double den = form == Eq6Form::standard ? std::sqrt(1.0 - r * r) : 1.0 - r * r;
    return num / den;
}

StatMap pls_tmap(const Matrix& X0, const DesignMatrix& design, const Matrix& scores, Eq6Form form,
                 kernels::Exec exec) {
    const Eigen::Index T = X0.cols();
    if (scores.cols() != T || design.Y.rows() != T) throw ShapeError("PLS t-map inputs disagree on T");
    const Eigen::Index R = design.n_regressors();
    // Orthonormal basis of the score row space. With raw PCA scores the first
    // latent is E*E'*y, weighted by component variance; on the whitened basis
    // it is the projection of y, which is what the correlation-t reading needs.
    Eigen::ColPivHouseholderQR<Matrix> qr(scores.transpose());
    if (qr.rank() == 0) throw DegenerateError("PLS t-map: score matrix has rank 0");
    const Matrix basis = Matrix(qr.householderQ() * Matrix::Identity(T, qr.rank())).transpose();
    Matrix latents(T, R);
    for (Eigen::Index k = 0; k < R; ++k) latents.col(k) = pls_fit(basis, design.Y.col(k), 1).latents.col(0);

    const Matrix corr = exec == kernels::Exec::parallel ? kernels::row_products(X0, latents)
                                                        : kernels::serial::row_products(X0, latents);
    StatMap out{Matrix(X0.rows(), R), StatKind::pls, static_cast<int>(T - 2), 0, design.names};
    for (Eigen::Index k = 0; k < R; ++k)
        for (Eigen::Index v = 0; v < X0.rows(); ++v) {
            double r = corr(v, k);
            if (std::abs(r) > kMaxAbsCorrelation) {
                r = std::copysign(kMaxAbsCorrelation, r);
                ++out.saturated;
            }
            out.t(v, k) = pls_tvalue(r, static_cast<int>(T), form);
        }
    return out;
}

ParcelVarianceReport intra_parcel_variance(const StatMap& stat, const Parcellation& parc, const std::string& method) {
    if (static_cast<Eigen::Index>(parc.labels.size()) != stat.t.rows())
        throw ShapeError("parcellation and stat map cover different voxel counts");
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(parc.n_parcels));
    for (std::size_t i = 0; i < parc.labels.size(); ++i) {
        const int l = parc.labels[i];
        if (l < 0 || l >= parc.n_parcels) throw ShapeError("label out of range: " + std::to_string(l));
        members[static_cast<std::size_t>(l)].push_back(static_cast<Eigen::Index>(i));
    }
    ParcelVarianceReport rep;
    rep.method = method;
    std::vector<double> column;
    for (const auto& m : members) {
        if (m.size() < 2) {
            if (m.size() == 1) ++rep.singletons;
            rep.v.push_back(0.0);
            continue;
        }
        double acc = 0.0;
        for (Eigen::Index k = 0; k < stat.t.cols(); ++k) {
            column.clear();
            for (auto i : m) column.push_back(stat.t(i, k));
            const double sd = sample_std(column);
            acc += sd * sd;
        }
        rep.v.push_back(std::sqrt(acc));
    }
    summarize(rep);
    return rep;
}

void summarize(ParcelVarianceReport& rep) {
    if (rep.v.empty()) throw ParameterError("variance report '" + rep.method + "' has no parcels");
    rep.mean = mean(rep.v);
    rep.q1 = quantile_linear(rep.v, 0.25);
    rep.median = quantile_linear(rep.v, 0.5);
    rep.q3 = quantile_linear(rep.v, 0.75);
}

double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ShapeError("labelings differ in length");
    const auto n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [k, v] : cells) index += pairs(v);
    for (const auto& [k, v] : rows) sum_a += pairs(v);
    for (const auto& [k, v] : cols) sum_b += pairs(v);
    const double expected = sum_a * sum_b / pairs(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both trivial partitions
    return (index - expected) / (max_index - expected);
}

std::vector<MethodSummary> compare_methods(const std::vector<ParcelVarianceReport>& reports) {
    if (reports.size() < 2) throw ParameterError("comparison needs at least two reports");
    std::vector<MethodSummary> out;
    for (const auto& r : reports) out.push_back({r.method, r.mean, r.q1, r.q3});
    return out;
}

std::vector<int> active_parcels(const StatMap& stat, const Parcellation& parc, Eigen::Index regressor,
                                double threshold) {
    if (regressor < 0 || regressor >= stat.t.cols()) throw ParameterError("regressor index out of range");
    std::vector<double> sum(static_cast<std::size_t>(parc.n_parcels), 0.0);
    std::vector<int> count(static_cast<std::size_t>(parc.n_parcels), 0);
    for (std::size_t i = 0; i < parc.labels.size(); ++i) {
        sum[static_cast<std::size_t>(parc.labels[i])] += stat.t(static_cast<Eigen::Index>(i), regressor);
        ++count[static_cast<std::size_t>(parc.labels[i])];
    }
    std::vector<int> out;
    for (int p = 0; p < parc.n_parcels; ++p)
        if (count[static_cast<std::size_t>(p)] > 0 &&
            sum[static_cast<std::size_t>(p)] / count[static_cast<std::size_t>(p)] > threshold)
            out.push_back(p);
    return out;
}

void write_statmap(const std::filesystem::path& dir, const StatMap& stat) {
    std::filesystem::create_directories(dir);
    const std::string base = std::string("tmap_") + to_string(stat.kind);
    io::write_f64(dir / (base + ".f64"), stat.t);
    nlohmann::ordered_json j;
    j["kind"] = to_string(stat.kind);
    j["n_voxels"] = stat.t.rows();
    j["regressors"] = stat.regressors;
    j["dof"] = stat.dof;
    j["saturated"] = stat.saturated;
    io::write_text(dir / (base + ".json"), j.dump(2) + "\n");
}

void write_variance_report_csv(const std::filesystem::path& path, const std::vector<ParcelVarianceReport>& reports) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "method,parcel,v\n" << std::setprecision(17);
    for (const auto& r : reports)
        for (std::size_t p = 0; p < r.v.size(); ++p) out << r.method << ',' << p << ',' << r.v[p] << '\n';
}

std::vector<ParcelVarianceReport> read_variance_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "method,parcel,v")
        throw FormatError(path.string() + ": expected header method,parcel,v");
    std::vector<ParcelVarianceReport> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(','), c2 = line.rfind(',');
        if (c1 == std::string::npos || c1 == c2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
        const auto method = line.substr(0, c1);
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(line.substr(c2 + 1), &used);
            if (used != line.size() - c2 - 1) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad value");
        }
        if (out.empty() || out.back().method != method) {
            out.emplace_back();
            out.back().method = method;
        }
        out.back().v.push_back(v);
    }
    for (auto& r : out) summarize(r);
    return out;
}

void write_comparison_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "method,mean,q1,q3\n" << std::setprecision(17);
    for (const auto& r : rows) out << r.method << ',' << r.mean << ',' << r.q1 << ',' << r.q3 << '\n';
}

}  // namespace parcelforge
