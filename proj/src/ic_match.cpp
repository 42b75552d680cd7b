#include "parcelforge/ic_match.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "parcelforge/error.hpp"
#include "parcelforge/stats.hpp"

namespace parcelforge {

double ic_correlation(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) { return pearson(a, b); }

Vector normalized_correlation(const Eigen::Ref<const Vector>& rho) {
    const Eigen::Index n = rho.size();
    if (n < 2) throw DegenerateError("normalised correlation needs at least two ICs in the other subject");
    const double m = rho.mean();
    const double sd = std::sqrt((rho.array() - m).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw DegenerateError("normalised correlation: all correlations are equal (zero std)");
    return (rho.array() - m) / sd;
}

Vector normalized_correlation(const Eigen::Ref<const Vector>& ic, const Matrix& other_timecourses,
                              CorrelationMode mode) {
    Vector rho(other_timecourses.cols());
    for (Eigen::Index j = 0; j < rho.size(); ++j) {
        rho[j] = ic_correlation(ic, other_timecourses.col(j));
        if (mode == CorrelationMode::absolute) rho[j] = std::abs(rho[j]);
    }
    return normalized_correlation(rho);
}

ICSimilarity similarity_matrix(const std::vector<ICDecomposition>& cohort, CorrelationMode mode,
                               kernels::Exec exec) {
    if (cohort.size() < 2) throw ParameterError("IC similarity needs at least two subjects");
    const Eigen::Index T = cohort.front().timecourses.rows();
    Eigen::Index M = 0;
    for (const auto& s : cohort) {
        if (s.timecourses.rows() != T) throw ShapeError("subjects have different numbers of time points");
        if (s.n_components() < 2)
            throw ParameterError("subject " + std::to_string(s.subject_id) + " has fewer than two ICs");
        M += s.n_components();
    }

    ICSimilarity sim;
    Matrix pooled(T, M);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;  // [begin, end) per subject
    Eigen::Index at = 0;
    for (const auto& s : cohort) {
        pooled.middleCols(at, s.n_components()) = s.timecourses;
        blocks.emplace_back(at, at + s.n_components());
        for (Eigen::Index j = 0; j < s.n_components(); ++j) {
            sim.owner.push_back(s.subject_id);
            sim.local_index.push_back(static_cast<int>(j));
        }
        at += s.n_components();
    }

    Matrix rho;
    try {
        rho = exec == kernels::Exec::parallel ? kernels::column_correlations(pooled)
                                              : kernels::serial::column_correlations(pooled);
    } catch (const DegenerateError& e) {
        throw DegenerateError(std::string("IC similarity: ") + e.what() + " (pooled index)");
    }
    if (mode == CorrelationMode::absolute) rho = rho.cwiseAbs();

    // directed(i, j): z-score of rho(i, j) among the ICs of j's subject.
    Matrix directed = Matrix::Zero(M, M);
    for (Eigen::Index i = 0; i < M; ++i) {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto [begin, end] = blocks[b];
            if (i >= begin && i < end) continue;
            try {
                directed.row(i).segment(begin, end - begin) =
                    normalized_correlation(rho.row(i).segment(begin, end - begin).transpose()).transpose();
            } catch (const DegenerateError& e) {
                throw DegenerateError("IC pair (pooled " + std::to_string(i) + ", subject " +
                                      std::to_string(cohort[b].subject_id) + "): " + e.what());
            }
        }
    }

    sim.S = Matrix::Zero(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = i + 1; j < M; ++j) {
            if (sim.owner[static_cast<std::size_t>(i)] == sim.owner[static_cast<std::size_t>(j)]) continue;
            sim.S(i, j) = sim.S(j, i) = std::min(directed(i, j), directed(j, i));
        }
    return sim;
}

ICClustering ward_cluster(const ICSimilarity& sim, int n_clusters) {
    const Eigen::Index M = sim.S.rows();
    if (n_clusters < 1 || n_clusters > M)
        throw ParameterError("n_clusters must lie in [1, " + std::to_string(M) + "], got " + std::to_string(n_clusters));

    const double smax = sim.S.maxCoeff();
    Matrix d = (smax - sim.S.array()).matrix();
    d.diagonal().setZero();

    std::vector<double> size(static_cast<std::size_t>(M), 1.0);
    std::vector<char> active(static_cast<std::size_t>(M), 1);
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(M));
    for (Eigen::Index i = 0; i < M; ++i) parent[static_cast<std::size_t>(i)] = i;

    using Key = std::tuple<double, Eigen::Index, Eigen::Index>;
    auto key = [&](Eigen::Index i, Eigen::Index j) { return Key{d(i, j), std::min(i, j), std::max(i, j)}; };
    std::vector<Eigen::Index> nn(static_cast<std::size_t>(M), -1);
    auto rescan = [&](Eigen::Index i) {
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < M; ++j) {
            if (j == i || !active[static_cast<std::size_t>(j)]) continue;
            if (best < 0 || key(i, j) < key(i, best)) best = j;
        }
        nn[static_cast<std::size_t>(i)] = best;
    };
    for (Eigen::Index i = 0; i < M; ++i) rescan(i);

    for (Eigen::Index remaining = M; remaining > n_clusters; --remaining) {
        Eigen::Index a = -1;
        for (Eigen::Index i = 0; i < M; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            if (a < 0 || key(i, nn[static_cast<std::size_t>(i)]) < key(a, nn[static_cast<std::size_t>(a)])) a = i;
        }
        Eigen::Index b = nn[static_cast<std::size_t>(a)];
        if (b < a) std::swap(a, b);

        const double na = size[static_cast<std::size_t>(a)];
        const double nb = size[static_cast<std::size_t>(b)];
        const double dab = d(a, b);
        for (Eigen::Index k = 0; k < M; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a || k == b) continue;
            const double nk = size[static_cast<std::size_t>(k)];
            d(a, k) = d(k, a) = ((na + nk) * d(a, k) + (nb + nk) * d(b, k) - nk * dab) / (na + nb + nk);
        }
        size[static_cast<std::size_t>(a)] = na + nb;
        active[static_cast<std::size_t>(b)] = 0;
        parent[static_cast<std::size_t>(b)] = a;

        rescan(a);
        for (Eigen::Index k = 0; k < M; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a) continue;
            const Eigen::Index cur = nn[static_cast<std::size_t>(k)];
            if (cur == a || cur == b)
                rescan(k);
            else if (key(k, a) < key(k, cur))
                nn[static_cast<std::size_t>(k)] = a;
        }
    }

    // Slot index of each cluster is its smallest member; number clusters in that order.
    auto root = [&](Eigen::Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
        return i;
    };
    std::map<Eigen::Index, int> id_of_root;
    ICClustering out;
    out.labels.resize(static_cast<std::size_t>(M));
    for (Eigen::Index i = 0; i < M; ++i) {
        const auto r = root(i);
        auto [it, inserted] = id_of_root.emplace(r, static_cast<int>(id_of_root.size()));
        out.labels[static_cast<std::size_t>(i)] = it->second;
    }
    out.n_clusters = n_clusters;
    return out;
}

std::vector<int> select_task_clusters(ICClustering& clustering, const std::vector<ICDecomposition>& cohort,
                                      const DesignMatrix& design, int n_select) {
    if (n_select < 1 || n_select > clustering.n_clusters)
        throw ParameterError("n_select must lie in [1, n_clusters]");
    std::vector<Vector> pooled;
    for (const auto& s : cohort) {
        if (s.timecourses.rows() != design.Y.rows())
            throw ShapeError("design has " + std::to_string(design.Y.rows()) + " rows but subject " +
                             std::to_string(s.subject_id) + " ICs have " + std::to_string(s.timecourses.rows()));
        for (Eigen::Index j = 0; j < s.n_components(); ++j) pooled.emplace_back(s.timecourses.col(j));
    }
    if (pooled.size() != clustering.labels.size()) throw ShapeError("clustering does not match the cohort ICs");

    const Eigen::Index R = design.n_regressors();
    Matrix sums = Matrix::Zero(clustering.n_clusters, R);
    std::vector<int> counts(static_cast<std::size_t>(clustering.n_clusters), 0);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const int c = clustering.labels[i];
        ++counts[static_cast<std::size_t>(c)];
        for (Eigen::Index k = 0; k < R; ++k) sums(c, k) += std::abs(pearson(pooled[i], design.Y.col(k)));
    }
    clustering.cluster_task_scores = Matrix::Zero(clustering.n_clusters, R);
    std::vector<std::pair<double, int>> ranked;
    for (int c = 0; c < clustering.n_clusters; ++c) {
        clustering.cluster_task_scores.row(c) = sums.row(c) / std::max(1, counts[static_cast<std::size_t>(c)]);
        ranked.emplace_back(clustering.cluster_task_scores.row(c).maxCoeff(), c);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<int> out;
    for (int k = 0; k < n_select; ++k) out.push_back(ranked[static_cast<std::size_t>(k)].second);
    return out;
}

std::vector<ClusterPick> ics_for_subject(int subject_id, const ICClustering& clustering, const ICSimilarity& sim,
                                         const std::vector<int>& selected_clusters) {
    if (selected_clusters.empty()) throw ParameterError("no clusters selected");
    const auto M = static_cast<Eigen::Index>(clustering.labels.size());
    std::vector<ClusterPick> out;
    for (int c : selected_clusters) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < M; ++i)
            if (clustering.labels[static_cast<std::size_t>(i)] == c) members.push_back(i);

        auto mean_similarity = [&](Eigen::Index i) {
            double s = 0.0;
            int n = 0;
            for (auto m : members) {
                if (m == i) continue;
                s += sim.S(i, m);
                ++n;
            }
            return n ? s / n : 0.0;
        };

        bool has_member = false;
        for (auto m : members)
            if (sim.owner[static_cast<std::size_t>(m)] == subject_id) has_member = true;

        Eigen::Index best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < M; ++i) {
            if (sim.owner[static_cast<std::size_t>(i)] != subject_id) continue;
            if (has_member && clustering.labels[static_cast<std::size_t>(i)] != c) continue;
            const double score = mean_similarity(i);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best < 0) throw ParameterError("subject " + std::to_string(subject_id) + " has no ICs");
        out.push_back({c, static_cast<int>(best), !has_member});
    }
    return out;
}

}  // namespace parcelforge
