#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drsim/causality.hpp"
#include "drsim/core.hpp"
#include "drsim/dataio.hpp"

/**
 * @file clustering.hpp
 * @brief Profile matrix, non-negative factorisation, k-medoids and the
 * Calinski-Harabasz comparison of clusterings.
 */

namespace drsim::clustering {

// ---------------------------------------------------------------------------
// Profile matrix

struct ProfileMatrix {
    Matrix values;                      ///< kept households x (H * 3), blocks Low | Normal | High
    Vector base_scale;                  ///< mean Normal-tariff profile per kept household
    std::vector<std::size_t> rows;      ///< input index of each kept household
    std::vector<std::size_t> excluded;  ///< inputs dropped for a non-positive base scale
    std::size_t clamped_entries = 0;    ///< negative fitted means set to zero
};

inline ProfileMatrix build_profile_matrix(std::span<const causality::TariffResponseProfile> profiles) {
    ProfileMatrix pm;
    std::vector<Vector> kept;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& prof = profiles[i];
        const Eigen::Index nh = prof.mean(Tariff::Normal).size();
        const double base = prof.mean(Tariff::Normal).mean();
        if (!(base > 0.0)) {
            pm.excluded.push_back(i);
            continue;
        }
        Vector row(3 * nh);
        for (Tariff p : kTouTariffs) row.segment(tariff_index(p) * nh, nh) = prof.mean(p) / base;
        for (double& v : row)
            if (v < 0.0) {
                v = 0.0;
                ++pm.clamped_entries;
            }
        kept.push_back(std::move(row));
        pm.rows.push_back(i);
    }
    if (kept.empty()) throw ValidationError("no household with a positive base consumption");
    pm.values.resize(static_cast<Eigen::Index>(kept.size()), kept.front().size());
    pm.base_scale.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        pm.values.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
        pm.base_scale[static_cast<Eigen::Index>(i)] = profiles[pm.rows[i]].mean(Tariff::Normal).mean();
    }
    return pm;
}

// ---------------------------------------------------------------------------
// Non-negative matrix factorisation

struct NmfSettings {
    int rank = 5;
    int max_iter = 500;
    double tol = 1e-5;
    std::uint64_t seed = 0;
};

struct NmfFactors {
    Matrix w;                     ///< rows x rank
    Matrix h;                     ///< rank x cols
    double error = 0.0;           ///< final Frobenius norm of M - WH
    std::vector<double> history;  ///< error after initialisation and after every iteration
    int iterations = 0;
};

/// Lee-Seung multiplicative updates for min ||M - WH||_F with W, H >= 0.
inline NmfFactors nmf_factorize(const Matrix& m, const NmfSettings& settings = {}) {
    const Eigen::Index n = m.rows(), c = m.cols(), r = settings.rank;
    if (!m.allFinite()) throw ValidationError("NMF input has non-finite entries");
    if ((m.array() < 0.0).any()) throw ValidationError("NMF input has negative entries");
    if (r < 1 || r > std::min(n, c)) throw ConfigError("NMF rank " + std::to_string(r) + " outside 1.." + std::to_string(std::min(n, c)));

    Rng rng(settings.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(std::max(m.mean(), 0.0) / static_cast<double>(r));
    NmfFactors f;
    f.w.resize(n, r);
    f.h.resize(r, c);
    for (Eigen::Index i = 0; i < f.w.size(); ++i) f.w.data()[i] = std::abs(normal(rng)) * scale;
    for (Eigen::Index i = 0; i < f.h.size(); ++i) f.h.data()[i] = std::abs(normal(rng)) * scale;

    auto update = [](Matrix& target, const Matrix& num, const Matrix& den) {
        for (Eigen::Index i = 0; i < target.size(); ++i)
            if (den.data()[i] > 0.0) target.data()[i] *= num.data()[i] / den.data()[i];
    };
    double err = (m - f.w * f.h).norm();
    f.history.push_back(err);
    for (int it = 0; it < settings.max_iter; ++it) {
        update(f.h, f.w.transpose() * m, (f.w.transpose() * f.w) * f.h);
        update(f.w, m * f.h.transpose(), f.w * (f.h * f.h.transpose()));
        const double next = (m - f.w * f.h).norm();
        f.history.push_back(next);
        f.iterations = it + 1;
        const double improvement = err > 0.0 ? (err - next) / err : 0.0;
        err = next;
        if (improvement < settings.tol) break;
    }
    f.error = err;
    return f;
}

// ---------------------------------------------------------------------------
// Clusterings

struct Clustering {
    int k = 0;
    std::vector<int> labels;   ///< cluster of each row, 0..k-1
    std::vector<int> medoids;  ///< row index of each cluster's medoid (empty when not medoid based)
    double cost = 0.0;         ///< total distance to the assigned medoid
    double build_cost = 0.0;   ///< cost after the greedy build phase
};

inline Matrix euclidean_distances(const Matrix& points) {
    const Eigen::Index n = points.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    return d;
}

namespace detail {

inline Eigen::Index distinct_rows(const Matrix& points) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(points.cols()));
        for (Eigen::Index j = 0; j < points.cols(); ++j) r[static_cast<std::size_t>(j)] = points(i, j);
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end());
    return static_cast<Eigen::Index>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

inline double total_cost(const Matrix& d, const std::vector<int>& medoids) {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int m : medoids) best = std::min(best, d(i, m));
        cost += best;
    }
    return cost;
}

}  // namespace detail

/// Labels every row with its nearest medoid; on equal distance the lower medoid index wins.
inline std::vector<int> assign_to_medoids(const Matrix& distances, std::span<const int> medoids) {
    std::vector<int> labels(static_cast<std::size_t>(distances.rows()), 0);
    for (Eigen::Index i = 0; i < distances.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < medoids.size(); ++c)
            if (distances(i, medoids[c]) < best) {
                best = distances(i, medoids[c]);
                labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
            }
    }
    for (std::size_t c = 0; c < medoids.size(); ++c) labels[static_cast<std::size_t>(medoids[c])] = static_cast<int>(c);
    return labels;
}

/**
 * Partitioning around medoids (greedy BUILD, then best-improvement SWAP until no swap
 * lowers the cost) on Euclidean distances. Deterministic: no random element is involved.
 * Clusters are numbered by increasing medoid row index.
 */
inline Clustering kmedoids(const Matrix& points, int k) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n) throw ConfigError("k-medoids needs 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
    if (detail::distinct_rows(points) < k)
        throw ValidationError("k-medoids: only " + std::to_string(detail::distinct_rows(points)) + " distinct rows for k = " + std::to_string(k));
    const Matrix d = euclidean_distances(points);

    std::vector<int> medoids;
    Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (int c = 0; c < k; ++c) {
        int pick = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index cand = 0; cand < n; ++cand) {
            if (std::find(medoids.begin(), medoids.end(), cand) != medoids.end()) continue;
            double cost = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) cost += std::min(nearest[i], d(i, cand));
            if (cost < best) {
                best = cost;
                pick = static_cast<int>(cand);
            }
        }
        medoids.push_back(pick);
        for (Eigen::Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d(i, pick));
    }

    Clustering out;
    out.k = k;
    out.build_cost = detail::total_cost(d, medoids);
    double cost = out.build_cost;
    while (true) {
        double best = cost;
        int best_slot = -1, best_cand = -1;
        for (int slot = 0; slot < k; ++slot)
            for (Eigen::Index cand = 0; cand < n; ++cand) {
                if (std::find(medoids.begin(), medoids.end(), cand) != medoids.end()) continue;
                auto trial = medoids;
                trial[static_cast<std::size_t>(slot)] = static_cast<int>(cand);
                const double c = detail::total_cost(d, trial);
                if (c < best - 1e-12 * std::max(1.0, cost)) {
                    best = c;
                    best_slot = slot;
                    best_cand = static_cast<int>(cand);
                }
            }
        if (best_slot < 0) break;
        medoids[static_cast<std::size_t>(best_slot)] = best_cand;
        cost = best;
    }
    std::sort(medoids.begin(), medoids.end());
    out.medoids = medoids;
    out.labels = assign_to_medoids(d, medoids);
    out.cost = detail::total_cost(d, medoids);
    return out;
}

/// Independent uniform labels in 0..k-1.
inline Clustering random_clustering(std::size_t households, int k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("random clustering needs k >= 1");
    Rng rng(seed);
    Clustering c;
    c.k = k;
    c.labels.resize(households);
    for (auto& l : c.labels) l = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    return c;
}

// ---------------------------------------------------------------------------
// Classical features

inline constexpr int kClassicalFeatureCount = 8;

inline bool is_hot_month(unsigned month) { return month >= 4 && month <= 9; }

/**
 * min, mean, max consumption over the hot months (April to September), the same over the
 * cold months, then the average half-hour of the daily peak and of the daily trough,
 * rescaled to [0, 1]. A season without days falls back to the whole record.
 */
inline Vector classical_features(const Matrix& consumption, std::span<const Date> dates) {
    if (static_cast<std::size_t>(consumption.rows()) != dates.size()) throw ValidationError("one date per consumption row required");
    if (consumption.rows() == 0) throw ValidationError("classical features need at least one day");
    Vector f(kClassicalFeatureCount);
    for (int season = 0; season < 2; ++season) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
        std::size_t count = 0;
        for (int pass = 0; pass < 2 && count == 0; ++pass)
            for (Eigen::Index t = 0; t < consumption.rows(); ++t) {
                if (pass == 0 && is_hot_month(month_of(dates[static_cast<std::size_t>(t)])) != (season == 0)) continue;
                lo = std::min(lo, consumption.row(t).minCoeff());
                hi = std::max(hi, consumption.row(t).maxCoeff());
                sum += consumption.row(t).sum();
                count += static_cast<std::size_t>(consumption.cols());
            }
        f[3 * season] = lo;
        f[3 * season + 1] = sum / static_cast<double>(count);
        f[3 * season + 2] = hi;
    }
    double peak = 0.0, trough = 0.0;
    for (Eigen::Index t = 0; t < consumption.rows(); ++t) {
        Eigen::Index imax = 0, imin = 0;
        consumption.row(t).maxCoeff(&imax);
        consumption.row(t).minCoeff(&imin);
        peak += static_cast<double>(imax);
        trough += static_cast<double>(imin);
    }
    const double denom = static_cast<double>(consumption.rows()) * std::max<Eigen::Index>(1, consumption.cols() - 1);
    f[6] = peak / denom;
    f[7] = trough / denom;
    return f;
}

struct StandardizedFeatures {
    Matrix values;
    std::vector<int> dropped_columns;  ///< zero-variance columns removed
};

inline StandardizedFeatures standardize_features(const Matrix& features) {
    StandardizedFeatures out;
    std::vector<Vector> cols;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        const Vector col = features.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            out.dropped_columns.push_back(static_cast<int>(j));
            continue;
        }
        cols.push_back((col.array() - mean) / sd);
    }
    out.values = Matrix::Zero(features.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = cols[j];
    return out;
}

// ---------------------------------------------------------------------------
// Calinski-Harabasz

enum class ChDefinition {
    Averaged,   ///< between: sum of squared centroid offsets; within: per-cluster mean squared distance
    Classical,  ///< between weighted by cluster size; within: total scatter
};

/**
 * Score over n vectors supplied lazily by `row(i)` (so that year-long records need not be
 * held in one matrix). Throws NumericalError when the within-cluster term vanishes.
 */
template <class RowFn>
double calinski_harabasz(std::size_t n, RowFn&& row, std::span<const int> labels, int k, ChDefinition def = ChDefinition::Averaged) {
    if (labels.size() != n) throw ValidationError("one label per series required");
    if (k < 2) throw ValidationError("Calinski-Harabasz needs at least 2 clusters");
    if (n <= static_cast<std::size_t>(k)) throw ValidationError("Calinski-Harabasz needs more series than clusters");
    std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
    std::vector<Vector> centroid(static_cast<std::size_t>(k));
    Vector overall;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = labels[i];
        if (l < 0 || l >= k) throw ValidationError("cluster label " + std::to_string(l) + " outside 0.." + std::to_string(k - 1));
        const Vector y = row(i);
        auto& c = centroid[static_cast<std::size_t>(l)];
        if (overall.size() == 0) overall = Vector::Zero(y.size());
        if (c.size() == 0) c = Vector::Zero(y.size());
        if (y.size() != overall.size()) throw ValidationError("series of unequal length");
        c += y;
        overall += y;
        ++size[static_cast<std::size_t>(l)];
    }
    for (int l = 0; l < k; ++l) {
        if (size[static_cast<std::size_t>(l)] == 0) throw ValidationError("cluster " + std::to_string(l) + " is empty");
        centroid[static_cast<std::size_t>(l)] /= static_cast<double>(size[static_cast<std::size_t>(l)]);
    }
    overall /= static_cast<double>(n);

    std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(labels[i]);
        scatter[l] += (row(i) - centroid[l]).squaredNorm();
    }
    double between = 0.0, within = 0.0;
    for (std::size_t l = 0; l < static_cast<std::size_t>(k); ++l) {
        const double offset = (centroid[l] - overall).squaredNorm();
        if (def == ChDefinition::Classical) {
            between += static_cast<double>(size[l]) * offset;
            within += scatter[l];
        } else {
            between += offset;
            within += scatter[l] / static_cast<double>(size[l]);
        }
    }
    if (!(within > 0.0)) throw NumericalError("perfectly tight clustering: within-cluster variance is zero");
    return (static_cast<double>(n) - k) * between / ((k - 1.0) * within);
}

inline double calinski_harabasz(const Matrix& series, std::span<const int> labels, int k, ChDefinition def = ChDefinition::Averaged) {
    return calinski_harabasz(
        static_cast<std::size_t>(series.rows()), [&](std::size_t i) -> Vector { return series.row(static_cast<Eigen::Index>(i)).transpose(); },
        labels, k, def);
}

struct VariantScores {
    double raw = 0.0;
    double normalized = 0.0;
    std::optional<double> special;       ///< unset when no special-tariff slot exists
    std::size_t special_excluded = 0;    ///< households without any special-tariff exposure
};

/**
 * Scores one clustering on three record series per household: the full T x H record,
 * the record divided by its own mean, and the normalised record restricted to the slots
 * where the common schedule is Low or High. `exposure[i]` holds the tariffs household i was
 * modelled against; a household never exposed to a special tariff is left out of the third.
 */
inline VariantScores score_variants(std::span<const Matrix> records, std::span<const std::vector<dataio::TariffProfile>> exposure,
                                    const std::vector<dataio::TariffProfile>& schedule, const Clustering& clustering,
                                    ChDefinition def = ChDefinition::Averaged) {
    const std::size_t n = records.size();
    if (exposure.size() != n) throw ValidationError("one tariff history per household required");
    std::vector<double> scale(n);
    for (std::size_t i = 0; i < n; ++i) {
        scale[i] = records[i].mean();
        if (!(scale[i] > 0.0)) throw ValidationError("household " + std::to_string(i) + " has no positive consumption");
    }
    auto flat = [&](std::size_t i) -> Vector {
        const Matrix& m = records[i];
        Vector v(m.size());
        for (Eigen::Index t = 0; t < m.rows(); ++t) v.segment(t * m.cols(), m.cols()) = m.row(t).transpose();
        return v;
    };
    VariantScores s;
    s.raw = calinski_harabasz(n, flat, clustering.labels, clustering.k, def);
    s.normalized = calinski_harabasz(n, [&](std::size_t i) -> Vector { return flat(i) / scale[i]; }, clustering.labels, clustering.k, def);

    std::vector<std::pair<int, int>> slots;
    for (std::size_t t = 0; t < schedule.size(); ++t)
        for (int h = 0; h < kHalfHours; ++h)
            if (is_special(schedule[t][static_cast<std::size_t>(h)])) slots.emplace_back(static_cast<int>(t), h);
    if (slots.empty()) return s;

    std::vector<std::size_t> members;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        bool exposed = false;
        for (const auto& day : exposure[i])
            for (Tariff p : day) exposed = exposed || is_special(p);
        if (!exposed) {
            ++s.special_excluded;
            continue;
        }
        members.push_back(i);
        labels.push_back(clustering.labels[i]);
    }
    auto masked = [&](std::size_t j) -> Vector {
        const std::size_t i = members[j];
        Vector v(static_cast<Eigen::Index>(slots.size()));
        for (std::size_t s2 = 0; s2 < slots.size(); ++s2) v[static_cast<Eigen::Index>(s2)] = records[i](slots[s2].first, slots[s2].second) / scale[i];
        return v;
    };
    s.special = calinski_harabasz(members.size(), masked, labels, clustering.k, def);
    return s;
}

// ---------------------------------------------------------------------------
// Agreement between labelings

inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ValidationError("labelings of different length");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++joint[{a[i], b[i]}];
        ++ra[a[i]];
        ++rb[b[i]];
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, c] : joint) index += pairs(c);
    for (const auto& [key, c] : ra) sa += pairs(c);
    for (const auto& [key, c] : rb) sb += pairs(c);
    const double total = pairs(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace drsim::clustering
