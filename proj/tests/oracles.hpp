#pragma once

// Independent reference implementations used only by the tests. Each is written
// directly from the defining formula with no shared code from the library.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Series = std::vector<double>;

/// Variogram score: full ordered double loop.
inline double variogram(const std::vector<Series>& members, const Series& obs, double p) {
    const std::size_t H = obs.size();
    const double n = static_cast<double>(members.size());
    double total = 0.0;
    for (std::size_t a = 0; a < H; ++a)
        for (std::size_t b = 0; b < H; ++b) {
            double mean_member = 0.0;
            for (const auto& m : members) mean_member += std::pow(std::fabs(m[a] - m[b]), p);
            const double diff = std::pow(std::fabs(obs[a] - obs[b]), p) - mean_member / n;
            total += diff * diff;
        }
    return total;
}

inline double distance(const Series& a, const Series& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Energy score with the all-pairs U-statistic for the spread term.
inline double energy_all_pairs(const std::vector<Series>& members, const Series& obs) {
    const std::size_t n = members.size();
    double first = 0.0, second = 0.0;
    for (const auto& m : members) first += distance(m, obs);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) second += distance(members[i], members[j]);
    return first / n - second / (static_cast<double>(n) * (n - 1));
}

/// Monte-Carlo estimate of KL(N(mu, diag exp(logvar)) || N(0, I)) as E_q[log q - log p].
inline double kl_monte_carlo(const std::vector<double>& mu, const std::vector<double>& logvar, std::size_t draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double acc = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
        double log_ratio = 0.0;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const double e = g(rng);
            const double z = mu[j] + std::exp(0.5 * logvar[j]) * e;
            // log q(z) - log p(z); the 2 pi terms cancel
            log_ratio += -0.5 * logvar[j] - 0.5 * e * e + 0.5 * z * z;
        }
        acc += log_ratio;
    }
    return acc / static_cast<double>(draws);
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = f(x);
        x[i] = keep - step;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// Minimum total distance over every k-subset of medoids (small inputs only).
inline double kmedoids_exhaustive(const std::vector<Series>& points, int k, std::vector<int>* best_set = nullptr) {
    const int n = static_cast<int>(points.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> chosen;
    std::function<void(int)> recurse = [&](int start) {
        if (static_cast<int>(chosen.size()) == k) {
            double cost = 0.0;
            for (const auto& p : points) {
                double nearest = std::numeric_limits<double>::infinity();
                for (int m : chosen) nearest = std::min(nearest, distance(p, points[static_cast<std::size_t>(m)]));
                cost += nearest;
            }
            if (cost < best) {
                best = cost;
                if (best_set) *best_set = chosen;
            }
            return;
        }
        for (int i = start; i < n; ++i) {
            chosen.push_back(i);
            recurse(i + 1);
            chosen.pop_back();
        }
    };
    recurse(0);
    return best;
}

}  // namespace oracle
