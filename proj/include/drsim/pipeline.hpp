#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "drsim/causality.hpp"
#include "drsim/clustering.hpp"
#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"
#include "drsim/gamgen.hpp"
#include "drsim/metrics.hpp"
#include "drsim/neuralgen.hpp"
#include "drsim/synthdata.hpp"

/**
 * @file pipeline.hpp
 * @brief Stages of the command-line pipeline. Every stage reads its inputs from files and
 * writes its outputs under the output directory; a stage whose outputs all exist is
 * skipped unless forced.
 */

namespace drsim::pipeline {

namespace fs = std::filesystem;

enum class GeneratorKind { Cvae, Gam };

inline std::string to_string(GeneratorKind g) { return g == GeneratorKind::Cvae ? "cvae" : "gam"; }

inline GeneratorKind parse_generator(std::string_view s) {
    if (s == "cvae") return GeneratorKind::Cvae;
    if (s == "gam") return GeneratorKind::Gam;
    throw ConfigError("unknown generator '" + std::string(s) + "' (expected cvae or gam)");
}

struct ScenarioSpec {
    std::string name;
    dataio::TariffProfile tariffs;
};

/// Normal all day, Low over half-hours 10-19 and High over 40-44 (1-based).
inline std::vector<ScenarioSpec> default_scenarios() {
    std::vector<ScenarioSpec> s(3);
    for (auto& x : s) x.tariffs.fill(Tariff::Normal);
    s[0].name = "normal";
    s[1].name = "low";
    s[2].name = "high";
    for (int h = synthdata::kLowWindowBegin; h < synthdata::kLowWindowEnd; ++h) s[1].tariffs[static_cast<std::size_t>(h)] = Tariff::Low;
    for (int h = synthdata::kHighWindowBegin; h < synthdata::kHighWindowEnd; ++h) s[2].tariffs[static_cast<std::size_t>(h)] = Tariff::High;
    return s;
}

struct PipelineConfig {
    std::optional<std::uint64_t> seed;
    fs::path out = "drsim-out";
    fs::path records;  ///< consumption CSV; defaults to <out>/records.csv
    fs::path weather;  ///< temperature CSV; defaults to <out>/weather.csv

    // synth
    int synth_households = 50;
    int synth_days = 120;
    Date synth_start = make_date(2013, 1, 1);
    double synth_std_fraction = 0.0;
    double synth_special_fraction = 0.3;
    double synth_scale_spread = 0.2;

    // features
    double smoothing = dataio::kDefaultSmoothing;
    double train_fraction = dataio::kDefaultTrainFraction;

    // clustering
    int k = 4;
    int nmf_rank = 5;
    int nmf_max_iter = 500;
    double nmf_tol = 1e-5;

    neuralgen::CvaeConfig cvae;
    gamgen::GamSettings gam;

    int members = 200;
    double variogram_order = metrics::kDefaultVariogramOrder;
    int scenario_members = 200;
    std::vector<ScenarioSpec> scenarios = default_scenarios();

    std::uint64_t master_seed() const {
        if (!seed) throw ConfigError("a seed is required (config key 'seed' or --seed)");
        return *seed;
    }
    fs::path records_path() const { return records.empty() ? out / "records.csv" : records; }
    fs::path weather_path() const { return weather.empty() ? out / "weather.csv" : weather; }

    void validate() const {
        master_seed();
        if (k < 2) throw ConfigError("k must be at least 2");
        if (nmf_rank < 1) throw ConfigError("NMF rank must be at least 1");
        if (members < 2 || members % 2 != 0) throw ConfigError("evaluation members must be an even number >= 2");
        if (scenario_members < 1) throw ConfigError("scenario members must be positive");
        if (!(variogram_order > 0.0)) throw ConfigError("variogram order must be positive");
        if (!(smoothing > 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in (0, 1)");
        if (synth_households < 1 || synth_days < 30) throw ConfigError("synth needs >= 1 household and >= 30 days");
        cvae.validate();
    }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    for (auto f : csv::split(s, ',')) {
        const auto t = csv::trim(f);
        if (!t.empty()) out.push_back(csv::parse_double(t, 0));
    }
    return out;
}

inline dataio::TariffProfile parse_scenario(const std::string& name, const std::string& text) {
    std::vector<std::string_view> labels;
    for (auto f : csv::split(text, ',')) labels.push_back(csv::trim(f));
    if (labels.size() != kHalfHours) throw ConfigError("scenario '" + name + "' needs " + std::to_string(kHalfHours) + " tariffs");
    dataio::TariffProfile p;
    for (std::size_t h = 0; h < labels.size(); ++h) {
        p[h] = parse_tariff(labels[h]);
        if (p[h] == Tariff::Flat) throw ConfigError("scenario '" + name + "' uses FLAT");
    }
    return p;
}

}  // namespace detail

/**
 * Reads an INI file. Keys before the first section: seed, out. Sections: data, synth,
 * features, cluster, cvae, gam, evaluate, scenario (extra scenarios as name = 48 labels).
 */
inline PipelineConfig load_config(const fs::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    const fs::path base = path.parent_path();
    auto rel = [&](const std::string& p) { return p.empty() || fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    PipelineConfig c;
    try {
        if (auto s = tree.get_optional<std::uint64_t>("seed")) c.seed = *s;
        if (auto s = tree.get_optional<std::string>("out")) c.out = rel(*s);
        c.records = rel(tree.get("data.records", std::string()));
        c.weather = rel(tree.get("data.weather", std::string()));

        c.synth_households = tree.get("synth.households", c.synth_households);
        c.synth_days = tree.get("synth.days", c.synth_days);
        if (auto s = tree.get_optional<std::string>("synth.start")) c.synth_start = parse_date(*s);
        c.synth_std_fraction = tree.get("synth.std_fraction", c.synth_std_fraction);
        c.synth_special_fraction = tree.get("synth.special_fraction", c.synth_special_fraction);
        c.synth_scale_spread = tree.get("synth.scale_spread", c.synth_scale_spread);

        c.smoothing = tree.get("features.smoothing", c.smoothing);
        c.train_fraction = tree.get("features.train_fraction", c.train_fraction);

        c.k = tree.get("cluster.k", c.k);
        c.nmf_rank = tree.get("cluster.rank", c.nmf_rank);
        c.nmf_max_iter = tree.get("cluster.max_iter", c.nmf_max_iter);
        c.nmf_tol = tree.get("cluster.tol", c.nmf_tol);

        auto& v = c.cvae;
        v.latent_dim = tree.get("cvae.latent", v.latent_dim);
        if (auto s = tree.get_optional<std::string>("cvae.hidden")) {
            v.hidden.clear();
            for (double x : detail::parse_list(*s)) v.hidden.push_back(static_cast<int>(x));
        }
        v.eta = tree.get("cvae.eta", v.eta);
        v.learning_rate = tree.get("cvae.learning_rate", v.learning_rate);
        v.max_epochs = tree.get("cvae.max_epochs", v.max_epochs);
        v.patience = tree.get("cvae.patience", v.patience);
        v.batch_size = tree.get("cvae.batch_size", v.batch_size);
        v.restarts = tree.get("cvae.restarts", v.restarts);

        if (auto s = tree.get_optional<std::string>("gam.knot_quantiles")) c.gam.knot_quantiles = detail::parse_list(*s);
        c.gam.position_knots = tree.get("gam.position_knots", c.gam.position_knots);

        c.members = tree.get("evaluate.members", c.members);
        c.variogram_order = tree.get("evaluate.variogram_p", c.variogram_order);
        if (auto sc = tree.get_child_optional("scenario")) {
            for (const auto& [key, node] : *sc) {
                if (key == "members") c.scenario_members = node.get_value<int>();
                else c.scenarios.push_back({key, detail::parse_scenario(key, node.get_value<std::string>())});
            }
        }
    } catch (const pt::ptree_error& e) {
        throw ConfigError(e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Shared state

struct Dataset {
    std::vector<std::string> ids;
    std::vector<Group> groups;
    std::vector<dataio::DayGrid> grids;
    std::vector<std::vector<dataio::TariffProfile>> exposure;  ///< tariffs each household is modelled against
    std::vector<std::string> excluded;                        ///< low-coverage household ids
    std::vector<dataio::TariffProfile> schedule;
    std::vector<Date> dates;
    Matrix temperature;

    int days() const { return static_cast<int>(dates.size()); }
    std::vector<int> all_days() const {
        std::vector<int> d(dates.size());
        std::iota(d.begin(), d.end(), 0);
        return d;
    }
};

inline Dataset load_dataset(const PipelineConfig& c) {
    for (const auto& p : {c.records_path(), c.weather_path()})
        if (!fs::exists(p)) throw ConfigError("input file '" + p.string() + "' not found (run 'synth' or set [data] paths)");
    auto rin = csv::open_in(c.records_path());
    const auto raw = dataio::ingest_records(rin);
    const auto repaired = dataio::repair_gaps(raw);
    Dataset d;
    d.dates = repaired.dates();
    d.schedule = dataio::tariff_schedule(repaired);
    for (const auto& hh : repaired.households) {
        if (hh.excluded) {
            d.excluded.push_back(hh.id);
            continue;
        }
        d.ids.push_back(hh.id);
        d.groups.push_back(hh.group);
        d.grids.push_back(dataio::to_day_grid(hh, repaired.day_count));
        d.exposure.push_back(dataio::effective_tariffs(d.grids.back(), hh.group, d.schedule));
    }
    if (d.ids.empty()) throw ValidationError("every household falls below the coverage threshold");
    auto win = csv::open_in(c.weather_path());
    d.temperature = dataio::half_hourly_temperature(dataio::ingest_temperature(win), repaired.first_day, repaired.day_count);
    return d;
}

inline dataio::DayFeatures day_features(const PipelineConfig& c, const Dataset& d) {
    return dataio::build_day_features(d.dates, d.temperature, c.smoothing, c.train_fraction, derive_seed(c.master_seed(), "partition"));
}

struct StageOptions {
    bool force = false;
    std::optional<GeneratorKind> generator;
    std::ostream* log = &std::cerr;
};

namespace detail {

inline bool outputs_present(const std::vector<fs::path>& files) {
    if (files.empty()) return false;
    for (const auto& f : files)
        if (!fs::exists(f)) return false;
    return true;
}

/// True when the stage should run; logs the skip otherwise.
inline bool should_run(const char* stage, const std::vector<fs::path>& outputs, const StageOptions& o) {
    if (o.force || !outputs_present(outputs)) return true;
    *o.log << stage << ": outputs present, skipped (use --force to rebuild)\n";
    return false;
}

inline fs::path cluster_file(const PipelineConfig& c, const std::string& stem, int cluster, const std::string& ext = ".csv") {
    return c.out / (stem + "_cluster" + std::to_string(cluster) + ext);
}

inline fs::path model_file(const PipelineConfig& c, GeneratorKind g, int cluster) {
    return c.out / "models" / (to_string(g) + "_cluster" + std::to_string(cluster) + ".txt");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

inline synthdata::PopulationSettings synth_settings(const PipelineConfig& c) {
    synthdata::PopulationSettings s;
    const int a = static_cast<int>(s.archetypes.size());
    s.counts.assign(static_cast<std::size_t>(a), c.synth_households / a);
    for (int i = 0; i < c.synth_households % a; ++i) ++s.counts[static_cast<std::size_t>(i)];
    s.days = c.synth_days;
    s.first_day = c.synth_start;
    s.std_fraction = c.synth_std_fraction;
    s.scale_spread = c.synth_scale_spread;
    s.tariffs.special_fraction = c.synth_special_fraction;
    s.seed = derive_seed(c.master_seed(), "synth");
    return s;
}

inline void cmd_synth(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto truth_path = c.out / "ground_truth.csv";
    if (!detail::should_run("synth", {c.records_path(), c.weather_path(), truth_path}, o)) return;
    const auto pop = synthdata::generate_population(synth_settings(c));
    {
        auto out = csv::open_out(c.records_path());
        synthdata::write_records(out, pop);
    }
    {
        auto out = csv::open_out(c.weather_path());
        synthdata::write_weather(out, pop);
    }
    auto out = csv::open_out(truth_path);
    synthdata::write_ground_truth(out, synthdata::ground_truth(pop));
    *o.log << "synth: " << pop.households.size() << " households x " << pop.days() << " days";
    if (pop.clamped_means + pop.clamped_readings > 0)
        *o.log << " (warning: " << pop.clamped_means << " negative means and " << pop.clamped_readings << " negative readings set to 0)";
    *o.log << '\n';
}

// ---------------------------------------------------------------------------
// ingest

inline void cmd_ingest(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto hh_path = c.out / "households.csv", sched_path = c.out / "schedule.csv";
    if (!detail::should_run("ingest", {hh_path, sched_path}, o)) return;
    auto rin = csv::open_in(c.records_path());
    const auto raw = dataio::ingest_records(rin);
    const auto repaired = dataio::repair_gaps(raw);
    {
        auto out = csv::open_out(hh_path);
        out << "household_id,group,coverage,excluded\n";
        for (const auto& hh : raw.households) out << hh.id << ',' << drsim::to_string(hh.group) << ',' << csv::num(hh.coverage) << ',' << (hh.excluded ? 1 : 0) << '\n';
    }
    auto out = csv::open_out(sched_path);
    out << "date,h,tariff\n";
    const auto sched = dataio::tariff_schedule(repaired);
    const auto dates = repaired.dates();
    for (std::size_t t = 0; t < sched.size(); ++t)
        for (int h = 0; h < kHalfHours; ++h) out << format_date(dates[t]) << ',' << h + 1 << ',' << drsim::to_string(sched[t][static_cast<std::size_t>(h)]) << '\n';
    *o.log << "ingest: " << raw.households.size() << " households, " << repaired.day_count << " days\n";
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterResult {
    std::vector<std::string> ids;  ///< clustered households
    std::map<std::string, clustering::Clustering> methods;
    std::map<std::string, clustering::VariantScores> scores;
    std::vector<std::string> excluded;
};

inline const std::vector<std::string> kMethods{"nmf", "classical", "random"};

/// Tariff-response profiles, the three clusterings and their scores on the three record variants.
inline ClusterResult cluster_households(const PipelineConfig& c, const Dataset& d, std::vector<causality::TariffResponseProfile>* profiles_out = nullptr) {
    const auto days = d.all_days();
    std::vector<causality::TariffResponseProfile> profiles;
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
        const auto models = causality::fit_entity(d.grids[i].consumption, d.exposure[i], d.temperature, days);
        profiles.push_back(causality::tariff_profile(models, d.temperature, days));
    }
    const auto pm = clustering::build_profile_matrix(profiles);
    ClusterResult r;
    for (std::size_t i : pm.excluded) r.excluded.push_back(d.ids[i]);
    const auto n = static_cast<Eigen::Index>(pm.rows.size());
    if (n < c.k) throw ValidationError("only " + std::to_string(n) + " households to split into " + std::to_string(c.k) + " clusters");

    std::vector<Matrix> records;
    std::vector<std::vector<dataio::TariffProfile>> exposure;
    Matrix classical(n, clustering::kClassicalFeatureCount);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto i = pm.rows[static_cast<std::size_t>(j)];
        r.ids.push_back(d.ids[i]);
        records.push_back(d.grids[i].consumption);
        exposure.push_back(d.exposure[i]);
        classical.row(j) = clustering::classical_features(d.grids[i].consumption, d.dates).transpose();
    }
    const clustering::NmfSettings nmf{c.nmf_rank, c.nmf_max_iter, c.nmf_tol, derive_seed(c.master_seed(), "nmf")};
    const auto factors = clustering::nmf_factorize(pm.values, nmf);
    r.methods["nmf"] = clustering::kmedoids(factors.w, c.k);
    r.methods["classical"] = clustering::kmedoids(clustering::standardize_features(classical).values, c.k);
    r.methods["random"] = clustering::random_clustering(static_cast<std::size_t>(n), c.k, derive_seed(c.master_seed(), "random-clustering"));
    for (const auto& m : kMethods) r.scores[m] = clustering::score_variants(records, exposure, d.schedule, r.methods[m]);
    if (profiles_out) *profiles_out = std::move(profiles);
    return r;
}

inline void cmd_cluster(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto clusters_path = c.out / "clusters.csv", scores_path = c.out / "cluster_scores.csv", prof_path = c.out / "tariff_profiles.csv";
    if (!detail::should_run("cluster", {clusters_path, scores_path, prof_path}, o)) return;
    const auto d = load_dataset(c);
    std::vector<causality::TariffResponseProfile> profiles;
    const auto r = cluster_households(c, d, &profiles);
    {
        auto out = csv::open_out(prof_path);
        causality::write_profiles_header(out);
        for (std::size_t i = 0; i < d.ids.size(); ++i) causality::write_profiles(out, d.ids[i], profiles[i]);
    }
    {
        auto out = csv::open_out(clusters_path);
        out << "household_id,nmf,classical,random\n";
        for (std::size_t i = 0; i < r.ids.size(); ++i) {
            out << r.ids[i];
            for (const auto& m : kMethods) out << ',' << r.methods.at(m).labels[i] + 1;
            out << '\n';
        }
    }
    auto out = csv::open_out(scores_path);
    out << "method,records,normalized_records,normalized_special_records\n";
    for (const auto& m : kMethods) {
        const auto& s = r.scores.at(m);
        out << m << ',' << csv::num(s.raw) << ',' << csv::num(s.normalized) << ',' << (s.special ? csv::num(*s.special) : "NA") << '\n';
    }
    *o.log << "cluster: " << r.ids.size() << " households in " << c.k << " clusters";
    if (!r.excluded.empty()) *o.log << " (" << r.excluded.size() << " without positive base consumption left out)";
    if (!d.excluded.empty()) *o.log << " (" << d.excluded.size() << " low-coverage households excluded)";
    *o.log << '\n';
}

/// NMF cluster (0-based) of every household id in clusters.csv.
inline std::map<std::string, int> read_clusters(const PipelineConfig& c) {
    const auto path = c.out / "clusters.csv";
    if (!fs::exists(path)) throw ConfigError("'" + path.string() + "' not found (run 'cluster' first)");
    auto in = csv::open_in(path);
    csv::Reader reader(in, {"household_id", "nmf", "classical", "random"});
    std::map<std::string, int> labels;
    std::vector<std::string_view> f;
    while (reader.next(f)) labels[std::string(f[0])] = static_cast<int>(csv::parse_int(f[1], reader.line())) - 1;
    return labels;
}

/// Mean consumption of the member households of one cluster, T x H.
inline Matrix cluster_consumption(const Dataset& d, const std::map<std::string, int>& labels, int cluster) {
    Matrix sum = Matrix::Zero(d.days(), kHalfHours);
    int members = 0;
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
        const auto it = labels.find(d.ids[i]);
        if (it == labels.end() || it->second != cluster) continue;
        sum += d.grids[i].consumption;
        ++members;
    }
    if (members == 0) throw ValidationError("cluster " + std::to_string(cluster + 1) + " has no household in the data set");
    return sum / members;
}

inline int cluster_count(const std::map<std::string, int>& labels) {
    int k = 0;
    for (const auto& [id, c] : labels) k = std::max(k, c + 1);
    return k;
}

// ---------------------------------------------------------------------------
// train

inline Matrix conditional_matrix(const dataio::DayFeatures& f, const std::vector<dataio::TariffProfile>& tariffs) {
    Matrix x(f.days(), dataio::conditional_dimension());
    for (int t = 0; t < f.days(); ++t) x.row(t) = dataio::build_conditional_vector(f, t, tariffs[static_cast<std::size_t>(t)]).transpose();
    return x;
}

inline std::vector<GeneratorKind> selected_generators(const StageOptions& o) {
    if (o.generator) return {*o.generator};
    return {GeneratorKind::Gam, GeneratorKind::Cvae};
}

inline void cmd_train(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto labels = read_clusters(c);
    const int k = cluster_count(labels);
    const auto gens = selected_generators(o);
    std::vector<fs::path> outputs;
    for (auto g : gens)
        for (int cl = 0; cl < k; ++cl) outputs.push_back(detail::model_file(c, g, cl + 1));
    if (!detail::should_run("train", outputs, o)) return;
    const auto d = load_dataset(c);
    const auto f = day_features(c, d);
    for (int cl = 0; cl < k; ++cl) {
        const Matrix y = cluster_consumption(d, labels, cl);
        for (auto g : gens) {
            const auto path = detail::model_file(c, g, cl + 1);
            if (!o.force && fs::exists(path)) continue;
            if (g == GeneratorKind::Gam) {
                const auto gen = gamgen::fit_generator(y, d.schedule, f, f.partition.train, c.gam);
                {
                    auto out = csv::open_out(path);
                    gen.save(out);
                }
                {
                    auto out = csv::open_out(detail::cluster_file(c, "gam_coefficients", cl + 1));
                    gen.write_coefficients(out);
                }
                auto out = csv::open_out(detail::cluster_file(c, "gam_sigma", cl + 1));
                csv::write_matrix(out, gen.correlation().sigma);
                *o.log << "train: gam cluster " << cl + 1 << (gen.correlation().repaired ? " (correlation repaired)" : "") << '\n';
            } else {
                auto cfg = c.cvae;
                cfg.seed = derive_seed(c.master_seed(), "cvae", static_cast<std::uint64_t>(cl));
                const auto res = neuralgen::train_with_restarts(y, conditional_matrix(f, d.schedule), f.partition, cfg);
                {
                    auto out = csv::open_out(path);
                    res.best.model.save(out);
                }
                auto out = csv::open_out(detail::cluster_file(c, "cvae_restarts", cl + 1));
                out << "restart,seed,test_mse\n";
                for (std::size_t r = 0; r < res.test_mse.size(); ++r) {
                    out << r << ',' << cfg.seed + r << ',' << csv::num(res.test_mse[r]) << '\n';
                    *o.log << "train: cvae cluster " << cl + 1 << " restart " << r << " test mse " << csv::num(res.test_mse[r]) << '\n';
                }
                *o.log << "train: cvae cluster " << cl + 1 << " kept restart " << res.best_index << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------------------
// generate / evaluate / scenario

/// Sampler of one trained generator for one cluster: (day, tariffs, members, seed) -> N x H.
using Sampler = std::function<Matrix(int, std::span<const Tariff>, int, std::uint64_t)>;

inline std::optional<Sampler> load_sampler(const PipelineConfig& c, GeneratorKind g, int cluster, const dataio::DayFeatures& f) {
    const auto path = detail::model_file(c, g, cluster + 1);
    if (!fs::exists(path)) return std::nullopt;
    auto in = csv::open_in(path);
    if (g == GeneratorKind::Gam) {
        auto gen = std::make_shared<gamgen::GamGenerator>(gamgen::GamGenerator::load(in));
        return Sampler([gen, &f](int t, std::span<const Tariff> p, int n, std::uint64_t seed) {
            return gen->sample(gamgen::day_conditions(f, t), p, n, seed);
        });
    }
    auto model = std::make_shared<neuralgen::Cvae>(neuralgen::Cvae::load(in));
    return Sampler([model, &f](int t, std::span<const Tariff> p, int n, std::uint64_t seed) {
        return model->generate(dataio::build_conditional_vector(f, t, p), n, seed);
    });
}

/// Samplers for the selected generators; errors when none is trained.
inline std::vector<std::pair<GeneratorKind, Sampler>> load_samplers(const PipelineConfig& c, const StageOptions& o, int cluster,
                                                                     const dataio::DayFeatures& f) {
    std::vector<std::pair<GeneratorKind, Sampler>> out;
    for (auto g : selected_generators(o)) {
        auto s = load_sampler(c, g, cluster, f);
        if (s) out.emplace_back(g, std::move(*s));
        else if (o.generator) throw ConfigError("no trained " + to_string(g) + " model for cluster " + std::to_string(cluster + 1) + " (run 'train')");
    }
    if (out.empty()) throw ConfigError("no trained model for cluster " + std::to_string(cluster + 1) + " (run 'train')");
    return out;
}

inline void cmd_generate(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto labels = read_clusters(c);
    const int k = cluster_count(labels);
    const auto d = load_dataset(c);
    const auto f = day_features(c, d);
    for (int cl = 0; cl < k; ++cl)
        for (const auto& [g, sampler] : load_samplers(c, o, cl, f)) {
            const auto path = c.out / "samples" / (to_string(g) + "_cluster" + std::to_string(cl + 1) + ".csv");
            if (!detail::should_run("generate", {path}, o)) continue;
            auto out = csv::open_out(path);
            out << "day,sample,h,kwh\n";
            for (int t : f.partition.test)
                neuralgen::write_samples(out, t, sampler(t, d.schedule[static_cast<std::size_t>(t)], c.members,
                                                         derive_seed(c.master_seed(), "generate", static_cast<std::uint64_t>(t))));
            *o.log << "generate: " << to_string(g) << " cluster " << cl + 1 << ", " << f.partition.test.size() << " test days\n";
        }
}

inline void cmd_evaluate(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto labels = read_clusters(c);
    const int k = cluster_count(labels);
    std::vector<fs::path> outputs{c.out / "score_quantiles.csv"};
    for (int cl = 0; cl < k; ++cl) outputs.push_back(detail::cluster_file(c, "scores", cl + 1));
    if (!detail::should_run("evaluate", outputs, o)) return;
    const auto d = load_dataset(c);
    const auto f = day_features(c, d);
    if (f.partition.test.empty()) throw ValidationError("no test days to evaluate");
    auto quantiles = csv::open_out(c.out / "score_quantiles.csv");
    for (int cl = 0; cl < k; ++cl) {
        const Matrix y = cluster_consumption(d, labels, cl);
        std::vector<metrics::NamedSource> sources;
        for (const auto& [g, sampler] : load_samplers(c, o, cl, f))
            sources.push_back({to_string(g), [&d, s = sampler](int t, int n, std::uint64_t seed) { return s(t, d.schedule[static_cast<std::size_t>(t)], n, seed); }});
        const auto scores = metrics::evaluate_generators(f.partition.test, y, sources, c.members, derive_seed(c.master_seed(), "evaluate"), c.variogram_order);
        {
            auto out = csv::open_out(detail::cluster_file(c, "scores", cl + 1));
            metrics::write_scores(out, scores);
        }
        metrics::write_score_quantiles(quantiles, scores, "cluster,", std::to_string(cl + 1) + ",", cl == 0);
        *o.log << "evaluate: cluster " << cl + 1 << ", " << f.partition.test.size() << " test days\n";
    }
}

inline void cmd_scenario(const PipelineConfig& c, const StageOptions& o = {}) {
    const auto labels = read_clusters(c);
    const int k = cluster_count(labels);
    const auto means_path = c.out / "scenario_means.csv";
    if (!detail::should_run("scenario", {means_path}, o)) return;
    const auto d = load_dataset(c);
    const auto f = day_features(c, d);
    const auto& days = f.partition.test.empty() ? f.partition.train : f.partition.test;
    auto means = csv::open_out(means_path);
    means << "cluster,generator,scenario,h,mean\n";
    for (int cl = 0; cl < k; ++cl)
        for (const auto& [g, sampler] : load_samplers(c, o, cl, f)) {
            auto out = csv::open_out(c.out / "scenarios" / (to_string(g) + "_cluster" + std::to_string(cl + 1) + ".csv"));
            out << "scenario,day,sample,h,kwh\n";
            for (const auto& sc : c.scenarios) {
                Vector acc = Vector::Zero(kHalfHours);
                for (int t : days) {
                    // The same seed for every scenario of a day: the scenarios differ only through the tariffs.
                    const Matrix s = sampler(t, sc.tariffs, c.scenario_members, derive_seed(c.master_seed(), "scenario", static_cast<std::uint64_t>(t)));
                    acc += s.colwise().sum().transpose();
                    for (Eigen::Index i = 0; i < s.rows(); ++i)
                        for (int h = 0; h < kHalfHours; ++h) out << sc.name << ',' << t << ',' << i << ',' << h + 1 << ',' << csv::num(s(i, h)) << '\n';
                }
                acc /= static_cast<double>(days.size()) * c.scenario_members;
                for (int h = 0; h < kHalfHours; ++h) means << cl + 1 << ',' << to_string(g) << ',' << sc.name << ',' << h + 1 << ',' << csv::num(acc[h]) << '\n';
            }
            *o.log << "scenario: " << to_string(g) << " cluster " << cl + 1 << '\n';
        }
}

}  // namespace drsim::pipeline
