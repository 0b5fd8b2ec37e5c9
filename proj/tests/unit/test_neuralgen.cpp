#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "drsim/neuralgen.hpp"
#include "oracles.hpp"

using namespace drsim;
using namespace drsim::neuralgen;

namespace {

CvaeConfig small_config(int latent, int hidden) {
    CvaeConfig c;
    c.latent_dim = latent;
    c.hidden = {hidden};
    c.eta = 0.7;
    return c;
}

Matrix uniform(Eigen::Index r, Eigen::Index c, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

}  // namespace

TEST(DenseNet, ZeroWeightsGiveBias) {
    Rng rng(1);
    const std::vector<int> sizes{5, 3, 8};
    const std::vector<Activation> acts{Activation::Relu, Activation::Identity};
    DenseNet net(sizes, acts, rng);
    Vector p = Vector::Zero(net.parameter_count());
    // last layer bias occupies the final 8 entries
    p.tail(8) = Vector::LinSpaced(8, -1.0, 1.0);
    net.set_parameters(p);
    const Matrix out = net.forward(Matrix::Random(5, 2));
    EXPECT_TRUE(out.col(0).isApprox(Vector::LinSpaced(8, -1.0, 1.0)));
    EXPECT_THROW(net.forward(Matrix::Zero(4, 1)), ValidationError);
}

TEST(DenseNet, GlorotLimits) {
    Rng rng(2);
    const std::vector<int> sizes{149, 15, 8};
    const std::vector<Activation> acts{Activation::Relu, Activation::Identity};
    DenseNet net(sizes, acts, rng);
    EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (149 + 15)));
    EXPECT_LE(net.layers()[1].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (15 + 8)));
    EXPECT_EQ(net.layers()[0].bias.norm(), 0.0);
}

TEST(Cvae, DefaultShapes) {
    Rng rng(3);
    const Cvae model(48, 101, CvaeConfig{}, rng);
    EXPECT_EQ(model.encoder().input_size(), 149);
    EXPECT_EQ(model.encoder().output_size(), 8);
    EXPECT_EQ(model.decoder().input_size(), 105);
    EXPECT_EQ(model.decoder().output_size(), 48);
    const auto enc = model.encode(Matrix::Ones(48, 3), Matrix::Zero(101, 3));
    EXPECT_EQ(enc.mean.rows(), 4);
    EXPECT_EQ(enc.log_var.rows(), 4);
    EXPECT_TRUE(enc.mean.allFinite() && enc.log_var.allFinite());
    EXPECT_THROW(model.encode(Matrix::Ones(47, 3), Matrix::Zero(101, 3)), ValidationError);
}

TEST(Reparameterize, DegenerateAndUnitCases) {
    EncoderOutput enc{Vector::LinSpaced(4, -1, 1), Vector::Zero(4)};
    EXPECT_TRUE(reparameterize(enc, Matrix::Zero(4, 1)).isApprox(enc.mean));
    Matrix e1 = Matrix::Zero(4, 1);
    e1(0) = 1.0;
    const Matrix z = reparameterize(enc, e1);
    EXPECT_DOUBLE_EQ(z(0), enc.mean(0) + 1.0);
    EXPECT_DOUBLE_EQ(z(1), enc.mean(1));
}

TEST(Reparameterize, EmpiricalCovariance) {
    Rng rng(4);
    const Vector lv = (Vector(3) << -1.0, 0.0, 0.8).finished();
    EncoderOutput enc{Vector::Zero(3).replicate(1, 100000), lv.replicate(1, 100000)};
    Matrix noise(3, 100000);
    fill_standard_normal(rng, noise);
    const Matrix z = reparameterize(enc, noise);
    const Matrix centered = z.colwise() - z.rowwise().mean();
    const Matrix cov = centered * centered.transpose() / 99999.0;
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(cov(j, j), std::exp(lv[j]), 0.05 * std::exp(lv[j]));
    EXPECT_NEAR(cov(0, 1), 0.0, 0.02);
}

TEST(Kl, ClosedFormCases) {
    EXPECT_DOUBLE_EQ(kl_divergence(Vector::Zero(4), Vector::Zero(4)), 0.0);
    EXPECT_DOUBLE_EQ(kl_divergence((Vector(4) << 1, 0, 0, 0).finished(), Vector::Zero(4)), 0.5);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vector mu = standard_normal(rng, 4), lv = standard_normal(rng, 4);
        EXPECT_GE(kl_divergence(mu, lv), 0.0);
    }
    EXPECT_NEAR(kl_divergence(Vector::Constant(2, 1e-6), Vector::Constant(2, 1e-6)), 0.0, 1e-9);
}

TEST(Kl, MatchesMonteCarloOnAFewPairs) {
    const std::vector<double> mu{0.3, -0.7}, lv{0.4, -0.5};
    const double mc = oracle::kl_monte_carlo(mu, lv, 200000, 8);
    const double exact = kl_divergence(Eigen::Map<const Vector>(mu.data(), 2), Eigen::Map<const Vector>(lv.data(), 2));
    EXPECT_NEAR(mc, exact, 0.02 * exact);
}

TEST(Loss, VanishesForPerfectAutoencoding) {
    // Decoder forced to output a fixed profile via its bias; encoder outputs mean 0 and
    // log variance 0 through zero weights and biases.
    Rng rng(6);
    CvaeConfig c = small_config(2, 3);
    Cvae model(4, 1, c, rng);
    Vector p = Vector::Zero(model.parameter_count());
    const Vector target_logit = (Vector(4) << 0.3, -0.2, 1.0, 0.0).finished();
    p.tail(4) = target_logit;
    model.set_parameters(p);
    const Matrix y = (1.0 / (1.0 + (-target_logit.array()).exp())).matrix().replicate(1, 3);
    EXPECT_NEAR(model.loss(y, Matrix::Ones(1, 3), Matrix::Random(2, 3)), 0.0, 1e-15);
}

TEST(Loss, EtaZeroIsReconstructionOnly) {
    Rng rng(7);
    CvaeConfig c = small_config(2, 3);
    c.eta = 0.0;
    const Cvae model(4, 2, c, rng);
    const Matrix y = uniform(4, 5, rng), x = uniform(2, 5, rng), noise = Matrix::Random(2, 5);
    const Matrix y_hat = model.decode(reparameterize(model.encode(y, x), noise), x);
    EXPECT_NEAR(model.loss(y, x, noise), (y - y_hat).squaredNorm() / 5.0, 1e-14);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Cvae model(3, 2, small_config(2, 4), rng);
        Vector p = model.parameters();
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.1 * standard_normal(rng, 1)[0];  // nonzero biases keep ReLUs off their kinks
        model.set_parameters(p);
        const Matrix y = uniform(3, 4, rng), x = uniform(2, 4, rng);
        Matrix noise(2, 4);
        fill_standard_normal(rng, noise);
        Vector grad;
        model.loss(y, x, noise, &grad);
        Cvae probe = model;
        const auto f = [&](const std::vector<double>& v) {
            probe.set_parameters(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
            return probe.loss(y, x, noise);
        };
        const auto fd = oracle::finite_difference(f, std::vector<double>(p.data(), p.data() + p.size()), 1e-5);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double a = grad[i], n = fd[static_cast<std::size_t>(i)];
            EXPECT_LE(std::abs(a - n), 1e-4 * std::max({std::abs(a), std::abs(n), 1e-3})) << "seed " << seed << " param " << i;
        }
    }
}

TEST(Adam, FirstStepAndZeroGradient) {
    Vector w = Vector::Zero(3);
    const Vector g = (Vector(3) << 2.0, -0.001, 50.0).finished();
    AdamState st;
    adam_step(w, g, st);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(w[i], -1e-3 * (g[i] > 0 ? 1 : -1), 1e-8);
    const Vector before = w, m = st.first, v = st.second;
    adam_step(w, Vector::Zero(3), st);
    EXPECT_TRUE(st.first.isApprox(0.9 * m));
    EXPECT_TRUE(st.second.isApprox(0.999 * v));
    Vector w2 = Vector::Zero(3);
    AdamState st2;
    adam_step(w2, g, st2);
    adam_step(w2, Vector::Zero(3), st2);
    EXPECT_EQ(w, w2);
    (void)before;
}

TEST(Adam, ZeroGradientFromFreshStateLeavesWeights) {
    Vector w = Vector::LinSpaced(4, 1, 4);
    const Vector keep = w;
    AdamState st;
    adam_step(w, Vector::Zero(4), st);
    EXPECT_EQ(w, keep);
}

TEST(Scaling, RoundTrip) {
    Rng rng(8);
    Cvae model(4, 1, small_config(1, 2), rng);
    model.set_scaling(0.2, 3.7);
    const Matrix y = Matrix::Random(4, 6);
    EXPECT_LT((model.unscale(model.scale(y)) - y).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(model.set_scaling(1.0, 1.0), ValidationError);
}

namespace {

// Profiles share a fixed daily shape; days with conditional flag 1 add `shift` on every half-hour.
void two_regime_data(int days, double shift, double noise, std::uint64_t seed, Matrix& y, Matrix& x) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, noise);
    y.resize(days, 8);
    x.resize(days, 1);
    for (int t = 0; t < days; ++t) {
        x(t, 0) = t % 2;
        for (int h = 0; h < 8; ++h) y(t, h) = 1.0 + 0.4 * std::sin(h) + shift * x(t, 0) + (noise > 0 ? g(rng) : 0.0);
    }
}

}  // namespace

TEST(Training, ConstantProfilesAreLearned) {
    Matrix y, x;
    two_regime_data(64, 0.0, 0.0, 1, y, x);
    CvaeConfig c = small_config(2, 8);
    c.eta = 0.01;
    c.learning_rate = 1e-2;
    c.max_epochs = 500;
    const auto part = dataio::partition_days(64, 0.75, 2);
    const auto r = train_cvae(y, x, part, c, 3);
    EXPECT_FALSE(r.failed);
    EXPECT_LT(r.test_mse, 1e-3);
    double best = r.epoch_loss.front();
    for (double l : r.epoch_loss) best = std::min(best, l);
    EXPECT_LE(best, r.epoch_loss.front());
    EXPECT_LE(r.epochs, 500);
}

TEST(Training, ConditionShiftIsReproduced) {
    Matrix y, x;
    two_regime_data(200, 0.5, 0.05, 4, y, x);
    CvaeConfig c = small_config(2, 10);
    c.eta = 1.0;
    c.learning_rate = 5e-3;
    c.max_epochs = 800;
    const auto part = dataio::partition_days(200, 0.75, 5);
    const auto r = train_cvae(y, x, part, c, 6);
    const Matrix low = r.model.generate(Vector::Zero(1), 400, 1);
    const Matrix high = r.model.generate(Vector::Ones(1), 400, 1);
    const double diff = (high.colwise().mean() - low.colwise().mean()).mean();
    EXPECT_NEAR(diff, 0.5, 0.125);
}

TEST(Training, DeterministicAndGenerationProperties) {
    Matrix y, x;
    two_regime_data(40, 0.3, 0.05, 7, y, x);
    CvaeConfig c = small_config(2, 5);
    c.max_epochs = 30;
    const auto part = dataio::partition_days(40, 0.75, 8);
    const auto a = train_cvae(y, x, part, c, 9);
    const auto b = train_cvae(y, x, part, c, 9);
    EXPECT_EQ(a.model.parameters(), b.model.parameters());
    EXPECT_EQ(a.test_mse, b.test_mse);

    const Matrix g1 = a.model.generate(Vector::Ones(1), 200, 5), g2 = a.model.generate(Vector::Ones(1), 200, 5);
    EXPECT_EQ(g1, g2);
    EXPECT_EQ(g1.rows(), 200);
    EXPECT_GE(g1.minCoeff(), a.model.y_min());
    EXPECT_LE(g1.maxCoeff(), a.model.y_max());
    const Matrix flat = a.model.generate(Vector::Ones(1), 5, 5, 0.0);
    const Matrix at_zero = a.model.unscale(a.model.decode(Matrix::Zero(2, 1), Matrix::Ones(1, 1))).transpose();
    for (int i = 0; i < 5; ++i) EXPECT_EQ(flat.row(i), at_zero.row(0));
}

TEST(Restarts, SelectionIsArgmin) {
    std::vector<TrainResult> runs(3);
    runs[0].test_mse = 0.5;
    runs[1].test_mse = 0.2;
    runs[2].test_mse = 0.9;
    EXPECT_EQ(select_best(runs), 1u);
    runs[1].failed = true;
    EXPECT_EQ(select_best(runs), 0u);
    for (auto& r : runs) r.failed = true;
    EXPECT_THROW(select_best(runs), NumericalError);
    EXPECT_EQ(CvaeConfig{}.restarts, 50);
    EXPECT_EQ(CvaeConfig{}.latent_dim, 4);
}

TEST(Restarts, SeedsArePerRestart) {
    Matrix y, x;
    two_regime_data(30, 0.3, 0.05, 9, y, x);
    CvaeConfig c = small_config(1, 4);
    c.max_epochs = 10;
    c.restarts = 3;
    c.seed = 100;
    const auto part = dataio::partition_days(30, 0.75, 1);
    const auto out = train_with_restarts(y, x, part, c);
    ASSERT_EQ(out.test_mse.size(), 3u);
    EXPECT_EQ(out.best.test_mse, *std::min_element(out.test_mse.begin(), out.test_mse.end()));
    EXPECT_EQ(train_cvae(y, x, part, c, 101).test_mse, out.test_mse[1]);
}

TEST(GridSearch, SinglePointAndArgmin) {
    Matrix y, x;
    two_regime_data(30, 0.3, 0.05, 10, y, x);
    CvaeConfig c = small_config(1, 4);
    c.max_epochs = 5;
    c.restarts = 1;
    const auto part = dataio::partition_days(30, 0.75, 1);
    const std::vector<CvaeConfig> one{c};
    EXPECT_EQ(grid_search(one, y, x, part).best.latent_dim, 1);
    std::vector<CvaeConfig> grid;
    for (int d : {1, 3, 20}) {
        grid.push_back(c);
        grid.back().latent_dim = d;
    }
    const auto r = grid_search(grid, y, x, part);
    const auto best = std::min_element(r.test_mse.begin(), r.test_mse.end()) - r.test_mse.begin();
    EXPECT_EQ(r.best.latent_dim, grid[static_cast<std::size_t>(best)].latent_dim);
    EXPECT_THROW(grid_search(std::span<const CvaeConfig>{}, y, x, part), ConfigError);
}

TEST(ModelFile, SaveLoadRoundTripIsExact) {
    Rng rng(11);
    Cvae model(48, 101, CvaeConfig{}, rng);
    model.set_scaling(0.01, 2.5);
    std::stringstream ss;
    model.save(ss);
    const Cvae back = Cvae::load(ss);
    EXPECT_EQ(back.parameters(), model.parameters());
    EXPECT_EQ(back.y_min(), 0.01);
    EXPECT_EQ(back.y_max(), 2.5);
    EXPECT_EQ(back.latent_dim(), 4);
    std::istringstream bad("drsim-cvae 2\n");
    EXPECT_THROW(Cvae::load(bad), ParseError);
}
