#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"

/**
 * @file neuralgen.hpp
 * @brief Conditional variational autoencoder on daily profiles: dense networks with manual
 * backpropagation, Adam, restart selection and conditioned generation.
 *
 * Batches are stored column-wise: a batch of B examples of dimension n is an n x B matrix.
 */

namespace drsim::neuralgen {

enum class Activation { Identity, Relu, Sigmoid };

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ParseError("unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
    Matrix weight;  ///< out x in
    Vector bias;
    Activation activation = Activation::Identity;

    Eigen::Index inputs() const { return weight.cols(); }
    Eigen::Index outputs() const { return weight.rows(); }
};

/// Layer inputs and outputs of one forward pass, kept for backpropagation.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
};

class DenseNet {
public:
    DenseNet() = default;

    /// Glorot-uniform weights, zero biases. `sizes` lists input, hidden and output widths.
    DenseNet(std::span<const int> sizes, std::span<const Activation> activations, Rng& rng) {
        if (sizes.size() < 2 || activations.size() != sizes.size() - 1) throw ConfigError("network needs one activation per layer");
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int in = sizes[l], out = sizes[l + 1];
            if (in < 1 || out < 1) throw ConfigError("layer widths must be positive");
            const double limit = std::sqrt(6.0 / (in + out));
            std::uniform_real_distribution<double> u(-limit, limit);
            DenseLayer layer{Matrix(out, in), Vector::Zero(out), activations[l]};
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
            layers_.push_back(std::move(layer));
        }
    }

    explicit DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
        for (std::size_t l = 1; l < layers_.size(); ++l)
            if (layers_[l].inputs() != layers_[l - 1].outputs()) throw ValidationError("layer dimensions do not compose");
    }

    const std::vector<DenseLayer>& layers() const { return layers_; }
    Eigen::Index input_size() const { return layers_.front().inputs(); }
    Eigen::Index output_size() const { return layers_.back().outputs(); }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Weights then bias of every layer, column-major.
    void get_parameters(Eigen::Ref<Vector> out) const {
        Eigen::Index k = 0;
        for (const auto& l : layers_) {
            out.segment(k, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
            k += l.weight.size();
            out.segment(k, l.bias.size()) = l.bias;
            k += l.bias.size();
        }
    }

    void set_parameters(const Eigen::Ref<const Vector>& in) {
        Eigen::Index k = 0;
        for (auto& l : layers_) {
            Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = in.segment(k, l.weight.size());
            k += l.weight.size();
            l.bias = in.segment(k, l.bias.size());
            k += l.bias.size();
        }
    }

    Matrix forward(const Matrix& input, ForwardCache* cache = nullptr) const {
        if (input.rows() != input_size())
            throw ValidationError("network expects input of size " + std::to_string(input_size()) + ", got " + std::to_string(input.rows()));
        if (cache) {
            cache->inputs.clear();
            cache->outputs.clear();
        }
        Matrix a = input;
        for (const auto& l : layers_) {
            Matrix z = (l.weight * a).colwise() + l.bias;
            apply(l.activation, z);
            if (cache) {
                cache->inputs.push_back(std::move(a));
                cache->outputs.push_back(z);
            }
            a = std::move(z);
        }
        return a;
    }

    /**
     * Given dLoss/dOutput, adds dLoss/dParameters into `grad` (same layout as
     * get_parameters) and returns dLoss/dInput.
     */
    Matrix backward(const ForwardCache& cache, const Matrix& grad_output, Eigen::Ref<Vector> grad) const {
        Eigen::Index k = parameter_count();
        Matrix g = grad_output;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const auto& l = layers_[li];
            const Matrix& out = cache.outputs[li];
            switch (l.activation) {
            case Activation::Identity: break;
            case Activation::Relu: g = g.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); break;
            case Activation::Sigmoid: g = g.cwiseProduct((out.array() * (1.0 - out.array())).matrix()); break;
            }
            k -= l.bias.size();
            grad.segment(k, l.bias.size()) += g.rowwise().sum();
            k -= l.weight.size();
            const Matrix gw = g * cache.inputs[li].transpose();
            grad.segment(k, l.weight.size()) += Eigen::Map<const Vector>(gw.data(), gw.size());
            g = l.weight.transpose() * g;
        }
        return g;
    }

private:
    static void apply(Activation a, Matrix& z) {
        switch (a) {
        case Activation::Identity: break;
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Sigmoid: z = (1.0 / (1.0 + (-z.array()).exp())).matrix(); break;
        }
    }

    std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Latent-space helpers

struct EncoderOutput {
    Matrix mean;     ///< d x B
    Matrix log_var;  ///< d x B, log of the diagonal covariance
};

/// z = mean + exp(log_var / 2) * noise, elementwise.
inline Matrix reparameterize(const EncoderOutput& enc, const Matrix& noise) {
    return enc.mean + ((0.5 * enc.log_var.array()).exp() * noise.array()).matrix();
}

/// KL(N(mean, diag exp(log_var)) || N(0, I)) summed over latent dimensions, per column.
inline Vector kl_divergence(const EncoderOutput& enc) {
    return 0.5 * (enc.log_var.array().exp() + enc.mean.array().square() - 1.0 - enc.log_var.array()).matrix().colwise().sum().transpose();
}

inline double kl_divergence(const Vector& mean, const Vector& log_var) {
    return 0.5 * (log_var.array().exp() + mean.array().square() - 1.0 - log_var.array()).sum();
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    Vector first;
    Vector second;
    long step = 0;
};

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline void adam_step(Vector& params, const Vector& grad, AdamState& state, const AdamSettings& s = {}) {
    if (state.first.size() != params.size()) {
        state.first = Vector::Zero(params.size());
        state.second = Vector::Zero(params.size());
        state.step = 0;
    }
    ++state.step;
    state.first = s.beta1 * state.first + (1.0 - s.beta1) * grad;
    state.second = s.beta2 * state.second + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    params.array() -= s.learning_rate * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + s.epsilon);
}

// ---------------------------------------------------------------------------
// Model

struct CvaeConfig {
    int latent_dim = 4;
    std::vector<int> hidden{15};
    double eta = 10.0;
    double learning_rate = 1e-3;
    int max_epochs = 5000;
    int patience = 50;
    int batch_size = 32;
    int restarts = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
        if (eta < 0.0) throw ConfigError("eta must be >= 0");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
        if (max_epochs < 1 || patience < 1 || batch_size < 1 || restarts < 1) throw ConfigError("epochs, patience, batch size and restarts must be >= 1");
        for (int h : hidden)
            if (h < 1) throw ConfigError("hidden widths must be >= 1");
    }

    std::string describe() const {
        std::ostringstream os;
        os << "latent=" << latent_dim << " hidden=";
        for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "x" : "") << hidden[i];
        os << " eta=" << eta << " lr=" << learning_rate << " batch=" << batch_size << " patience=" << patience << " max_epochs=" << max_epochs;
        return os.str();
    }
};

class Cvae {
public:
    Cvae() = default;

    Cvae(int profile_size, int conditional_size, const CvaeConfig& config, Rng& rng) : config_(config) {
        config.validate();
        const int d = config.latent_dim;
        std::vector<int> enc{profile_size + conditional_size}, dec{d + conditional_size};
        std::vector<Activation> enc_act, dec_act;
        for (int h : config.hidden) {
            enc.push_back(h);
            dec.push_back(h);
            enc_act.push_back(Activation::Relu);
            dec_act.push_back(Activation::Relu);
        }
        enc.push_back(2 * d);
        enc_act.push_back(Activation::Identity);
        dec.push_back(profile_size);
        dec_act.push_back(Activation::Sigmoid);
        encoder_ = DenseNet(enc, enc_act, rng);
        decoder_ = DenseNet(dec, dec_act, rng);
    }

    Cvae(DenseNet encoder, DenseNet decoder, CvaeConfig config, double y_min, double y_max)
        : encoder_(std::move(encoder)), decoder_(std::move(decoder)), config_(std::move(config)), y_min_(y_min), y_max_(y_max) {
        const Eigen::Index d = config_.latent_dim;
        if (encoder_.output_size() != 2 * d) throw ValidationError("encoder output must have twice the latent dimension");
        if (decoder_.input_size() - d != encoder_.input_size() - decoder_.output_size())
            throw ValidationError("encoder and decoder disagree on the conditional dimension");
    }

    const CvaeConfig& config() const { return config_; }
    const DenseNet& encoder() const { return encoder_; }
    const DenseNet& decoder() const { return decoder_; }
    int latent_dim() const { return config_.latent_dim; }
    Eigen::Index profile_size() const { return decoder_.output_size(); }
    Eigen::Index conditional_size() const { return decoder_.input_size() - config_.latent_dim; }

    // Scaling to [0, 1] with training-set bounds.
    void set_scaling(double y_min, double y_max) {
        if (!(y_max > y_min)) throw ValidationError("scaling bounds need y_max > y_min");
        y_min_ = y_min;
        y_max_ = y_max;
    }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }
    Matrix scale(const Matrix& y) const { return ((y.array() - y_min_) / (y_max_ - y_min_)).matrix(); }
    Matrix unscale(const Matrix& s) const { return (s.array() * (y_max_ - y_min_) + y_min_).matrix(); }

    Eigen::Index parameter_count() const { return encoder_.parameter_count() + decoder_.parameter_count(); }

    Vector parameters() const {
        Vector p(parameter_count());
        encoder_.get_parameters(p.head(encoder_.parameter_count()));
        decoder_.get_parameters(p.tail(decoder_.parameter_count()));
        return p;
    }

    void set_parameters(const Vector& p) {
        encoder_.set_parameters(p.head(encoder_.parameter_count()));
        decoder_.set_parameters(p.tail(decoder_.parameter_count()));
    }

    EncoderOutput encode(const Matrix& y_scaled, const Matrix& x, ForwardCache* cache = nullptr) const {
        check_batch(y_scaled, x);
        Matrix in(y_scaled.rows() + x.rows(), y_scaled.cols());
        in << y_scaled, x;
        const Matrix out = encoder_.forward(in, cache);
        const Eigen::Index d = config_.latent_dim;
        return {out.topRows(d), out.bottomRows(d)};
    }

    /// Scaled profiles in [0, 1].
    Matrix decode(const Matrix& z, const Matrix& x, ForwardCache* cache = nullptr) const {
        if (z.rows() != config_.latent_dim || z.cols() != x.cols()) throw ValidationError("latent batch has the wrong shape");
        Matrix in(z.rows() + x.rows(), z.cols());
        in << z, x;
        return decoder_.forward(in, cache);
    }

    /**
     * Batch mean of ||y - decode(z, x)||^2 + eta * KL with z drawn through `noise`. When
     * `grad` is given, the gradient with respect to parameters() is written into it.
     */
    double loss(const Matrix& y_scaled, const Matrix& x, const Matrix& noise, Vector* grad = nullptr) const {
        ForwardCache enc_cache, dec_cache;
        const EncoderOutput enc = encode(y_scaled, x, &enc_cache);
        const Matrix z = reparameterize(enc, noise);
        const Matrix y_hat = decode(z, x, &dec_cache);
        const double batch = static_cast<double>(y_scaled.cols());
        const double recon = (y_scaled - y_hat).squaredNorm() / batch;
        const double kl = kl_divergence(enc).sum() / batch;
        if (grad) {
            grad->setZero(parameter_count());
            const Eigen::Index ne = encoder_.parameter_count();
            const Matrix g_yhat = (2.0 / batch) * (y_hat - y_scaled);
            const Matrix g_in = decoder_.backward(dec_cache, g_yhat, grad->tail(decoder_.parameter_count()));
            const Matrix g_z = g_in.topRows(config_.latent_dim);
            const Matrix sd = (0.5 * enc.log_var.array()).exp().matrix();
            Matrix g_enc(2 * config_.latent_dim, y_scaled.cols());
            g_enc.topRows(config_.latent_dim) = g_z + (config_.eta / batch) * enc.mean;
            g_enc.bottomRows(config_.latent_dim) =
                (g_z.array() * noise.array() * 0.5 * sd.array() + (config_.eta / batch) * 0.5 * (enc.log_var.array().exp() - 1.0)).matrix();
            encoder_.backward(enc_cache, g_enc, grad->head(ne));
        }
        return recon + config_.eta * kl;
    }

    /**
     * N profiles (N x H, kWh) decoded from latent codes N(0, sigma^2 I) under one
     * conditional vector.
     */
    Matrix generate(const Vector& x, int count, std::uint64_t seed, double latent_scale = 1.0) const {
        if (x.size() != conditional_size()) throw ValidationError("conditional vector has the wrong dimension");
        Rng rng(seed);
        Matrix z(config_.latent_dim, count);
        fill_standard_normal(rng, z);
        z *= latent_scale;
        return unscale(decode(z, x.replicate(1, count))).transpose();
    }

    // Text model format with hexadecimal floating-point weights.
    void save(std::ostream& out) const;
    static Cvae load(std::istream& in);

private:
    void check_batch(const Matrix& y, const Matrix& x) const {
        if (y.cols() != x.cols()) throw ValidationError("profiles and conditional vectors differ in batch size");
        if (y.rows() != profile_size() || x.rows() != conditional_size())
            throw ValidationError("expected profile size " + std::to_string(profile_size()) + " and conditional size " +
                                  std::to_string(conditional_size()));
    }

    DenseNet encoder_, decoder_;
    CvaeConfig config_;
    double y_min_ = 0.0, y_max_ = 1.0;
};

namespace detail {

inline std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double read_number(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw ParseError("model file truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("bad number '" + tok + "' in model file");
    return v;
}

inline void expect(std::istream& in, std::string_view word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw ParseError("model file: expected '" + std::string(word) + "', got '" + tok + "'");
}

inline std::uint64_t config_hash(const CvaeConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : c.describe()) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
    return h;
}

inline void write_net(std::ostream& out, const std::string& name, const DenseNet& net) {
    out << name << ' ' << net.layers().size() << '\n';
    for (const auto& l : net.layers()) {
        out << "layer " << l.inputs() << ' ' << l.outputs() << ' ' << to_string(l.activation) << '\n';
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) out << hex(l.weight.data()[i]) << (i + 1 == l.weight.size() ? '\n' : ' ');
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) out << hex(l.bias[i]) << (i + 1 == l.bias.size() ? '\n' : ' ');
    }
}

inline DenseNet read_net(std::istream& in, std::string_view name) {
    expect(in, name);
    const auto count = static_cast<int>(read_number(in));
    std::vector<DenseLayer> layers;
    for (int k = 0; k < count; ++k) {
        expect(in, "layer");
        const auto rows_in = static_cast<Eigen::Index>(read_number(in));
        const auto rows_out = static_cast<Eigen::Index>(read_number(in));
        std::string act;
        in >> act;
        DenseLayer l{Matrix(rows_out, rows_in), Vector(rows_out), parse_activation(act)};
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = read_number(in);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = read_number(in);
        layers.push_back(std::move(l));
    }
    return DenseNet(std::move(layers));
}

}  // namespace detail

inline void Cvae::save(std::ostream& out) const {
    out << "drsim-cvae 1\n";
    out << "config_hash " << detail::config_hash(config_) << '\n';
    out << "latent " << config_.latent_dim << "\nhidden " << config_.hidden.size();
    for (int h : config_.hidden) out << ' ' << h;
    out << "\neta " << detail::hex(config_.eta) << "\nlearning_rate " << detail::hex(config_.learning_rate) << '\n';
    out << "scaling " << detail::hex(y_min_) << ' ' << detail::hex(y_max_) << '\n';
    detail::write_net(out, "encoder", encoder_);
    detail::write_net(out, "decoder", decoder_);
}

inline Cvae Cvae::load(std::istream& in) {
    detail::expect(in, "drsim-cvae");
    if (detail::read_number(in) != 1.0) throw ParseError("unsupported model version");
    detail::expect(in, "config_hash");
    std::string stored_hash;
    in >> stored_hash;
    CvaeConfig c;
    detail::expect(in, "latent");
    c.latent_dim = static_cast<int>(detail::read_number(in));
    detail::expect(in, "hidden");
    c.hidden.resize(static_cast<std::size_t>(detail::read_number(in)));
    for (auto& h : c.hidden) h = static_cast<int>(detail::read_number(in));
    detail::expect(in, "eta");
    c.eta = detail::read_number(in);
    detail::expect(in, "learning_rate");
    c.learning_rate = detail::read_number(in);
    detail::expect(in, "scaling");
    const double lo = detail::read_number(in), hi = detail::read_number(in);
    DenseNet enc = detail::read_net(in, "encoder");
    DenseNet dec = detail::read_net(in, "decoder");
    return Cvae(std::move(enc), std::move(dec), c, lo, hi);
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
    Cvae model;
    double test_mse = std::numeric_limits<double>::infinity();
    int epochs = 0;
    std::vector<double> epoch_loss;
    bool failed = false;
    std::string message;
};

/**
 * Reconstruction error (1/|days|) sum ||y_t - D(z_t, x_t)||^2 on scaled profiles with
 * z_t drawn from the encoder's posterior.
 */
inline double reconstruction_mse(const Cvae& model, const Matrix& profiles, const Matrix& conditions, std::span<const int> days, std::uint64_t seed) {
    if (days.empty()) throw ValidationError("no days to evaluate");
    Matrix y(profiles.cols(), static_cast<Eigen::Index>(days.size())), x(conditions.cols(), static_cast<Eigen::Index>(days.size()));
    for (std::size_t i = 0; i < days.size(); ++i) {
        y.col(static_cast<Eigen::Index>(i)) = profiles.row(days[i]).transpose();
        x.col(static_cast<Eigen::Index>(i)) = conditions.row(days[i]).transpose();
    }
    const Matrix ys = model.scale(y);
    Rng rng(seed);
    Matrix noise(model.latent_dim(), y.cols());
    fill_standard_normal(rng, noise);
    const Matrix y_hat = model.decode(reparameterize(model.encode(ys, x), noise), x);
    return (ys - y_hat).squaredNorm() / static_cast<double>(days.size());
}

/**
 * One training run. `profiles` is T x H (kWh), `conditions` T x C. Scaling bounds come from
 * the training days; training stops after `patience` epochs without a lower epoch loss,
 * keeping the best weights. The test MSE is computed on the test days (the training days
 * when the test set is empty).
 */
inline TrainResult train_cvae(const Matrix& profiles, const Matrix& conditions, const dataio::DatasetPartition& partition, const CvaeConfig& config,
                              std::uint64_t seed) {
    config.validate();
    if (partition.train.empty()) throw ValidationError("training set is empty");
    if (profiles.rows() != conditions.rows()) throw ValidationError("one conditional vector per day required");
    Rng rng(seed);
    TrainResult result;
    result.model = Cvae(static_cast<int>(profiles.cols()), static_cast<int>(conditions.cols()), config, rng);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int t : partition.train) {
        lo = std::min(lo, profiles.row(t).minCoeff());
        hi = std::max(hi, profiles.row(t).maxCoeff());
    }
    result.model.set_scaling(lo, hi);
    Cvae& model = result.model;

    std::vector<int> order = partition.train;
    Vector params = model.parameters(), best_params = params, grad;
    AdamState adam;
    const AdamSettings adam_settings{config.learning_rate};
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const auto b = static_cast<Eigen::Index>(stop - start);
            Matrix y(profiles.cols(), b), x(conditions.cols(), b), noise(config.latent_dim, b);
            for (Eigen::Index i = 0; i < b; ++i) {
                y.col(i) = profiles.row(order[start + static_cast<std::size_t>(i)]).transpose();
                x.col(i) = conditions.row(order[start + static_cast<std::size_t>(i)]).transpose();
            }
            fill_standard_normal(rng, noise);
            model.set_parameters(params);
            const double l = model.loss(model.scale(y), x, noise, &grad);
            if (!std::isfinite(l) || !grad.allFinite()) {
                result.failed = true;
                result.message = "non-finite loss at epoch " + std::to_string(epoch);
                model.set_parameters(best_params);
                return result;
            }
            epoch_loss += l * static_cast<double>(b);
            adam_step(params, grad, adam, adam_settings);
        }
        epoch_loss /= static_cast<double>(order.size());
        result.epoch_loss.push_back(epoch_loss);
        result.epochs = epoch + 1;
        if (epoch_loss < best) {
            best = epoch_loss;
            best_params = params;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    model.set_parameters(best_params);
    const auto& eval_days = partition.test.empty() ? partition.train : partition.test;
    result.test_mse = reconstruction_mse(model, profiles, conditions, eval_days, derive_seed(seed, "test-mse"));
    return result;
}

/// Index of the lowest test MSE among non-failed runs; ties go to the earlier run.
inline std::size_t select_best(std::span<const TrainResult> runs) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (!runs[i].failed && (!best || runs[i].test_mse < runs[*best].test_mse)) best = i;
    if (!best) throw NumericalError("all " + std::to_string(runs.size()) + " training restarts failed");
    return *best;
}

struct RestartOutcome {
    TrainResult best;
    std::vector<double> test_mse;  ///< per restart, infinity for a failed one
    std::size_t best_index = 0;
};

/// config.restarts runs with seeds config.seed + r; keeps the lowest test MSE.
inline RestartOutcome train_with_restarts(const Matrix& profiles, const Matrix& conditions, const dataio::DatasetPartition& partition,
                                          const CvaeConfig& config) {
    std::vector<TrainResult> runs;
    for (int r = 0; r < config.restarts; ++r)
        runs.push_back(train_cvae(profiles, conditions, partition, config, config.seed + static_cast<std::uint64_t>(r)));
    RestartOutcome out;
    for (const auto& r : runs) out.test_mse.push_back(r.failed ? std::numeric_limits<double>::infinity() : r.test_mse);
    out.best_index = select_best(runs);
    out.best = std::move(runs[out.best_index]);
    return out;
}

struct GridSearchResult {
    CvaeConfig best;
    std::vector<double> test_mse;  ///< per grid point
};

/// Trains every grid point (with its own restarts) and returns the configuration of lowest test MSE.
inline GridSearchResult grid_search(std::span<const CvaeConfig> grid, const Matrix& profiles, const Matrix& conditions,
                                    const dataio::DatasetPartition& partition) {
    if (grid.empty()) throw ConfigError("empty hyperparameter grid");
    GridSearchResult out;
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto r = train_with_restarts(profiles, conditions, partition, grid[i]);
        out.test_mse.push_back(r.best.test_mse);
        if (out.test_mse[i] < out.test_mse[best]) best = i;
    }
    out.best = grid[best];
    return out;
}

/// `day,sample,h,kwh` rows (1-based h) for an N x H sample matrix.
inline void write_samples(std::ostream& out, int day, const Matrix& samples) {
    for (Eigen::Index s = 0; s < samples.rows(); ++s)
        for (Eigen::Index h = 0; h < samples.cols(); ++h) out << day << ',' << s << ',' << h + 1 << ',' << csv::num(samples(s, h)) << '\n';
}

}  // namespace drsim::neuralgen
