// Copyright 2026 The dualfuzz Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Behavior-space novelty: Gaussian mixtures over single states and over
// consecutive state pairs, updated by stepwise online EM, and the
// telescoped trajectory probability built from them. All probabilities are
// handled as natural-log densities.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "envs.hpp"

namespace dualfuzz {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double log_sum_exp(std::span<const double> v)
{
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        m = std::max(m, x);
    if (!std::isfinite(m))
        return m;
    double s = 0.0;
    for (double x : v)
        s += std::exp(x - m);
    return m + std::log(s);
}

/// Finite mixture of full-covariance Gaussians with cached Cholesky factors.
class GaussianMixture {
public:
    GaussianMixture() = default;

    GaussianMixture(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covariances)
    {
        set(std::move(weights), std::move(means), std::move(covariances));
    }

    void set(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covariances)
    {
        if (weights.empty() || weights.size() != means.size() || weights.size() != covariances.size())
            throw InputError("mixture parameter lists must be non-empty and of equal length");
        const auto d = means.front().size();
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (means[k].size() != d || covariances[k].rows() != d || covariances[k].cols() != d)
                throw InputError("mixture component dimensions disagree");
            if (!(weights[k] > 0.0))
                throw InputError("mixture weights must be positive");
        }
        weights_ = std::move(weights);
        means_ = std::move(means);
        covs_ = std::move(covariances);
        refresh();
    }

    bool empty() const { return weights_.empty(); }
    std::size_t components() const { return weights_.size(); }
    Eigen::Index dim() const { return empty() ? 0 : means_.front().size(); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Vector>& means() const { return means_; }
    const std::vector<Matrix>& covariances() const { return covs_; }

    double log_component(std::size_t k, const Vector& x) const
    {
        const Vector z = chol_[k].matrixL().solve(x - means_[k]);
        return log_weights_[k] - 0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) +
                                        log_dets_[k] + z.squaredNorm());
    }

    double log_density(const Vector& x) const
    {
        if (empty())
            throw InputError("mixture has no components");
        if (x.size() != dim())
            throw InputError("feature vector has dimension " + std::to_string(x.size()) + ", mixture expects " +
                             std::to_string(dim()));
        std::vector<double> terms(components());
        for (std::size_t k = 0; k < components(); ++k)
            terms[k] = log_component(k, x);
        return log_sum_exp(terms);
    }

    double density(const Vector& x) const { return std::exp(log_density(x)); }

    /// Log-likelihood of `data` and the normalized responsibilities.
    double responsibilities(std::span<const Vector> data, Matrix& resp) const
    {
        resp.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(components()));
        double ll = 0.0;
        std::vector<double> terms(components());
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t k = 0; k < components(); ++k)
                terms[k] = log_component(k, data[i]);
            const double lse = log_sum_exp(terms);
            ll += lse;
            for (std::size_t k = 0; k < components(); ++k)
                resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::exp(terms[k] - lse);
        }
        return ll;
    }

private:
    void refresh()
    {
        chol_.clear();
        log_dets_.clear();
        log_weights_.clear();
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            Eigen::LLT<Matrix> llt(covs_[k]);
            if (llt.info() != Eigen::Success)
                throw InputError("mixture covariance " + std::to_string(k) + " is not positive definite");
            log_dets_.push_back(2.0 * llt.matrixLLT().diagonal().array().log().sum());
            chol_.push_back(std::move(llt));
            log_weights_.push_back(std::log(weights_[k]));
        }
    }

    std::vector<double> weights_;
    std::vector<Vector> means_;
    std::vector<Matrix> covs_;
    std::vector<Eigen::LLT<Matrix>> chol_;
    std::vector<double> log_dets_;
    std::vector<double> log_weights_;
};

/// Sum_k phi_k N(x | mu_k, Sigma_k).
inline double gmm_density(const GaussianMixture& model, const Vector& x) { return model.density(x); }

/// Per-point averaged sufficient statistics (responsibility mass, first and
/// second moments) of a mixture.
struct MixtureStats {
    std::vector<double> mass;
    std::vector<Vector> first;
    std::vector<Matrix> second;

    static MixtureStats from_batch(std::span<const Vector> data, const Matrix& resp)
    {
        const auto K = static_cast<std::size_t>(resp.cols());
        const auto d = data.front().size();
        MixtureStats s;
        s.mass.assign(K, 0.0);
        s.first.assign(K, Vector::Zero(d));
        s.second.assign(K, Matrix::Zero(d, d));
        const double inv_n = 1.0 / static_cast<double>(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double r = resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * inv_n;
                if (r == 0.0)
                    continue;
                s.mass[k] += r;
                s.first[k].noalias() += r * data[i];
                s.second[k].noalias() += r * data[i] * data[i].transpose();
            }
        }
        return s;
    }

    void blend(const MixtureStats& batch, double rho)
    {
        for (std::size_t k = 0; k < mass.size(); ++k) {
            mass[k] = (1.0 - rho) * mass[k] + rho * batch.mass[k];
            first[k] = (1.0 - rho) * first[k] + rho * batch.first[k];
            second[k] = (1.0 - rho) * second[k] + rho * batch.second[k];
        }
    }
};

namespace detail {

// M-step from sufficient statistics. Components whose mass has collapsed
// keep their previous mean and covariance.
inline GaussianMixture maximize(const MixtureStats& s, const GaussianMixture& prev, double ridge)
{
    const std::size_t K = s.mass.size();
    const double total = std::accumulate(s.mass.begin(), s.mass.end(), 0.0);
    constexpr double kWeightFloor = 1e-10;
    std::vector<double> w(K);
    std::vector<Vector> mu(K);
    std::vector<Matrix> cov(K);
    double wsum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        w[k] = std::max(s.mass[k] / total, kWeightFloor);
        wsum += w[k];
        if (s.mass[k] > 1e-12 * total) {
            mu[k] = s.first[k] / s.mass[k];
            Matrix c = s.second[k] / s.mass[k] - mu[k] * mu[k].transpose();
            c = 0.5 * (c + c.transpose());
            cov[k] = c;
        } else {
            mu[k] = prev.means()[k];
            cov[k] = prev.covariances()[k];
            continue;
        }
        const auto d = mu[k].size();
        double r = ridge;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Matrix trial = cov[k] + r * Matrix::Identity(d, d);
            Eigen::LLT<Matrix> llt(trial);
            if (llt.info() == Eigen::Success) {
                cov[k] = std::move(trial);
                break;
            }
            r *= 10.0;
        }
    }
    for (auto& x : w)
        x /= wsum;
    return GaussianMixture(std::move(w), std::move(mu), std::move(cov));
}

} // namespace detail

/// One full-batch EM iteration. Returns the data log-likelihood under the
/// parameters before the update.
inline double em_step(GaussianMixture& model, std::span<const Vector> data, double ridge)
{
    Matrix resp;
    const double ll = model.responsibilities(data, resp);
    model = detail::maximize(MixtureStats::from_batch(data, resp), model, ridge);
    return ll;
}

inline double log_likelihood(const GaussianMixture& model, std::span<const Vector> data)
{
    double ll = 0.0;
    for (const auto& x : data)
        ll += model.log_density(x);
    return ll;
}

struct NoveltyModelConfig {
    std::size_t components = 4;
    double t0 = 10.0;             // step-size offset
    double kappa = 0.6;           // step-size decay exponent
    double ridge_scale = 1e-6;    // ridge = ridge_scale * mean per-dimension variance of the first batch
    double density_floor = 1e-300;
    std::size_t subsample = 1;    // keep every k-th state
    std::size_t init_iterations = 10;

    void validate() const
    {
        if (components < 1)
            throw InputError("novelty model needs at least one component");
        if (!(kappa > 0.5 && kappa <= 1.0))
            throw InputError("step-size decay exponent must lie in (0.5, 1]");
        if (!(t0 >= 0.0))
            throw InputError("step-size offset must be nonnegative");
        if (!(ridge_scale > 0.0) || !(density_floor > 0.0))
            throw InputError("ridge scale and density floor must be positive");
        if (subsample < 1)
            throw InputError("subsample stride must be at least one");
    }
};

/// A mixture plus the running statistics of stepwise online EM.
class OnlineMixture {
public:
    OnlineMixture() = default;

    bool initialized() const { return !mixture_.empty(); }
    const GaussianMixture& mixture() const { return mixture_; }
    const MixtureStats& stats() const { return stats_; }
    std::uint64_t updates() const { return updates_; }
    double ridge() const { return ridge_; }

    void absorb(std::span<const Vector> batch, const NoveltyModelConfig& cfg)
    {
        if (batch.empty())
            return;
        if (!initialized()) {
            initialize(batch, cfg);
        } else {
            if (batch.front().size() != mixture_.dim())
                throw InputError("trajectory feature dimension does not match the model");
            const double rho = std::pow(static_cast<double>(updates_) + cfg.t0, -cfg.kappa);
            Matrix resp;
            mixture_.responsibilities(batch, resp);
            stats_.blend(MixtureStats::from_batch(batch, resp), std::min(rho, 1.0));
            mixture_ = detail::maximize(stats_, mixture_, ridge_);
        }
        ++updates_;
    }

    // Checkpoint restore.
    void restore(GaussianMixture m, MixtureStats s, std::uint64_t updates, double ridge)
    {
        mixture_ = std::move(m);
        stats_ = std::move(s);
        updates_ = updates;
        ridge_ = ridge;
    }

private:
    void initialize(std::span<const Vector> batch, const NoveltyModelConfig& cfg)
    {
        const auto d = batch.front().size();
        const auto n = static_cast<double>(batch.size());
        Vector mean = Vector::Zero(d);
        for (const auto& x : batch)
            mean += x;
        mean /= n;
        double var = 0.0;
        for (const auto& x : batch)
            var += (x - mean).squaredNorm();
        var /= n * static_cast<double>(d);
        const double scale = var > 0.0 ? var : 1.0;
        ridge_ = cfg.ridge_scale * scale;

        // Farthest-first seeding: deterministic k-means++ variant.
        std::vector<Vector> centers{batch.front()};
        std::vector<double> dist(batch.size(), std::numeric_limits<double>::infinity());
        while (centers.size() < cfg.components) {
            std::size_t best = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                dist[i] = std::min(dist[i], (batch[i] - centers.back()).squaredNorm());
                if (dist[i] > dist[best])
                    best = i;
            }
            centers.push_back(batch[best]);
        }
        std::vector<double> w(cfg.components, 1.0 / static_cast<double>(cfg.components));
        std::vector<Matrix> cov(cfg.components, scale * Matrix::Identity(d, d));
        mixture_ = GaussianMixture(std::move(w), std::move(centers), std::move(cov));
        for (std::size_t it = 0; it < cfg.init_iterations; ++it)
            em_step(mixture_, batch, ridge_);
        Matrix resp;
        mixture_.responsibilities(batch, resp);
        stats_ = MixtureStats::from_batch(batch, resp);
    }

    GaussianMixture mixture_;
    MixtureStats stats_;
    std::uint64_t updates_ = 0;
    double ridge_ = 0.0;
};

/// State and transition mixtures over behavior trajectories.
class GmmNoveltyModel {
public:
    explicit GmmNoveltyModel(NoveltyModelConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    const NoveltyModelConfig& config() const { return cfg_; }
    const OnlineMixture& state_model() const { return state_; }
    const OnlineMixture& transition_model() const { return transition_; }
    std::uint64_t observed_count() const { return observed_; }
    bool fitted() const { return state_.initialized(); }

    std::vector<Vector> features(const Trajectory& traj) const
    {
        std::vector<Vector> out;
        for (std::size_t t = 0; t < traj.size(); t += cfg_.subsample)
            out.push_back(Eigen::Map<const Vector>(traj.states[t].data(),
                                                   static_cast<Eigen::Index>(traj.states[t].size())));
        return out;
    }

    static std::vector<Vector> pairs(std::span<const Vector> feats)
    {
        std::vector<Vector> out;
        for (std::size_t t = 0; t + 1 < feats.size(); ++t) {
            Vector v(feats[t].size() * 2);
            v << feats[t], feats[t + 1];
            out.push_back(std::move(v));
        }
        return out;
    }

    void fit_online(const Trajectory& traj)
    {
        check(traj);
        const auto feats = features(traj);
        state_.absorb(feats, cfg_);
        transition_.absorb(pairs(feats), cfg_);
        ++observed_;
    }

    /// log Pr(T_0..T_M) = log GMM^s(T_0)
    ///     + sum_t [log GMM^c(T_t, T_{t+1}) - log max(GMM^s(T_t), floor)].
    double log_probability(const Trajectory& traj) const
    {
        check(traj);
        if (!fitted())
            throw InputError("novelty model has not absorbed any trajectory yet");
        const auto feats = features(traj);
        const double log_floor = std::log(cfg_.density_floor);
        double lp = state_.mixture().log_density(feats.front());
        if (feats.size() > 1 && !transition_.initialized())
            throw InputError("transition model has not absorbed any state pair yet");
        for (std::size_t t = 0; t + 1 < feats.size(); ++t) {
            Vector pair(feats[t].size() * 2);
            pair << feats[t], feats[t + 1];
            lp += transition_.mixture().log_density(pair) -
                  std::max(state_.mixture().log_density(feats[t]), log_floor);
        }
        return lp;
    }

    /// A model scoring with the given mixtures; its online statistics start
    /// empty, so a later fit_online step weighs in fully.
    static GmmNoveltyModel from_mixtures(GaussianMixture state, GaussianMixture transition,
                                         NoveltyModelConfig cfg = {})
    {
        if (transition.dim() != 2 * state.dim())
            throw InputError("transition mixture must have twice the state dimension");
        GmmNoveltyModel m(cfg);
        auto empty_stats = [](const GaussianMixture& g) {
            MixtureStats s;
            s.mass.assign(g.components(), 0.0);
            s.first.assign(g.components(), Vector::Zero(g.dim()));
            s.second.assign(g.components(), Matrix::Zero(g.dim(), g.dim()));
            return s;
        };
        auto ss = empty_stats(state);
        auto ts = empty_stats(transition);
        m.state_.restore(std::move(state), std::move(ss), 0, 0.0);
        m.transition_.restore(std::move(transition), std::move(ts), 0, 0.0);
        return m;
    }

    void write(std::ostream& os) const;
    static GmmNoveltyModel read(std::istream& is);

private:
    void check(const Trajectory& traj) const
    {
        if (traj.empty())
            throw InputError("trajectory is empty");
        const auto d = traj.dim();
        for (const auto& s : traj.states)
            if (s.size() != d)
                throw InputError("trajectory states have inconsistent dimensions");
        if (state_.initialized() && static_cast<Eigen::Index>(d) != state_.mixture().dim())
            throw InputError("trajectory state dimension " + std::to_string(d) + " does not match the model");
    }

    NoveltyModelConfig cfg_;
    OnlineMixture state_;
    OnlineMixture transition_;
    std::uint64_t observed_ = 0;
};

namespace detail {

inline void write_vector(std::ostream& os, const char* tag, const Vector& v)
{
    os << tag;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        os << ' ' << format_number(v[i]);
    os << '\n';
}

inline void write_matrix(std::ostream& os, const char* tag, const Matrix& m)
{
    os << tag;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            os << ' ' << format_number(m(r, c));
    os << '\n';
}

inline void expect(std::istream& is, const std::string& tag)
{
    std::string got;
    if (!(is >> got) || got != tag)
        throw InputError("model checkpoint: expected '" + tag + "', found '" + got + "'");
}

inline Vector read_vector(std::istream& is, const std::string& tag, Eigen::Index d)
{
    expect(is, tag);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(is >> v[i]))
            throw InputError("model checkpoint: truncated " + tag);
    return v;
}

inline Matrix read_matrix(std::istream& is, const std::string& tag, Eigen::Index d)
{
    expect(is, tag);
    Matrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            if (!(is >> m(r, c)))
                throw InputError("model checkpoint: truncated " + tag);
    return m;
}

inline void write_mixture(std::ostream& os, const char* name, const OnlineMixture& m)
{
    if (!m.initialized()) {
        os << "mixture " << name << " 0\n";
        return;
    }
    const auto& g = m.mixture();
    const auto& s = m.stats();
    os << "mixture " << name << " 1 " << g.dim() << ' ' << g.components() << ' ' << m.updates() << ' '
       << format_number(m.ridge()) << '\n';
    for (std::size_t k = 0; k < g.components(); ++k) {
        os << "component " << k << ' ' << format_number(g.weights()[k]) << ' ' << format_number(s.mass[k])
           << '\n';
        write_vector(os, "mean", g.means()[k]);
        write_matrix(os, "cov", g.covariances()[k]);
        write_vector(os, "first", s.first[k]);
        write_matrix(os, "second", s.second[k]);
    }
}

inline OnlineMixture read_mixture(std::istream& is, const std::string& name)
{
    expect(is, "mixture");
    expect(is, name);
    int init = 0;
    is >> init;
    OnlineMixture m;
    if (!init)
        return m;
    Eigen::Index d = 0;
    std::size_t K = 0;
    std::uint64_t updates = 0;
    double ridge = 0.0;
    if (!(is >> d >> K >> updates >> ridge) || d < 1 || K < 1)
        throw InputError("model checkpoint: bad mixture header");
    std::vector<double> w(K);
    std::vector<Vector> mu(K);
    std::vector<Matrix> cov(K);
    MixtureStats s;
    s.mass.resize(K);
    s.first.resize(K);
    s.second.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        expect(is, "component");
        std::size_t idx = 0;
        if (!(is >> idx >> w[k] >> s.mass[k]) || idx != k)
            throw InputError("model checkpoint: bad component header");
        mu[k] = read_vector(is, "mean", d);
        cov[k] = read_matrix(is, "cov", d);
        s.first[k] = read_vector(is, "first", d);
        s.second[k] = read_matrix(is, "second", d);
    }
    m.restore(GaussianMixture(std::move(w), std::move(mu), std::move(cov)), std::move(s), updates, ridge);
    return m;
}

} // namespace detail

// Plain decimal text: a header with the schedule constants and
// observed_count, then per-component weights, means, covariances and the
// online-EM statistics of both mixtures.
inline void GmmNoveltyModel::write(std::ostream& os) const
{
    os << "dualfuzz-gmm 1\n";
    os << "config " << cfg_.components << ' ' << format_number(cfg_.t0) << ' ' << format_number(cfg_.kappa) << ' '
       << format_number(cfg_.ridge_scale) << ' ' << format_number(cfg_.density_floor) << ' ' << cfg_.subsample
       << ' ' << cfg_.init_iterations << '\n';
    os << "observed " << observed_ << '\n';
    detail::write_mixture(os, "state", state_);
    detail::write_mixture(os, "transition", transition_);
}

inline GmmNoveltyModel GmmNoveltyModel::read(std::istream& is)
{
    detail::expect(is, "dualfuzz-gmm");
    int version = 0;
    if (!(is >> version) || version != 1)
        throw InputError("model checkpoint: unsupported version");
    detail::expect(is, "config");
    NoveltyModelConfig cfg;
    if (!(is >> cfg.components >> cfg.t0 >> cfg.kappa >> cfg.ridge_scale >> cfg.density_floor >> cfg.subsample >>
          cfg.init_iterations))
        throw InputError("model checkpoint: bad config line");
    GmmNoveltyModel model(cfg);
    detail::expect(is, "observed");
    is >> model.observed_;
    model.state_ = detail::read_mixture(is, "state");
    model.transition_ = detail::read_mixture(is, "transition");
    return model;
}

inline double trajectory_probability(const GmmNoveltyModel& model, const Trajectory& traj)
{
    return model.log_probability(traj);
}

// ---------------------------------------------------------------------------
// Dynamic novelty threshold

enum class ThresholdMode { Fixed, Quantile };

struct NoveltyConfig {
    ThresholdMode mode = ThresholdMode::Quantile;
    double tau = -std::numeric_limits<double>::infinity(); // fixed value, and the quantile-mode fallback
    double quantile = 0.25;
    std::size_t window = 500;

    void validate() const
    {
        if (mode == ThresholdMode::Fixed && std::isnan(tau))
            throw InputError("fixed novelty threshold must be a number");
        if (!(quantile > 0.0 && quantile < 1.0))
            throw InputError("novelty quantile must lie in (0, 1)");
        if (window < 1)
            throw InputError("novelty window must hold at least one entry");
    }
};

/// Threshold in log-density space: the fixed value, or the q-th empirical
/// quantile (linear interpolation between order statistics) of `history`.
inline double novelty_threshold(const NoveltyConfig& cfg, std::span<const double> history)
{
    if (cfg.mode == ThresholdMode::Fixed || history.empty())
        return cfg.tau;
    std::vector<double> v(history.begin(), history.end());
    std::sort(v.begin(), v.end());
    const double pos = cfg.quantile * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Sliding window of recent log-probabilities feeding novelty_threshold.
class NoveltyThreshold {
public:
    explicit NoveltyThreshold(NoveltyConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    void push(double log_prob)
    {
        history_.push_back(log_prob);
        if (history_.size() > cfg_.window)
            history_.pop_front();
    }

    double value() const
    {
        std::vector<double> h(history_.begin(), history_.end());
        return novelty_threshold(cfg_, h);
    }

    const NoveltyConfig& config() const { return cfg_; }
    std::size_t size() const { return history_.size(); }

private:
    NoveltyConfig cfg_;
    std::deque<double> history_;
};

} // namespace dualfuzz
