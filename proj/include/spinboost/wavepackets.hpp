#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"
#include "random.hpp"

// Momentum-space wave packets.
//
// Both supported packets are real Gaussians: |g(P)|^2 = exp(-(P - mu)^T A (P - mu)) / N
// over the 3N momentum components P = (p1x, p1y, p1z, p2x, ...). Expectations
// are taken against |g|^2 dP~ with the invariant measure dp~ = d^3p / (2E(p));
// constant factors of the measure cancel in every self-normalized quantity.

namespace spinboost {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class PacketKind
{
    single_gaussian,
    entangled_gaussian
};

class WavePacket
{
  public:
    PacketKind kind() const { return kind_; }
    std::size_t particle_count() const { return masses_.size(); }
    Eigen::Index dimension() const { return mean_.size(); }
    std::vector<double> const& masses() const { return masses_; }

    /// w for the single Gaussian, sigma for the entangled Gaussian.
    double width() const { return width_; }
    /// Momentum correlation x of the entangled Gaussian (0 otherwise).
    double correlation() const { return correlation_; }

    VectorXd const& center() const { return mean_; }
    MatrixXd const& precision() const { return precision_; }

    /// Covariance of the Gaussian factor |g|^2 alone, without the 1/2E
    /// measure weights: (2A)^-1.
    MatrixXd const& plain_covariance() const { return plain_cov_; }
    MatrixXd const& plain_cholesky() const { return chol_; }

    /// Normalization constant so that the integral of |g|^2 dP~ is one.
    double normalization() const { return norm_; }

    /// Invariant-measure density prod_k 1 / (2 E_k(p_k)).
    double measure_weight(Eigen::Ref<VectorXd const> const& p) const
    {
        double w = 1.0;
        for (std::size_t k = 0; k < masses_.size(); ++k)
        {
            double const m = masses_[k];
            w *= 0.5 / std::sqrt(m * m + p.segment<3>(3 * k).squaredNorm());
        }
        return w;
    }

    /// Unnormalized Gaussian factor exp(-(P - mu)^T A (P - mu)).
    double gaussian_factor(Eigen::Ref<VectorXd const> const& p) const
    {
        VectorXd const d = p - mean_;
        return std::exp(-d.dot(precision_ * d));
    }

    /// g(P), real and non-negative.
    double amplitude(Eigen::Ref<VectorXd const> const& p) const
    {
        return std::sqrt(gaussian_factor(p) / norm_);
    }

    /// P = mu + L z for a vector z of standard normals.
    VectorXd from_standard(Eigen::Ref<VectorXd const> const& z) const { return mean_ + chol_ * z; }

    friend WavePacket make_single_gaussian(double, Eigen::Vector3d const&, double);
    friend WavePacket make_entangled_gaussian(double, double, double);

  private:
    WavePacket() = default;
    void finish();

    PacketKind kind_{PacketKind::single_gaussian};
    std::vector<double> masses_;
    double width_{0};
    double correlation_{0};
    VectorXd mean_;
    MatrixXd precision_;
    MatrixXd plain_cov_;
    MatrixXd chol_;
    double norm_{1};
};

namespace detail {
/// Gauss-Hermite estimate of E[f(P)] under the plain Gaussian factor.
template <class F>
double gaussian_expectation(VectorXd const& mean, MatrixXd const& chol, int nodes, F&& f)
{
    auto const rule = gauss_hermite(nodes);
    auto const dim = mean.size();
    std::vector<int> idx(dim, 0);
    double const norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(dim));
    double total = 0;
    VectorXd t(dim);
    for (;;)
    {
        double w = norm;
        for (Eigen::Index i = 0; i < dim; ++i)
        {
            t[i] = rule.nodes[idx[i]];
            w *= rule.weights[idx[i]];
        }
        VectorXd const p = mean + std::sqrt(2.0) * (chol * t);
        total += w * f(p);
        Eigen::Index i = 0;
        while (i < dim && ++idx[i] == nodes)
            idx[i++] = 0;
        if (i == dim)
            break;
    }
    return total;
}
} // namespace detail

inline void WavePacket::finish()
{
    auto const dim = mean_.size();
    plain_cov_ = (2.0 * precision_).inverse();
    plain_cov_ = 0.5 * (plain_cov_ + plain_cov_.transpose()).eval();
    Eigen::LLT<MatrixXd> llt(plain_cov_);
    if (llt.info() != Eigen::Success)
        throw InvalidArgument("packet covariance is not positive definite");
    chol_ = llt.matrixL();

    // N = (2 pi)^{D/2} sqrt(det Sigma) * E_plain[prod 1/2E]
    int const nodes = dim <= 3 ? 24 : 8;
    double const mean_weight = detail::gaussian_expectation(
        mean_, chol_, nodes, [this](VectorXd const& p) { return measure_weight(p); });
    double const gauss = std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(dim))
                         * std::sqrt(plain_cov_.determinant());
    norm_ = gauss * mean_weight;
}

/*!
 * Single-particle Gaussian g(p) ~ exp(-(p - mean)^2 / 2w^2).
 *
 * The Gaussian factor alone has per-axis variance w^2 / 2.
 */
inline WavePacket make_single_gaussian(double w, Eigen::Vector3d const& mean, double mass)
{
    if (!(w > 0) || !std::isfinite(w))
        throw InvalidArgument("Gaussian width w must be positive");
    if (!(mass > 0) || !std::isfinite(mass))
        throw InvalidArgument("mass must be positive");
    if (!mean.allFinite())
        throw InvalidArgument("packet mean must be finite");
    WavePacket g;
    g.kind_ = PacketKind::single_gaussian;
    g.masses_ = {mass};
    g.width_ = w;
    g.mean_ = mean;
    g.precision_ = MatrixXd::Identity(3, 3) / (w * w);
    g.finish();
    return g;
}

/*!
 * Two-particle "entangled Gaussian"
 *   |g|^2 ~ exp[-(p1^2 + p2^2) / 4 s^2] exp[-(p1^2 + p2^2 - 2x p1.p2) / 4 s^2 (1 - x^2)].
 *
 * Per spatial axis the precision is A11 = A22 = 1/4s^2 + 1/4s^2(1-x^2),
 * A12 = A21 = -x / 4s^2(1-x^2); axes are independent.
 */
inline WavePacket make_entangled_gaussian(double sigma, double x, double mass)
{
    if (!(sigma > 0) || !std::isfinite(sigma))
        throw InvalidArgument("entangled Gaussian width sigma must be positive");
    if (!(x >= 0 && x < 1))
        throw InvalidArgument("entangled Gaussian correlation x must lie in [0, 1)");
    if (!(mass > 0) || !std::isfinite(mass))
        throw InvalidArgument("mass must be positive");
    WavePacket g;
    g.kind_ = PacketKind::entangled_gaussian;
    g.masses_ = {mass, mass};
    g.width_ = sigma;
    g.correlation_ = x;
    g.mean_ = VectorXd::Zero(6);
    double const s2 = sigma * sigma;
    double const diag = 1.0 / (4 * s2) + 1.0 / (4 * s2 * (1 - x * x));
    double const off = -x / (4 * s2 * (1 - x * x));
    g.precision_ = MatrixXd::Zero(6, 6);
    for (int mu = 0; mu < 3; ++mu)
    {
        g.precision_(mu, mu) = g.precision_(3 + mu, 3 + mu) = diag;
        g.precision_(mu, 3 + mu) = g.precision_(3 + mu, mu) = off;
    }
    g.finish();
    return g;
}

/// Position-space covariance of the Fourier-transformed amplitude. A real
/// Gaussian amplitude is minimal-uncertainty, so Sigma_X = Sigma_Q^-1 / 4.
inline MatrixXd position_covariance(WavePacket const& packet)
{
    switch (packet.kind())
    {
        case PacketKind::single_gaussian:
        case PacketKind::entangled_gaussian:
        {
            MatrixXd out = 0.25 * packet.plain_covariance().inverse();
            return 0.5 * (out + out.transpose());
        }
    }
    throw NotImplemented("position covariance is only available for Gaussian packets");
}

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

/// Draw sample `index` of a (seed, stream) sequence from the plain Gaussian
/// factor. Returns the point; the caller applies measure weights.
inline VectorXd sample_point(WavePacket const& packet, CounterRng const& rng, std::uint64_t index)
{
    auto const dim = packet.dimension();
    std::uint64_t const per = static_cast<std::uint64_t>(dim + 1) / 2;
    VectorXd z(dim);
    for (std::uint64_t j = 0; j < per; ++j)
    {
        auto const pair = rng.normal_pair(index * per + j);
        z[2 * j] = pair[0];
        if (static_cast<Eigen::Index>(2 * j + 1) < dim)
            z[2 * j + 1] = pair[1];
    }
    return packet.from_standard(z);
}

struct WeightedSampleBatch
{
    std::vector<VectorXd> points;
    std::vector<double> weights; //!< prod 1/(2E_k), unnormalized
    std::uint64_t seed{0};
    std::uint64_t stream{0};

    double effective_sample_size() const
    {
        double s1 = 0;
        double s2 = 0;
        for (double w : weights)
        {
            s1 += w;
            s2 += w * w;
        }
        return s1 * s1 / s2;
    }

    /// Self-normalized weighted mean of f over the batch.
    template <class F>
    double weighted_mean(F&& f) const
    {
        double num = 0;
        double den = 0;
        for (std::size_t i = 0; i < points.size(); ++i)
        {
            num += weights[i] * f(points[i]);
            den += weights[i];
        }
        return num / den;
    }
};

inline WeightedSampleBatch draw_weighted_samples(WavePacket const& packet, std::size_t count,
                                                 std::uint64_t seed, std::uint64_t stream)
{
    if (count < 1)
        throw InvalidArgument("sample count must be at least 1");
    CounterRng const rng(seed, stream);
    WeightedSampleBatch batch;
    batch.seed = seed;
    batch.stream = stream;
    batch.points.reserve(count);
    batch.weights.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        batch.points.push_back(sample_point(packet, rng, i));
        batch.weights.push_back(packet.measure_weight(batch.points.back()));
    }
    return batch;
}

} // namespace spinboost
