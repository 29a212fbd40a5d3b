#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "wavepackets.hpp"

// Integration back-ends for expectations against |g|^2 dP~.
//
// Monte Carlo draws exact samples from the Gaussian factor and attaches the
// measure weights prod 1/(2E_k) (self-normalized importance sampling).
// Gauss-Hermite uses a tensor grid in the whitened coordinates of the Gaussian
// factor with the same measure weights folded into the node weights.

namespace spinboost {

enum class IntegrationMethod
{
    monte_carlo,
    gauss_hermite
};

struct IntegratorSpec
{
    IntegrationMethod method{IntegrationMethod::monte_carlo};
    std::uint64_t samples{100000};
    std::uint64_t seed{0};
    std::uint64_t stream{0};
    int nodes{24};
    //! Worker threads; 0 means hardware concurrency. Never changes results.
    unsigned threads{0};
    //! Largest acceptable error estimate of the primary quantity.
    double max_error{std::numeric_limits<double>::infinity()};

    static IntegratorSpec monte_carlo(std::uint64_t count, std::uint64_t seed,
                                      std::uint64_t stream = 0)
    {
        IntegratorSpec s;
        s.method = IntegrationMethod::monte_carlo;
        s.samples = count;
        s.seed = seed;
        s.stream = stream;
        return s;
    }

    static IntegratorSpec gauss_hermite(int nodes_per_dim)
    {
        IntegratorSpec s;
        s.method = IntegrationMethod::gauss_hermite;
        s.nodes = nodes_per_dim;
        return s;
    }

    void validate() const
    {
        if (method == IntegrationMethod::monte_carlo && samples < 1000)
            throw InvalidArgument("Monte Carlo integration needs at least 1000 samples");
        if (method == IntegrationMethod::gauss_hermite && nodes < 8)
            throw InvalidArgument("Gauss-Hermite integration needs at least 8 nodes per dimension");
    }

    std::string describe() const
    {
        if (method == IntegrationMethod::monte_carlo)
            return "monte-carlo samples=" + std::to_string(samples) + " seed=" + std::to_string(seed)
                   + " stream=" + std::to_string(stream);
        return "gauss-hermite nodes=" + std::to_string(nodes);
    }
};

//---------------------------------------------------------------------------//
// Deterministic chunked reduction
//---------------------------------------------------------------------------//

inline unsigned resolve_threads(unsigned requested)
{
    if (requested > 0)
        return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/*!
 * Reduce over [0, count) in fixed-size chunks.
 *
 * `body(acc, begin, end)` fills a fresh accumulator for one chunk; chunk
 * results are merged strictly in chunk order, so the result does not depend
 * on the number of threads.
 */
template <class Acc, class Make, class Body>
Acc chunked_reduce(std::uint64_t count, unsigned threads, Make&& make, Body&& body,
                   std::uint64_t chunk = 4096)
{
    std::uint64_t const nchunks = (count + chunk - 1) / chunk;
    std::vector<std::optional<Acc>> parts(nchunks);
    std::atomic<std::uint64_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        try
        {
            for (std::uint64_t c = next++; c < nchunks; c = next++)
            {
                Acc acc = make();
                body(acc, c * chunk, std::min(count, (c + 1) * chunk));
                parts[c].emplace(std::move(acc));
            }
        }
        catch (...)
        {
            next = nchunks;
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    };
    unsigned const n = std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(1, nchunks));
    if (n <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);
    Acc total = make();
    for (auto& p : parts)
        total.merge(*p);
    return total;
}

/*!
 * Enumerates the integration points of a packet: Monte Carlo samples or
 * tensor-grid nodes, each with its weight (measure weight for MC, node weight
 * times measure weight for quadrature).
 */
class PointSource
{
  public:
    PointSource(WavePacket const& packet, IntegratorSpec const& spec)
        : packet_(&packet), spec_(spec), rng_(spec.seed, spec.stream)
    {
        if (spec.method == IntegrationMethod::gauss_hermite)
        {
            rule_ = gauss_hermite(spec.nodes);
            double const total = std::pow(static_cast<double>(spec.nodes),
                                          static_cast<double>(packet.dimension()));
            if (total > 5e8)
                throw InvalidArgument("Gauss-Hermite tensor grid is too large");
            count_ = static_cast<std::uint64_t>(std::llround(total));
            grid_norm_ = std::pow(std::numbers::pi, -0.5 * static_cast<double>(packet.dimension()));
        }
        else
        {
            count_ = spec.samples;
        }
    }

    std::uint64_t size() const { return count_; }
    WavePacket const& packet() const { return *packet_; }

    /// Writes point `index` into p and returns its weight.
    double point(std::uint64_t index, VectorXd& p) const
    {
        if (spec_.method == IntegrationMethod::monte_carlo)
        {
            p = sample_point(*packet_, rng_, index);
            return packet_->measure_weight(p);
        }
        auto const dim = packet_->dimension();
        VectorXd t(dim);
        double w = grid_norm_;
        auto const n = static_cast<std::uint64_t>(spec_.nodes);
        for (Eigen::Index i = 0; i < dim; ++i)
        {
            auto const k = index % n;
            index /= n;
            t[i] = rule_.nodes[k];
            w *= rule_.weights[k];
        }
        p = packet_->center() + std::sqrt(2.0) * (packet_->plain_cholesky() * t);
        return w * packet_->measure_weight(p);
    }

  private:
    WavePacket const* packet_;
    IntegratorSpec spec_;
    CounterRng rng_;
    GaussHermiteRule rule_;
    std::uint64_t count_{0};
    double grid_norm_{1};
};

/// Coarser grid used for the Gauss-Hermite refinement error estimate.
inline IntegratorSpec coarser(IntegratorSpec spec)
{
    spec.nodes = std::max(2, spec.nodes - 4);
    return spec;
}

//---------------------------------------------------------------------------//
// Packet moments
//---------------------------------------------------------------------------//

struct PacketMoments
{
    VectorXd mean;
    MatrixXd covariance;
    VectorXd mean_stderr;
    MatrixXd covariance_stderr;
    double effective_sample_size{0};
    std::uint64_t points{0};
};

namespace detail {
struct MomentAccumulator
{
    explicit MomentAccumulator(Eigen::Index d)
        : s1(VectorXd::Zero(d)), s2(MatrixXd::Zero(d, d)), q1(VectorXd::Zero(d)),
          q2(MatrixXd::Zero(d, d)), q11(MatrixXd::Zero(d, d))
    {
    }

    // weighted sums of shifted coordinates y = P - center
    double w{0};
    double ww{0};
    VectorXd s1;   // sum w y
    MatrixXd s2;   // sum w y y^T
    VectorXd q1;   // sum w^2 y
    MatrixXd q2;   // sum w^2 y y^T
    MatrixXd q11;  // sum w^2 (y_i y_j)^2
    std::uint64_t n{0};

    void add(VectorXd const& y, double wt)
    {
        MatrixXd const yy = y * y.transpose();
        w += wt;
        ww += wt * wt;
        s1 += wt * y;
        s2 += wt * yy;
        q1 += wt * wt * y;
        q2 += wt * wt * yy;
        q11 += wt * wt * yy.cwiseAbs2();
        ++n;
    }

    void merge(MomentAccumulator const& o)
    {
        w += o.w;
        ww += o.ww;
        s1 += o.s1;
        s2 += o.s2;
        q1 += o.q1;
        q2 += o.q2;
        q11 += o.q11;
        n += o.n;
    }
};
} // namespace detail

inline PacketMoments moments_once(WavePacket const& packet, IntegratorSpec const& spec)
{
    PointSource const src(packet, spec);
    auto const d = packet.dimension();
    VectorXd const c = packet.center();
    auto acc = chunked_reduce<detail::MomentAccumulator>(
        src.size(), spec.threads, [d] { return detail::MomentAccumulator(d); },
        [&](detail::MomentAccumulator& a, std::uint64_t b, std::uint64_t e) {
            VectorXd p;
            for (std::uint64_t i = b; i < e; ++i)
            {
                double const wt = src.point(i, p);
                a.add(p - c, wt);
            }
        });

    PacketMoments m;
    VectorXd const my = acc.s1 / acc.w;
    MatrixXd const eyy = acc.s2 / acc.w;
    m.mean = c + my;
    m.covariance = eyy - my * my.transpose();
    m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
    m.points = acc.n;
    m.effective_sample_size = acc.w * acc.w / acc.ww;

    // Ratio-estimator standard errors: sum w^2 (f - fbar)^2 / W^2.
    m.mean_stderr = VectorXd::Zero(d);
    m.covariance_stderr = MatrixXd::Zero(d, d);
    if (spec.method == IntegrationMethod::monte_carlo)
    {
        double const w2 = acc.w * acc.w;
        for (Eigen::Index i = 0; i < d; ++i)
        {
            double const var = acc.q2(i, i) - 2 * my[i] * acc.q1[i] + my[i] * my[i] * acc.ww;
            m.mean_stderr[i] = std::sqrt(std::max(0.0, var) / w2);
        }
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
            {
                double const f = eyy(i, j);
                double const var = acc.q11(i, j) - 2 * f * acc.q2(i, j) + f * f * acc.ww;
                m.covariance_stderr(i, j) = std::sqrt(std::max(0.0, var) / w2);
            }
    }
    return m;
}

/*!
 * Mean and covariance of P under |g|^2 dP~.
 *
 * Monte Carlo reports ratio-estimator standard errors; Gauss-Hermite reports
 * the difference to a grid four nodes coarser. Throws AccuracyError when the
 * largest variance error exceeds `spec.max_error`.
 */
inline PacketMoments moments(WavePacket const& packet, IntegratorSpec const& spec)
{
    spec.validate();
    PacketMoments m = moments_once(packet, spec);
    if (spec.method == IntegrationMethod::gauss_hermite)
    {
        PacketMoments const c = moments_once(packet, coarser(spec));
        m.mean_stderr = (m.mean - c.mean).cwiseAbs();
        m.covariance_stderr = (m.covariance - c.covariance).cwiseAbs();
    }
    double const worst = m.covariance_stderr.diagonal().maxCoeff();
    if (worst > spec.max_error)
        throw AccuracyError("packet moments did not reach the requested accuracy",
                            m.covariance.diagonal().maxCoeff(), worst);
    return m;
}

} // namespace spinboost
