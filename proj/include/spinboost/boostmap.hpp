#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "integration.hpp"
#include "kinematics.hpp"
#include "spin.hpp"
#include "wavepackets.hpp"

// Reduced spin state seen by a boosted observer:
//
//   rho'  = int |g(P)|^2 U(P) rho U(P)^+ dP~
//   tr(rho'^2) = int int |g(P)|^2 |g(P')|^2 Gamma(P, P') dP~ dP'~
//   Gamma(P, P') = tr[U(P) rho U(P)^+ U(P') rho U(P')^+]
//
// with U(P) the tensor product of the per-particle Wigner rotation
// representations.

namespace spinboost {

/*!
 * Gamma kernel with cached spin operators.
 *
 * For a pure rotation every Wigner rotation equals the rotation itself, so
 * Gamma reduces to tr(rho^2) and is returned without evaluating U.
 */
class GammaKernel
{
  public:
    GammaKernel(SpinState rho, ParticleSet particles, LorentzTransform lambda)
        : rho_(std::move(rho)), rep_(std::move(particles), std::move(lambda)),
          rotation_(rep_.lambda().is_pure_rotation())
    {
        if (rho_.spins() != rep_.particles().spins())
            throw InvalidArgument("spin state does not match the particle spins");
    }

    SpinState const& rho() const { return rho_; }
    JointRepresentation const& representation() const { return rep_; }

    /// U(P) rho U(P)^+
    CMat conjugated(Eigen::Ref<VectorXd const> const& p) const
    {
        CMat const u = rep_(p);
        return u * rho_.matrix() * u.adjoint();
    }

    double operator()(Eigen::Ref<VectorXd const> const& p, Eigen::Ref<VectorXd const> const& q) const
    {
        check_length(p);
        check_length(q);
        if (rotation_)
            return purity(rho_);
        return trace_product(conjugated(p), conjugated(q));
    }

    /*!
     * tr(rho^2) - Gamma(P, P') evaluated as |X(P) - X(P')|_F^2 / 2, which
     * keeps relative precision when the two conjugates are close.
     */
    double deficit(Eigen::Ref<VectorXd const> const& p, Eigen::Ref<VectorXd const> const& q) const
    {
        check_length(p);
        check_length(q);
        if (rotation_)
            return 0.0;
        return 0.5 * (conjugated(p) - conjugated(q)).squaredNorm();
    }

    /// Re tr(a b), symmetric in its arguments bit for bit.
    static double trace_product(CMat const& a, CMat const& b)
    {
        double ab = 0;
        double ba = 0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
            {
                ab += (a(i, j) * b(j, i)).real();
                ba += (b(i, j) * a(j, i)).real();
            }
        return 0.5 * (ab + ba);
    }

  private:
    void check_length(Eigen::Ref<VectorXd const> const& p) const
    {
        if (static_cast<std::size_t>(p.size()) != 3 * rep_.particles().size())
            throw InvalidArgument("momentum vector length must be 3N");
    }

    SpinState rho_;
    JointRepresentation rep_;
    bool rotation_;
};

/// Gamma(P, P') for a single evaluation. Rho should be pure for the
/// quadratic-expansion semantics; mixed states are evaluated as given.
inline double gamma(SpinState const& rho, LorentzTransform const& lambda,
                    ParticleSet const& particles, Eigen::Ref<VectorXd const> const& p,
                    Eigen::Ref<VectorXd const> const& q)
{
    return GammaKernel(rho, particles, lambda)(p, q);
}

//---------------------------------------------------------------------------//
// Boosted reduced state
//---------------------------------------------------------------------------//

struct BoostedStateResult
{
    SpinState rho_prime;
    double purity{1};
    double error_estimate{0};
    std::string provenance{};
    bool input_pure{true};
    //! max |rho' - rho'^+| / 2 removed by Hermitization
    double hermiticity_correction{0};
    //! |tr rho' - 1| removed by renormalization
    double trace_correction{0};
    //! set when either correction exceeded 1e-6
    bool correction_flagged{false};
    double effective_sample_size{0};
    std::uint64_t points{0};
    std::optional<Vec3> bloch{};
};

struct PurityEstimate
{
    double value{1};
    double error_estimate{0};
    std::uint64_t points{0};
};

namespace detail {

inline void check_packet(WavePacket const& packet, ParticleSet const& particles)
{
    if (packet.particle_count() != particles.size())
        throw InvalidArgument("packet particle count does not match the particle set");
    for (std::size_t k = 0; k < particles.size(); ++k)
        if (std::abs(packet.masses()[k] - particles.mass(k)) > 1e-12 * particles.mass(k))
            throw InvalidArgument("packet masses do not match the particle set");
}

/// Hermitian matrix as d^2 real coordinates: diagonal, then Re and Im of the
/// strict upper triangle.
inline void hermitian_coords(CMat const& x, VectorXd& out)
{
    auto const d = x.rows();
    out.resize(d * d);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        out[k++] = x(i, i).real();
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j)
        {
            out[k++] = x(i, j).real();
            out[k++] = x(i, j).imag();
        }
}

/// Gradient of tr(rho^2) in hermitian_coords.
inline VectorXd purity_gradient(CMat const& rho)
{
    VectorXd g;
    hermitian_coords(rho, g);
    auto const d = rho.rows();
    g.head(d) *= 2.0;
    g.tail(g.size() - d) *= 4.0;
    return g;
}

struct StateAccumulator
{
    explicit StateAccumulator(int d)
        : sum(CMat::Zero(d, d)), q1(VectorXd::Zero(d * d)), q2(MatrixXd::Zero(d * d, d * d))
    {
    }

    double w{0};
    double ww{0};
    CMat sum;     // sum w X
    VectorXd q1;  // sum w^2 y, y = coords(X - rho)
    MatrixXd q2;  // sum w^2 y y^T
    std::uint64_t n{0};

    void merge(StateAccumulator const& o)
    {
        w += o.w;
        ww += o.ww;
        sum += o.sum;
        q1 += o.q1;
        q2 += o.q2;
        n += o.n;
    }
};

struct RawState
{
    CMat rho;
    double stderr_purity{0};
    double ess{0};
    std::uint64_t n{0};
};

inline RawState integrate_state(GammaKernel const& kernel, WavePacket const& packet,
                                IntegratorSpec const& spec, bool with_errors)
{
    PointSource const src(packet, spec);
    int const d = kernel.rho().dim();
    auto acc = chunked_reduce<StateAccumulator>(
        src.size(), spec.threads, [d] { return StateAccumulator(d); },
        [&](StateAccumulator& a, std::uint64_t b, std::uint64_t e) {
            VectorXd p;
            VectorXd y;
            for (std::uint64_t i = b; i < e; ++i)
            {
                double const wt = src.point(i, p);
                CMat const x = kernel.conjugated(p);
                a.w += wt;
                a.ww += wt * wt;
                a.sum += wt * x;
                if (with_errors)
                {
                    hermitian_coords(x - kernel.rho().matrix(), y);
                    a.q1 += (wt * wt) * y;
                    a.q2.selfadjointView<Eigen::Lower>().rankUpdate(y, wt * wt);
                }
                ++a.n;
            }
        });

    RawState out;
    out.rho = acc.sum / acc.w;
    out.ess = acc.w * acc.w / acc.ww;
    out.n = acc.n;
    if (with_errors)
    {
        VectorXd mu;
        hermitian_coords(out.rho - kernel.rho().matrix(), mu);
        MatrixXd const q2 = acc.q2.selfadjointView<Eigen::Lower>();
        MatrixXd const c = q2 - acc.q1 * mu.transpose() - mu * acc.q1.transpose()
                           + acc.ww * mu * mu.transpose();
        VectorXd const g = purity_gradient(out.rho);
        out.stderr_purity = std::sqrt(std::max(0.0, g.dot(c * g)) / (acc.w * acc.w));
    }
    return out;
}

inline BoostedStateResult finish_state(CMat rho, std::vector<Spin> const& spins)
{
    BoostedStateResult r{SpinState::up_z(spins)};
    CMat const herm = 0.5 * (rho + rho.adjoint());
    r.hermiticity_correction = (rho - herm).cwiseAbs().maxCoeff();
    double const tr = herm.trace().real();
    r.trace_correction = std::abs(tr - 1.0);
    r.correction_flagged = r.hermiticity_correction > 1e-6 || r.trace_correction > 1e-6;
    r.rho_prime = SpinState(herm / tr, spins);
    r.purity = purity(r.rho_prime);
    if (spins.size() == 1 && spins[0] == spin_half)
        r.bloch = bloch_vector(r.rho_prime);
    return r;
}

} // namespace detail

/*!
 * Reduced spin state observed after the Lorentz transformation `lambda`.
 *
 * The integral is assembled as a weighted average of conjugated states, then
 * Hermitized and renormalized to unit trace; the size of both corrections is
 * recorded. The error estimate is the delta-method standard error of the
 * purity for Monte Carlo and the difference to a coarser grid for
 * Gauss-Hermite. Pure rotations are handled in closed form.
 */
inline BoostedStateResult transform_spin_state(SpinState const& rho, LorentzTransform const& lambda,
                                               WavePacket const& packet,
                                               ParticleSet const& particles,
                                               IntegratorSpec const& spec)
{
    spec.validate();
    detail::check_packet(packet, particles);
    GammaKernel const kernel(rho, particles, lambda);

    if (lambda.matrix() == Mat4::Identity())
    {
        BoostedStateResult r{rho};
        r.purity = purity(rho);
        r.input_pure = is_pure(rho);
        r.provenance = "identity";
        if (rho.spins().size() == 1 && rho.spins()[0] == spin_half)
            r.bloch = bloch_vector(rho);
        return r;
    }
    if (lambda.is_pure_rotation())
    {
        VectorXd const zero = VectorXd::Zero(3 * particles.size());
        BoostedStateResult r = detail::finish_state(kernel.conjugated(zero), rho.spins());
        r.input_pure = is_pure(rho);
        r.provenance = "pure-rotation";
        return r;
    }

    bool const mc = spec.method == IntegrationMethod::monte_carlo;
    detail::RawState const raw = detail::integrate_state(kernel, packet, spec, mc);
    BoostedStateResult r = detail::finish_state(raw.rho, rho.spins());
    r.input_pure = is_pure(rho);
    r.provenance = spec.describe();
    r.effective_sample_size = raw.ess;
    r.points = raw.n;
    if (mc)
    {
        r.error_estimate = raw.stderr_purity;
    }
    else
    {
        detail::RawState const coarse = detail::integrate_state(kernel, packet, coarser(spec), false);
        r.error_estimate = std::abs(purity(CMat(0.5 * (coarse.rho + coarse.rho.adjoint()))) - r.purity);
    }
    if (r.error_estimate > spec.max_error)
        throw AccuracyError("boosted purity did not reach the requested accuracy", r.purity,
                            r.error_estimate);
    return r;
}

/*!
 * Purity from the double integral of Gamma.
 *
 * Monte Carlo pairs sample i of two independent streams (2 * stream and
 * 2 * stream + 1) so that no point is paired with itself. Gauss-Hermite sums
 * Gamma over all pairs of grid nodes, which limits it to small grids.
 */
inline PurityEstimate boosted_purity_double_integral(SpinState const& rho,
                                                     LorentzTransform const& lambda,
                                                     WavePacket const& packet,
                                                     ParticleSet const& particles,
                                                     IntegratorSpec const& spec)
{
    spec.validate();
    detail::check_packet(packet, particles);
    GammaKernel const kernel(rho, particles, lambda);
    if (lambda.is_pure_rotation())
        return {purity(rho), 0.0, 0};

    if (spec.method == IntegrationMethod::monte_carlo)
    {
        IntegratorSpec a = spec;
        IntegratorSpec b = spec;
        a.stream = 2 * spec.stream;
        b.stream = 2 * spec.stream + 1;
        PointSource const src_a(packet, a);
        PointSource const src_b(packet, b);
        struct Acc
        {
            double w{0}, ww{0}, wy{0}, wwy{0}, wwyy{0};
            std::uint64_t n{0};
            void merge(Acc const& o)
            {
                w += o.w;
                ww += o.ww;
                wy += o.wy;
                wwy += o.wwy;
                wwyy += o.wwyy;
                n += o.n;
            }
        };
        double const shift = purity(rho);
        Acc const acc = chunked_reduce<Acc>(
            spec.samples, spec.threads, [] { return Acc{}; },
            [&](Acc& s, std::uint64_t b0, std::uint64_t e0) {
                VectorXd p;
                VectorXd q;
                for (std::uint64_t i = b0; i < e0; ++i)
                {
                    double const wt = src_a.point(i, p) * src_b.point(i, q);
                    double const y = GammaKernel::trace_product(kernel.conjugated(p),
                                                                kernel.conjugated(q))
                                     - shift;
                    s.w += wt;
                    s.ww += wt * wt;
                    s.wy += wt * y;
                    s.wwy += wt * wt * y;
                    s.wwyy += wt * wt * y * y;
                    ++s.n;
                }
            });
        double const ybar = acc.wy / acc.w;
        double const var = acc.wwyy - 2 * ybar * acc.wwy + ybar * ybar * acc.ww;
        PurityEstimate out{shift + ybar, std::sqrt(std::max(0.0, var)) / acc.w, acc.n};
        if (out.error_estimate > spec.max_error)
            throw AccuracyError("double-integral purity did not reach the requested accuracy",
                                out.value, out.error_estimate);
        return out;
    }

    PointSource const src(packet, spec);
    if (src.size() > 30000)
        throw InvalidArgument("quadrature grid too large for the pairwise double integral");
    std::vector<CMat> states(src.size());
    std::vector<double> weights(src.size());
    VectorXd p;
    double total = 0;
    for (std::uint64_t i = 0; i < src.size(); ++i)
    {
        weights[i] = src.point(i, p);
        states[i] = kernel.conjugated(p);
        total += weights[i];
    }
    struct Acc
    {
        double s{0};
        void merge(Acc const& o) { s += o.s; }
    };
    Acc const acc = chunked_reduce<Acc>(
        src.size(), spec.threads, [] { return Acc{}; },
        [&](Acc& a, std::uint64_t b0, std::uint64_t e0) {
            for (std::uint64_t i = b0; i < e0; ++i)
            {
                double row = 0;
                for (std::uint64_t j = 0; j < states.size(); ++j)
                    row += weights[j] * GammaKernel::trace_product(states[i], states[j]);
                a.s += weights[i] * row;
            }
        },
        64);
    return {acc.s / (total * total), 0.0, src.size() * src.size()};
}

} // namespace spinboost
