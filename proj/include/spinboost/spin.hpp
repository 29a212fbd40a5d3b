#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "kinematics.hpp"

// Spin-s algebra and multi-particle spin states.
//
// Basis convention: Jz eigenbasis ordered from m = +s down to m = -s, so for
// spin 1/2 index 0 is "up" (Bloch n_z = +1).

namespace spinboost {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Spin quantum number stored as the integer 2s.
struct Spin
{
    int two_s{1};

    static Spin from_value(double s)
    {
        double const twice = 2.0 * s;
        if (!std::isfinite(twice) || twice < 0 || std::abs(twice - std::round(twice)) > 1e-12)
            throw InvalidArgument("spin must be a non-negative multiple of 1/2");
        return Spin{static_cast<int>(std::lround(twice))};
    }

    double value() const { return 0.5 * two_s; }
    int dim() const { return two_s + 1; }

    friend bool operator==(Spin, Spin) = default;
};

inline constexpr Spin spin_half{1};

/// Jx, Jy, Jz for spin s, in the m = +s ... -s basis.
inline std::array<CMat, 3> spin_operators(Spin s)
{
    if (s.two_s < 0)
        throw InvalidArgument("spin must be non-negative");
    int const d = s.dim();
    double const sv = s.value();
    CMat jz = CMat::Zero(d, d);
    CMat jp = CMat::Zero(d, d);
    for (int i = 0; i < d; ++i)
    {
        double const m = sv - i;
        jz(i, i) = m;
        if (i > 0)
        {
            // <m+1| J+ |m>
            jp(i - 1, i) = std::sqrt(sv * (sv + 1) - m * (m + 1));
        }
    }
    CMat const jm = jp.adjoint();
    cplx const two_i(0, 2);
    return {(jp + jm) / 2.0, (jp - jm) / two_i, jz};
}

/// Unitary representing a spatial rotation. `spin` is set for a single
/// particle representation and empty for tensor products.
struct SpinRepMatrix
{
    CMat u;
    std::optional<Spin> spin;

    int dim() const { return static_cast<int>(u.rows()); }
};

namespace detail {
/// exp(-i angle (axis . J)) via eigendecomposition of the Hermitian generator.
inline CMat exp_rotation(std::array<CMat, 3> const& j, Vec3 const& axis, double angle)
{
    int const d = static_cast<int>(j[2].rows());
    if (angle == 0 || d == 1)
        return CMat::Identity(d, d);
    CMat const gen = axis.x() * j[0] + axis.y() * j[1] + axis.z() * j[2];
    Eigen::SelfAdjointEigenSolver<CMat> es(gen);
    CVec phases(d);
    for (int k = 0; k < d; ++k)
        phases[k] = std::polar(1.0, -angle * es.eigenvalues()[k]);
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline CMat kron(CMat const& a, CMat const& b)
{
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}
} // namespace detail

inline SpinRepMatrix rotation_rep(Spin s, Vec3 const& axis, double angle)
{
    if (std::abs(axis.norm() - 1.0) > 1e-10)
        throw InvalidArgument("rotation axis must be a unit vector");
    return {detail::exp_rotation(spin_operators(s), axis, angle), s};
}

inline SpinRepMatrix rotation_rep(Spin s, RotationResult const& r)
{
    return rotation_rep(s, r.axis, r.angle);
}

//---------------------------------------------------------------------------//
// Particles and states
//---------------------------------------------------------------------------//

class ParticleSet
{
  public:
    ParticleSet(std::vector<double> masses, std::vector<Spin> spins)
        : masses_(std::move(masses)), spins_(std::move(spins))
    {
        if (masses_.empty())
            throw InvalidArgument("particle set must contain at least one particle");
        if (masses_.size() != spins_.size())
            throw InvalidArgument("particle masses and spins differ in length");
        for (double m : masses_)
            if (!(m > 0) || !std::isfinite(m))
                throw InvalidArgument("particle masses must be positive");
    }

    /// N identical particles.
    static ParticleSet identical(std::size_t n, double mass, Spin s)
    {
        return ParticleSet(std::vector<double>(n, mass), std::vector<Spin>(n, s));
    }

    std::size_t size() const { return masses_.size(); }
    double mass(std::size_t k) const { return masses_[k]; }
    Spin spin(std::size_t k) const { return spins_[k]; }
    std::vector<double> const& masses() const { return masses_; }
    std::vector<Spin> const& spins() const { return spins_; }

    /// Joint spin dimension prod(2 s_k + 1).
    int spin_dim() const
    {
        int d = 1;
        for (Spin s : spins_)
            d *= s.dim();
        return d;
    }

  private:
    std::vector<double> masses_;
    std::vector<Spin> spins_;
};

enum class BellKind
{
    plus,
    minus
};

/*!
 * Density matrix over the joint spin space of one or more particles.
 *
 * Construction validates Hermiticity (1e-12), unit trace (1e-12) and
 * positivity (eigenvalues >= -1e-10).
 */
class SpinState
{
  public:
    SpinState(CMat matrix, std::vector<Spin> spins) : rho_(std::move(matrix)), spins_(std::move(spins))
    {
        int d = 1;
        for (Spin s : spins_)
            d *= s.dim();
        if (spins_.empty() || rho_.rows() != d || rho_.cols() != d)
            throw InvalidArgument("state dimension does not match the particle spins");
        if (!rho_.allFinite())
            throw InvalidArgument("state has non-finite entries");
        if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw InvalidArgument("state is not Hermitian");
        if (std::abs(rho_.trace() - cplx(1.0)) > 1e-12)
            throw InvalidArgument("state trace is not 1");
        Eigen::SelfAdjointEigenSolver<CMat> es(rho_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw InvalidArgument("state is not positive semidefinite");
    }

    static SpinState pure(CVec const& psi, std::vector<Spin> spins)
    {
        double const n = psi.norm();
        if (!(n > 0))
            throw InvalidArgument("state vector must be nonzero");
        CVec const v = psi / n;
        return SpinState(v * v.adjoint(), std::move(spins));
    }

    /// Every particle in its m = +s state.
    static SpinState up_z(std::vector<Spin> spins)
    {
        int d = 1;
        for (Spin s : spins)
            d *= s.dim();
        CVec psi = CVec::Zero(d);
        psi[0] = 1.0;
        return pure(psi, std::move(spins));
    }

    /// (|01> +- |10>)/sqrt(2) for two spin-1/2 particles, |0> = spin up.
    static SpinState bell_pair(BellKind kind)
    {
        CVec psi = CVec::Zero(4);
        psi[1] = 1.0;
        psi[2] = kind == BellKind::plus ? 1.0 : -1.0;
        return pure(psi, {spin_half, spin_half});
    }

    CMat const& matrix() const { return rho_; }
    std::vector<Spin> const& spins() const { return spins_; }
    int dim() const { return static_cast<int>(rho_.rows()); }

  private:
    CMat rho_;
    std::vector<Spin> spins_;
};

/// tr(rho^2)
inline double purity(CMat const& rho)
{
    // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return rho.cwiseAbs2().sum();
}

inline double purity(SpinState const& state) { return purity(state.matrix()); }

inline bool is_pure(SpinState const& state, double tol = 1e-10)
{
    return std::abs(purity(state) - 1.0) <= tol;
}

/// Bloch vector n_mu = tr(rho sigma_mu) of a single spin-1/2 state.
inline Vec3 bloch_vector(CMat const& rho)
{
    if (rho.rows() != 2 || rho.cols() != 2)
        throw InvalidArgument("Bloch vector requires a single spin-1/2 state");
    return Vec3(2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(),
                (rho(0, 0) - rho(1, 1)).real());
}

inline Vec3 bloch_vector(SpinState const& state)
{
    if (state.spins().size() != 1 || state.spins()[0] != spin_half)
        throw InvalidArgument("Bloch vector requires a single spin-1/2 state");
    return bloch_vector(state.matrix());
}

/// Reduced state of particle `keep`, tracing out all others.
inline CMat partial_trace_keep(CMat const& rho, std::vector<Spin> const& spins, std::size_t keep)
{
    if (keep >= spins.size())
        throw InvalidArgument("particle index out of range");
    int before = 1;
    int after = 1;
    for (std::size_t k = 0; k < spins.size(); ++k)
    {
        if (k < keep)
            before *= spins[k].dim();
        else if (k > keep)
            after *= spins[k].dim();
    }
    int const dk = spins[keep].dim();
    CMat out = CMat::Zero(dk, dk);
    for (int a = 0; a < before; ++a)
        for (int c = 0; c < after; ++c)
            for (int i = 0; i < dk; ++i)
                for (int j = 0; j < dk; ++j)
                    out(i, j) += rho((a * dk + i) * after + c, (a * dk + j) * after + c);
    return out;
}

//---------------------------------------------------------------------------//
// Joint representation U_L(P) = U^{s1}(L, p1) x ... x U^{sN}(L, pN)
//---------------------------------------------------------------------------//

/*!
 * Caches the spin operators of every particle so that the joint Wigner
 * representation can be evaluated repeatedly at different momenta.
 *
 * Momenta are passed as one flat 3N vector (p1x, p1y, p1z, p2x, ...).
 */
class JointRepresentation
{
  public:
    JointRepresentation(ParticleSet particles, LorentzTransform lambda)
        : particles_(std::move(particles)), lambda_(std::move(lambda))
    {
        for (Spin s : particles_.spins())
            ops_.push_back(spin_operators(s));
    }

    ParticleSet const& particles() const { return particles_; }
    LorentzTransform const& lambda() const { return lambda_; }

    CMat single(std::size_t k, Vec3 const& p) const
    {
        RotationResult const r = wigner_rotation(lambda_, p, particles_.mass(k));
        return detail::exp_rotation(ops_[k], r.axis, r.angle);
    }

    CMat operator()(Eigen::Ref<Eigen::VectorXd const> const& momenta) const
    {
        if (static_cast<std::size_t>(momenta.size()) != 3 * particles_.size())
            throw InvalidArgument("momentum vector length must be 3N");
        CMat u = single(0, momenta.segment<3>(0));
        for (std::size_t k = 1; k < particles_.size(); ++k)
            u = detail::kron(u, single(k, momenta.segment<3>(3 * k)));
        return u;
    }

  private:
    ParticleSet particles_;
    LorentzTransform lambda_;
    std::vector<std::array<CMat, 3>> ops_;
};

inline SpinRepMatrix joint_rep(ParticleSet const& particles, LorentzTransform const& lambda,
                               std::span<Vec3 const> momenta)
{
    if (momenta.size() != particles.size())
        throw InvalidArgument("one momentum per particle is required");
    Eigen::VectorXd flat(3 * momenta.size());
    for (std::size_t k = 0; k < momenta.size(); ++k)
        flat.segment<3>(3 * k) = momenta[k];
    return {JointRepresentation(particles, lambda)(flat), std::nullopt};
}

} // namespace spinboost
