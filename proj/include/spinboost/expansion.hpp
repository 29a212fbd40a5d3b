#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "boostmap.hpp"
#include "errors.hpp"
#include "wavepackets.hpp"

// Quadratic expansion of Gamma about the packet mean,
//
//   Gamma(P, P') = 1 - 1/2 (dP, dP') [[U, V^T], [V, U]] (dP, dP')^T + ...
//
// and the quantities built on it: the leading-order depurification
// tr(U Sigma) = sum_l D_l <dQ_l^2> and the localization bound
// 1 - 1/4 sum_l D_l / <dX_l^2>.

namespace spinboost {

struct HessianBlocks
{
    MatrixXd u;            //!< -d^2 Gamma / dP_i dP_j at (mean, mean), symmetrized
    MatrixXd v;            //!< -d^2 Gamma / dP'_i dP_j at (mean, mean)
    VectorXd point;        //!< evaluation point <P>
    double step{0};        //!< finite-difference step h
    VectorXd gradient;     //!< d Gamma(., mean) / dP at the mean (should vanish)
    double richardson_delta{0};  //!< max |U(h) - U(h/2)| / max |U(h/2)|
    bool converged{true};        //!< richardson_delta <= 1%
};

/// 1e-3 * max(m, packet width, |<p>|_inf)
inline double default_step(ParticleSet const& particles, WavePacket const& packet)
{
    double scale = packet.width();
    for (double m : particles.masses())
        scale = std::max(scale, m);
    scale = std::max(scale, packet.center().cwiseAbs().maxCoeff());
    return 1e-3 * scale;
}

namespace detail {

// Second differences act on the deficit tr(rho^2) - Gamma, so U and V carry
// the opposite sign of the raw stencil.
inline MatrixXd hessian_u(GammaKernel const& g, VectorXd const& c, double h)
{
    auto const n = c.size();
    double const f0 = g.deficit(c, c);
    MatrixXd u(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        VectorXd p = c;
        p[i] += h;
        double const plus = g.deficit(p, c);
        p[i] = c[i] - h;
        double const minus = g.deficit(p, c);
        u(i, i) = (plus - 2 * f0 + minus) / (h * h);
        for (Eigen::Index j = 0; j < i; ++j)
        {
            double acc = 0;
            for (int si : {1, -1})
                for (int sj : {1, -1})
                {
                    VectorXd q = c;
                    q[i] += si * h;
                    q[j] += sj * h;
                    acc += si * sj * g.deficit(q, c);
                }
            u(i, j) = u(j, i) = acc / (4 * h * h);
        }
    }
    return u;
}

inline MatrixXd hessian_v(GammaKernel const& g, VectorXd const& c, double h)
{
    auto const n = c.size();
    MatrixXd v(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
        {
            double acc = 0;
            for (int si : {1, -1})
                for (int sj : {1, -1})
                {
                    VectorXd p = c;
                    VectorXd q = c;
                    p[j] += sj * h;
                    q[i] += si * h;
                    acc += si * sj * g.deficit(p, q);
                }
            v(i, j) = acc / (4 * h * h);
        }
    return v;
}

} // namespace detail

/*!
 * Hessian blocks U and V of Gamma at (meanP, meanP) by central differences.
 *
 * For pure rho the zero-order term must be 1 and the gradient in P must vanish;
 * a violation throws ConsistencyError. Stencils at h and h/2 are compared
 * (sets `converged`) and then Richardson-combined. Pure rotations give
 * U = V = 0 exactly.
 */
inline HessianBlocks hessian_blocks(SpinState const& rho, LorentzTransform const& lambda,
                                    ParticleSet const& particles, VectorXd const& mean_p,
                                    double step)
{
    auto const n = static_cast<Eigen::Index>(3 * particles.size());
    if (mean_p.size() != n)
        throw InvalidArgument("mean momentum vector length must be 3N");
    if (!(step > 0) || !std::isfinite(step))
        throw InvalidArgument("finite-difference step must be positive");

    HessianBlocks out;
    out.point = mean_p;
    out.step = step;
    out.gradient = VectorXd::Zero(n);
    if (lambda.is_pure_rotation())
    {
        out.u = MatrixXd::Zero(n, n);
        out.v = MatrixXd::Zero(n, n);
        return out;
    }

    GammaKernel const g(rho, particles, lambda);
    MatrixXd const full = detail::hessian_u(g, mean_p, step);
    MatrixXd const half = detail::hessian_u(g, mean_p, 0.5 * step);
    double const scale = half.cwiseAbs().maxCoeff();
    out.richardson_delta = scale > 0 ? (full - half).cwiseAbs().maxCoeff() / scale : 0.0;
    out.converged = out.richardson_delta <= 0.01;
    // h^2 error terms cancel in the extrapolated combination
    out.u = (4 * half - full) / 3;
    out.u = 0.5 * (out.u + out.u.transpose()).eval();
    out.v = (4 * detail::hessian_v(g, mean_p, 0.5 * step) - detail::hessian_v(g, mean_p, step)) / 3;

    for (Eigen::Index i = 0; i < n; ++i)
    {
        VectorXd p = mean_p;
        p[i] += step;
        double const plus = g.deficit(p, mean_p);
        p[i] = mean_p[i] - step;
        out.gradient[i] = -(plus - g.deficit(p, mean_p)) / (2 * step);
    }
    if (is_pure(rho))
    {
        double const g0 = g(mean_p, mean_p);
        double const grad_tol = 10 * step * (1 + out.u.cwiseAbs().maxCoeff());
        if (std::abs(g0 - 1.0) > 1e-10 || out.gradient.cwiseAbs().maxCoeff() > grad_tol)
            throw ConsistencyError("Gamma is not stationary at the evaluation point");
    }
    return out;
}

struct SpectralExpansion
{
    VectorXd d;                 //!< eigenvalues of U, descending, clipped at 0
    MatrixXd m;                 //!< orthogonal, U = M diag(D) M^T
    VectorXd q_variances;       //!< <dQ_l^2> = (M^T Sigma M)_ll
};

namespace detail {
inline void fix_column_signs(MatrixXd& m)
{
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > 1e-12)
            {
                if (m(r, c) < 0)
                    m.col(c) *= -1.0;
                break;
            }
}
} // namespace detail

/*!
 * Eigendecomposition U = M D M^T with modes sorted by descending D.
 *
 * Within a cluster of degenerate eigenvalues (relative gap <= 1e-6) the basis
 * is rotated to diagonalize the momentum covariance, which fixes M uniquely
 * whenever U and the covariance commute. Column signs put the first nonzero
 * entry positive.
 */
inline SpectralExpansion spectral_decompose(HessianBlocks const& blocks, MatrixXd const& moment_cov)
{
    auto const n = blocks.u.rows();
    if (moment_cov.rows() != n || moment_cov.cols() != n)
        throw InvalidArgument("momentum covariance must be 3N x 3N");
    MatrixXd const u = 0.5 * (blocks.u + blocks.u.transpose());
    double const unorm = u.cwiseAbs().maxCoeff();

    SpectralExpansion out;
    out.d = VectorXd::Zero(n);
    out.m = MatrixXd::Identity(n, n);
    if (unorm > 0)
    {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(u);
        double const zero_tol = std::max(1e-12, 1e-8 * unorm);
        for (Eigen::Index k = 0; k < n; ++k)
        {
            double const val = es.eigenvalues()[n - 1 - k];
            if (val < -zero_tol)
                throw ConsistencyError("Hessian block U is not positive semidefinite");
            out.d[k] = std::abs(val) <= zero_tol ? 0.0 : val;
            out.m.col(k) = es.eigenvectors().col(n - 1 - k);
        }
    }

    MatrixXd const sym_cov = 0.5 * (moment_cov + moment_cov.transpose());
    double const gap_tol = std::max(1e-12, 1e-6 * unorm);
    for (Eigen::Index b = 0; b < n;)
    {
        Eigen::Index e = b + 1;
        while (e < n && std::abs(out.d[e - 1] - out.d[e]) <= gap_tol)
            ++e;
        if (e - b > 1)
        {
            MatrixXd const block = out.m.middleCols(b, e - b);
            MatrixXd const sub = block.transpose() * sym_cov * block;
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sub + sub.transpose()));
            MatrixXd rotated(n, e - b);
            for (Eigen::Index k = 0; k < e - b; ++k)
                rotated.col(k) = block * es.eigenvectors().col(e - b - 1 - k);
            out.m.middleCols(b, e - b) = rotated;
        }
        b = e;
    }
    detail::fix_column_signs(out.m);
    out.q_variances = (out.m.transpose() * sym_cov * out.m).diagonal();
    return out;
}

/// sum_l D_l <dQ_l^2>
inline double predict_depurification(SpectralExpansion const& e)
{
    return std::max(0.0, e.d.dot(e.q_variances));
}

/// tr(U Sigma), the same quantity without diagonalization.
inline double trace_form(MatrixXd const& u, MatrixXd const& cov)
{
    return (u * cov).trace();
}

/// <dX_l^2> = (M^T Sigma_X M)_ll
inline VectorXd mode_position_variances(SpectralExpansion const& e, MatrixXd const& position_cov)
{
    auto const n = e.m.rows();
    if (position_cov.rows() != n || position_cov.cols() != n)
        throw InvalidArgument("position covariance must be 3N x 3N");
    return (e.m.transpose() * position_cov * e.m).diagonal();
}

/*!
 * 1 - 1/4 sum_{D_l > 0} D_l / <dX_l^2> (hbar = 1). Modes with D_l = 0 do not
 * constrain the bound.
 */
inline double localization_bound(SpectralExpansion const& e, MatrixXd const& position_cov)
{
    VectorXd const xv = mode_position_variances(e, position_cov);
    double sum = 0;
    for (Eigen::Index l = 0; l < xv.size(); ++l)
    {
        if (e.d[l] == 0)
            continue;
        if (!(xv[l] > 0))
            throw InvalidArgument("position variance vanishes on an active mode");
        sum += e.d[l] / xv[l];
    }
    return 1.0 - 0.25 * sum;
}

} // namespace spinboost
