#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "errors.hpp"

// Four-vector algebra, Lorentz transforms and Wigner rotations.
//
// Conventions: metric signature (+,-,-,-), natural units (hbar = c = 1).
// Four-vectors are stored as (t, x, y, z); a LorentzTransform acts on them by
// ordinary matrix-vector multiplication.

namespace spinboost {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct FourVector
{
    double t{0};
    Vec3 xyz{Vec3::Zero()};

    Vec4 as_vec4() const { return Vec4(t, xyz.x(), xyz.y(), xyz.z()); }

    static FourVector from_vec4(Vec4 const& v)
    {
        return FourVector{v[0], Vec3(v[1], v[2], v[3])};
    }

    /// Minkowski square t^2 - |xyz|^2.
    double norm2() const { return t * t - xyz.squaredNorm(); }
};

/// On-shell four-momentum (E(p), p) for a particle of the given mass.
inline FourVector on_shell(Vec3 const& momentum, double mass)
{
    return FourVector{std::sqrt(mass * mass + momentum.squaredNorm()), momentum};
}

inline Mat4 minkowski_metric()
{
    return Vec4(1.0, -1.0, -1.0, -1.0).asDiagonal();
}

/// max |L^T eta L - eta|
inline double metric_deviation(Mat4 const& m)
{
    Mat4 const eta = minkowski_metric();
    return (m.transpose() * eta * m - eta).cwiseAbs().maxCoeff();
}

//---------------------------------------------------------------------------//
// Spatial rotations
//---------------------------------------------------------------------------//

/// Rodrigues formula for the active rotation by `angle` about unit `axis`.
inline Mat3 rotation_matrix(Vec3 const& axis, double angle)
{
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

struct RotationResult
{
    Mat3 matrix3{Mat3::Identity()};
    Vec3 axis{Vec3::UnitZ()};
    double angle{0}; //!< radians, in [0, pi]
};

namespace detail {
inline Vec3 canonical_sign(Vec3 v)
{
    for (int i = 0; i < 3; ++i)
    {
        if (std::abs(v[i]) > 1e-14)
        {
            return v[i] < 0 ? Vec3(-v) : v;
        }
    }
    return v;
}
} // namespace detail

/*!
 * Axis-angle decomposition of a proper rotation matrix.
 *
 * Small and moderate angles take the axis from the antisymmetric part, which
 * stays accurate down to angle -> 0. Beyond pi/2 the axis comes from the
 * dominant column of the symmetric part, with its sign aligned to the
 * antisymmetric part. At angle 0 (axis undefined) the axis is +z; at exactly
 * pi the axis is chosen with its first nonzero component positive.
 */
inline RotationResult axis_angle(Mat3 const& r)
{
    RotationResult out;
    out.matrix3 = r;
    Vec3 const v = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    double const c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    double const s = v.norm();
    out.angle = std::atan2(s, c);

    if (c >= 0)
    {
        out.axis = s > 0 ? Vec3(v / s) : Vec3::UnitZ();
        return out;
    }

    Mat3 const sym = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
    Eigen::Index col = 0;
    sym.diagonal().maxCoeff(&col);
    Vec3 axis = sym.col(col).normalized();
    if (s > 1e-14)
    {
        if (axis.dot(v) < 0)
            axis = -axis;
    }
    else
    {
        axis = detail::canonical_sign(axis);
    }
    out.axis = axis;
    return out;
}

//---------------------------------------------------------------------------//
// Lorentz transforms
//---------------------------------------------------------------------------//

enum class TransformKind
{
    pure_boost,
    pure_rotation,
    general
};

/*!
 * A proper orthochronous Lorentz transformation.
 *
 * Instances are only produced by the factory functions, which guarantee that
 * the metric is preserved, det = +1 and L^0_0 >= 1.
 */
class LorentzTransform
{
  public:
    LorentzTransform() : matrix_(Mat4::Identity()), kind_(TransformKind::pure_rotation) {}

    static LorentzTransform identity() { return {}; }

    /// Pure boost with the given rapidity vector: L^0_0 = cosh|xi|.
    static LorentzTransform boost(Vec3 const& rapidity)
    {
        if (!rapidity.allFinite())
            throw InvalidArgument("boost rapidity must be finite");
        double const xi = rapidity.norm();
        if (xi == 0)
            return identity();
        Vec3 const n = rapidity / xi;
        double const ch = std::cosh(xi);
        double const sh = std::sinh(xi);
        Mat4 m = Mat4::Identity();
        m(0, 0) = ch;
        m.block<1, 3>(0, 1) = sh * n.transpose();
        m.block<3, 1>(1, 0) = sh * n;
        m.block<3, 3>(1, 1) += (ch - 1.0) * n * n.transpose();
        LorentzTransform out(m, TransformKind::pure_boost);
        out.rapidity_ = rapidity;
        return out;
    }

    static LorentzTransform rotation(Vec3 const& axis, double angle)
    {
        if (!axis.allFinite() || !std::isfinite(angle))
            throw InvalidArgument("rotation axis and angle must be finite");
        if (std::abs(axis.norm() - 1.0) > 1e-10)
            throw InvalidArgument("rotation axis must be a unit vector");
        return rotation(rotation_matrix(axis, angle));
    }

    static LorentzTransform rotation(Mat3 const& r)
    {
        if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10
            || std::abs(r.determinant() - 1.0) > 1e-10)
            throw InvalidArgument("matrix is not a proper rotation");
        Mat4 m = Mat4::Identity();
        m.block<3, 3>(1, 1) = r;
        return LorentzTransform(m, TransformKind::pure_rotation);
    }

    /// Wrap an arbitrary matrix after checking it is a proper orthochronous
    /// Lorentz transformation.
    static LorentzTransform from_matrix(Mat4 const& m)
    {
        if (!m.allFinite() || metric_deviation(m) > 1e-10)
            throw InvalidArgument("matrix does not preserve the Minkowski metric");
        if (m(0, 0) < 1.0 - 1e-12 || m.determinant() < 0)
            throw InvalidArgument("matrix is not proper orthochronous");
        return LorentzTransform(m, TransformKind::general);
    }

    Mat4 const& matrix() const { return matrix_; }
    TransformKind kind() const { return kind_; }
    std::optional<Vec3> const& rapidity() const { return rapidity_; }

    /// True for rotations, including general transforms that leave the time
    /// axis fixed to within 1e-12.
    bool is_pure_rotation() const
    {
        if (kind_ == TransformKind::pure_rotation)
            return true;
        return (matrix_.col(0) - Vec4::UnitX()).cwiseAbs().maxCoeff() <= 1e-12;
    }

    LorentzTransform inverse() const
    {
        Mat4 const eta = minkowski_metric();
        LorentzTransform out(eta * matrix_.transpose() * eta, kind_);
        if (rapidity_)
            out.rapidity_ = -*rapidity_;
        return out;
    }

    friend LorentzTransform operator*(LorentzTransform const& a, LorentzTransform const& b)
    {
        TransformKind kind = TransformKind::general;
        if (a.kind_ == TransformKind::pure_rotation && b.kind_ == TransformKind::pure_rotation)
            kind = TransformKind::pure_rotation;
        return LorentzTransform(a.matrix_ * b.matrix_, kind);
    }

  private:
    LorentzTransform(Mat4 const& m, TransformKind kind) : matrix_(m), kind_(kind) {}

    Mat4 matrix_;
    TransformKind kind_;
    std::optional<Vec3> rapidity_;
};

inline LorentzTransform boost_from_rapidity(Vec3 const& rapidity)
{
    return LorentzTransform::boost(rapidity);
}

inline FourVector apply(LorentzTransform const& lambda, FourVector const& v)
{
    return FourVector::from_vec4(lambda.matrix() * v.as_vec4());
}

/*!
 * Standard boost L(p) taking (m, 0, 0, 0) to (E(p), p).
 *
 * Uses the symmetric form L^0_0 = gamma, L^0_i = L^i_0 = p_i / m,
 * L^i_j = delta_ij + p_i p_j / (m (E + m)).
 */
inline Mat4 standard_boost_matrix(Vec3 const& p, double mass)
{
    double const e = std::sqrt(mass * mass + p.squaredNorm());
    Mat4 m = Mat4::Identity();
    m(0, 0) = e / mass;
    m.block<1, 3>(0, 1) = p.transpose() / mass;
    m.block<3, 1>(1, 0) = p / mass;
    m.block<3, 3>(1, 1) += p * p.transpose() / (mass * (e + mass));
    return m;
}

inline LorentzTransform standard_boost(Vec3 const& momentum, double mass)
{
    if (!(mass > 0) || !std::isfinite(mass))
        throw InvalidArgument("mass must be positive");
    if (!momentum.allFinite())
        throw InvalidArgument("momentum must be finite");
    double const p = momentum.norm();
    if (p == 0)
        return LorentzTransform::identity();
    return LorentzTransform::boost(momentum / p * std::asinh(p / mass));
}

/*!
 * Wigner rotation W(L, p) = L(Lp)^-1 L L(p) for a particle of the given mass.
 *
 * Throws ConsistencyError if W is not a spatial rotation to 1e-9.
 */
inline RotationResult wigner_rotation(LorentzTransform const& lambda, Vec3 const& momentum,
                                      double mass)
{
    if (!(mass > 0))
        throw InvalidArgument("mass must be positive");
    if (lambda.kind() == TransformKind::pure_rotation)
        return axis_angle(lambda.matrix().block<3, 3>(1, 1));

    Vec4 const p4 = on_shell(momentum, mass).as_vec4();
    Vec4 const q4 = lambda.matrix() * p4;
    Vec3 const q = q4.tail<3>();
    Mat4 const w = standard_boost_matrix(-q, mass) * lambda.matrix()
                   * standard_boost_matrix(momentum, mass);

    double const off = std::max(w.block<1, 3>(0, 1).cwiseAbs().maxCoeff(),
                                w.block<3, 1>(1, 0).cwiseAbs().maxCoeff());
    if (std::abs(w(0, 0) - 1.0) > 1e-9 || off > 1e-9)
        throw ConsistencyError("Wigner rotation is not a spatial rotation");
    return axis_angle(w.block<3, 3>(1, 1));
}

} // namespace spinboost
