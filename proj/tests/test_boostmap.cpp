#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spinboost/boostmap.hpp"

using namespace spinboost;

namespace {

double max_abs(CMat const& m) { return m.cwiseAbs().maxCoeff(); }

ParticleSet const kPair = ParticleSet::identical(2, 1.0, spin_half);
ParticleSet const kSingle = ParticleSet::identical(1, 1.0, spin_half);

VectorXd random_momenta(std::mt19937_64& rng, int n, double scale)
{
    std::normal_distribution<double> d(0.0, scale);
    VectorXd p(n);
    for (int i = 0; i < n; ++i)
        p[i] = d(rng);
    return p;
}

// Bloch z-component after the boost, computed without spin matrices: the
// Bloch vector of every momentum component is rotated by the Wigner rotation
// matrix, then averaged on a midpoint grid with weight exp(-p^2/w^2)/2E.
double bloch_z_oracle(LorentzTransform const& lambda, double w, double m)
{
    int const n = 60;
    double const extent = 6 * w;
    double const h = 2 * extent / n;
    double num = 0;
    double den = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
            {
                Vec3 const p(-extent + (i + 0.5) * h, -extent + (j + 0.5) * h, -extent + (k + 0.5) * h);
                double const wt = std::exp(-p.squaredNorm() / (w * w)) / (2 * std::sqrt(m * m + p.squaredNorm()));
                Mat3 const r = wigner_rotation(lambda, p, m).matrix3;
                num += wt * (r * Vec3::UnitZ()).z();
                den += wt;
            }
    return num / den;
}

} // namespace

TEST(Gamma, EqualArgumentsGiveOne)
{
    std::mt19937_64 rng(1);
    auto const lambda = boost_from_rapidity(Vec3(0.3, -0.8, 0.5));
    for (auto kind : {BellKind::minus, BellKind::plus})
    {
        auto const rho = SpinState::bell_pair(kind);
        for (int i = 0; i < 5; ++i)
        {
            VectorXd const p = random_momenta(rng, 6, 0.5);
            EXPECT_NEAR(gamma(rho, lambda, kPair, p, p), 1.0, 1e-12);
        }
    }
}

TEST(Gamma, PureRotationGivesOne)
{
    std::mt19937_64 rng(2);
    auto const rho = SpinState::bell_pair(BellKind::plus);
    auto const lambda = LorentzTransform::rotation(Vec3(0, 1, 0), 1.2);
    for (int i = 0; i < 5; ++i)
    {
        VectorXd const p = random_momenta(rng, 6, 0.5);
        VectorXd const q = random_momenta(rng, 6, 0.5);
        EXPECT_NEAR(gamma(rho, lambda, kPair, p, q), 1.0, 1e-14);
        // also through the general Wigner route
        auto const general = LorentzTransform::from_matrix(lambda.matrix());
        EXPECT_NEAR(GammaKernel::trace_product(GammaKernel(rho, kPair, general).conjugated(p),
                                               GammaKernel(rho, kPair, general).conjugated(q)),
                    1.0, 1e-12);
    }
}

TEST(Gamma, BelowOneAndSymmetricForBoosts)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    auto const rho = SpinState::bell_pair(BellKind::minus);
    for (int i = 0; i < 50; ++i)
    {
        auto const lambda = boost_from_rapidity(Vec3(n(rng), n(rng), n(rng)));
        VectorXd const p = random_momenta(rng, 6, 0.4);
        VectorXd const q = random_momenta(rng, 6, 0.4);
        double const g = gamma(rho, lambda, kPair, p, q);
        EXPECT_LT(g, 1.0);
        EXPECT_GE(g, 0.0);
        EXPECT_EQ(g, gamma(rho, lambda, kPair, q, p));
    }
}

TEST(Gamma, RejectsWrongLength)
{
    auto const rho = SpinState::up_z({spin_half});
    VectorXd const p = VectorXd::Zero(6);
    EXPECT_THROW(gamma(rho, boost_from_rapidity(Vec3(0, 0, 1)), kSingle, p, p), InvalidArgument);
}

TEST(TransformSpinState, IdentityIsExact)
{
    auto const rho = SpinState::bell_pair(BellKind::plus);
    auto const packet = make_entangled_gaussian(0.2, 0.3, 1.0);
    auto const r = transform_spin_state(rho, LorentzTransform::identity(), packet, kPair,
                                        IntegratorSpec::monte_carlo(1000, 1));
    EXPECT_EQ(r.rho_prime.matrix(), rho.matrix());
    EXPECT_EQ(r.purity, purity(rho));
}

TEST(TransformSpinState, PureRotationConjugates)
{
    Vec3 const axis = Vec3(1, -1, 2).normalized();
    auto const lambda = LorentzTransform::rotation(axis, 0.77);
    auto const packet = make_entangled_gaussian(0.3, 0.5, 1.0);
    for (auto kind : {BellKind::minus, BellKind::plus})
    {
        auto const rho = SpinState::bell_pair(kind);
        auto const r = transform_spin_state(rho, lambda, packet, kPair, IntegratorSpec::monte_carlo(1000, 1));
        CMat const u = rotation_rep(spin_half, axis, 0.77).u;
        CMat const uu = detail::kron(u, u);
        EXPECT_LE(max_abs(r.rho_prime.matrix() - uu * rho.matrix() * uu.adjoint()), 1e-10);
        EXPECT_NEAR(r.purity, 1.0, 1e-10);
    }
}

TEST(TransformSpinState, PeresSingleSpin)
{
    double const m = 1.0;
    auto const rho = SpinState::up_z({spin_half});
    auto const lambda = boost_from_rapidity(Vec3(0.5, 0, 0));
    double const w = 0.05;
    auto const packet = make_single_gaussian(w, Vec3::Zero(), m);
    auto const r = transform_spin_state(rho, lambda, packet, kSingle, IntegratorSpec::gauss_hermite(24));
    ASSERT_TRUE(r.bloch.has_value());
    Vec3 const n = *r.bloch;
    EXPECT_LE(std::abs(n.x()), 1e-10);
    EXPECT_LE(std::abs(n.y()), 1e-10);
    EXPECT_LT(n.z(), 1.0);

    double const oracle = bloch_z_oracle(lambda, w, m);
    EXPECT_NEAR(1 - n.z(), 1 - oracle, 1e-3 * (1 - oracle));
    EXPECT_LE(r.error_estimate, 1e-3 * (1 - r.purity));
}

TEST(TransformSpinState, PeresQuadraticScaling)
{
    auto const rho = SpinState::up_z({spin_half});
    auto const lambda = boost_from_rapidity(Vec3(0.5, 0, 0));
    std::vector<double> const widths{0.01, 0.02, 0.04, 0.08};
    std::vector<double> deficits;
    for (double w : widths)
    {
        auto const packet = make_single_gaussian(w, Vec3::Zero(), 1.0);
        auto const r = transform_spin_state(rho, lambda, packet, kSingle, IntegratorSpec::gauss_hermite(24));
        deficits.push_back(1 - r.bloch->z());
    }
    // slope against the grid oracle's ratio between the outer widths
    double const ratio_oracle =
        (1 - bloch_z_oracle(lambda, 0.08, 1.0)) / (1 - bloch_z_oracle(lambda, 0.01, 1.0));
    EXPECT_NEAR(deficits.back() / deficits.front(), ratio_oracle, 1e-3 * ratio_oracle);
    for (std::size_t i = 1; i < widths.size(); ++i)
    {
        double const local_slope = std::log(deficits[i] / deficits[i - 1]) / std::log(widths[i] / widths[i - 1]);
        EXPECT_NEAR(local_slope, 2.0, 0.05);
    }
}

TEST(TransformSpinState, MonteCarloAgreesWithQuadratureSingleParticle)
{
    auto const rho = SpinState::up_z({spin_half});
    auto const lambda = boost_from_rapidity(Vec3(0.2, 0.0, 1.1));
    auto const packet = make_single_gaussian(0.3, Vec3(0.1, 0.0, 0.0), 1.0);
    auto const gh = transform_spin_state(rho, lambda, packet, kSingle, IntegratorSpec::gauss_hermite(24));
    auto const mc = transform_spin_state(rho, lambda, packet, kSingle, IntegratorSpec::monte_carlo(200000, 4));
    double const se = std::hypot(gh.error_estimate, mc.error_estimate);
    EXPECT_GT(mc.error_estimate, 0);
    EXPECT_LE(std::abs(gh.purity - mc.purity), 3 * se);
}

TEST(TransformSpinState, StateInvariantsAndDepurification)
{
    auto const lambda = boost_from_rapidity(Vec3(0, 0, 1.0));
    auto const packet = make_entangled_gaussian(0.2, 0.4, 1.0);
    for (auto kind : {BellKind::minus, BellKind::plus})
    {
        auto const rho = SpinState::bell_pair(kind);
        auto const r = transform_spin_state(rho, lambda, packet, kPair, IntegratorSpec::monte_carlo(20000, 9));
        CMat const& out = r.rho_prime.matrix();
        EXPECT_LE(max_abs(out - out.adjoint()), 1e-15);
        EXPECT_NEAR(out.trace().real(), 1.0, 1e-14);
        EXPECT_FALSE(r.correction_flagged);
        EXPECT_LE(r.purity, purity(rho) + 3 * r.error_estimate);
        EXPECT_LT(r.purity, 1.0);
        EXPECT_GT(r.error_estimate, 0);
        EXPECT_TRUE(r.input_pure);
    }
}

TEST(TransformSpinState, ThreadCountDoesNotChangeResults)
{
    auto const rho = SpinState::bell_pair(BellKind::minus);
    auto const lambda = boost_from_rapidity(Vec3(0, 0, 1.0));
    auto const packet = make_entangled_gaussian(0.2, 0.0, 1.0);
    auto spec = IntegratorSpec::monte_carlo(20000, 5);
    spec.threads = 1;
    auto const a = transform_spin_state(rho, lambda, packet, kPair, spec);
    spec.threads = 3;
    auto const b = transform_spin_state(rho, lambda, packet, kPair, spec);
    EXPECT_EQ(a.rho_prime.matrix(), b.rho_prime.matrix());
    EXPECT_EQ(a.error_estimate, b.error_estimate);
}

TEST(TransformSpinState, InputValidation)
{
    auto const rho = SpinState::bell_pair(BellKind::minus);
    auto const lambda = boost_from_rapidity(Vec3(0, 0, 1.0));
    auto const single = make_single_gaussian(0.1, Vec3::Zero(), 1.0);
    EXPECT_THROW(transform_spin_state(rho, lambda, single, kPair, IntegratorSpec::monte_carlo(1000, 1)),
                 InvalidArgument);
    auto const heavy = make_entangled_gaussian(0.1, 0.0, 2.0);
    EXPECT_THROW(transform_spin_state(rho, lambda, heavy, kPair, IntegratorSpec::monte_carlo(1000, 1)),
                 InvalidArgument);
    auto const packet = make_entangled_gaussian(0.1, 0.0, 1.0);
    EXPECT_THROW(transform_spin_state(rho, lambda, packet, kPair, IntegratorSpec::monte_carlo(10, 1)),
                 InvalidArgument);
    auto const up = SpinState::up_z({spin_half});
    EXPECT_THROW(transform_spin_state(up, lambda, packet, kPair, IntegratorSpec::monte_carlo(1000, 1)),
                 InvalidArgument);
}

TEST(TransformSpinState, AccuracyErrorCarriesPartialResult)
{
    auto const rho = SpinState::bell_pair(BellKind::minus);
    auto const lambda = boost_from_rapidity(Vec3(0, 0, 1.0));
    auto const packet = make_entangled_gaussian(0.3, 0.0, 1.0);
    auto spec = IntegratorSpec::monte_carlo(1000, 1);
    spec.max_error = 1e-9;
    try
    {
        transform_spin_state(rho, lambda, packet, kPair, spec);
        FAIL() << "expected AccuracyError";
    }
    catch (AccuracyError const& e)
    {
        EXPECT_GT(e.estimate(), 0.5);
        EXPECT_LT(e.estimate(), 1.0);
        EXPECT_GT(e.error(), 1e-9);
    }
}

TEST(DoubleIntegral, TrivialTransforms)
{
    auto const rho = SpinState::bell_pair(BellKind::minus);
    auto const packet = make_entangled_gaussian(0.2, 0.0, 1.0);
    auto const spec = IntegratorSpec::monte_carlo(5000, 1);
    EXPECT_NEAR(boosted_purity_double_integral(rho, LorentzTransform::identity(), packet, kPair, spec).value, 1.0, 1e-14);
    auto const rot = LorentzTransform::rotation(Vec3::UnitZ(), 0.4);
    EXPECT_NEAR(boosted_purity_double_integral(rho, rot, packet, kPair, spec).value, 1.0, 1e-12);
}

TEST(DoubleIntegral, AgreesWithStateRouteForSinglet)
{
    auto const rho = SpinState::bell_pair(BellKind::minus);
    auto const lambda = boost_from_rapidity(Vec3(0, 0, 1.0));
    auto const packet = make_entangled_gaussian(0.1, 0.0, 1.0);
    auto const state = transform_spin_state(rho, lambda, packet, kPair, IntegratorSpec::monte_carlo(200000, 21));
    auto const pair = boosted_purity_double_integral(rho, lambda, packet, kPair, IntegratorSpec::monte_carlo(200000, 22));
    double const se = std::hypot(state.error_estimate, pair.error_estimate);
    EXPECT_GT(pair.error_estimate, 0);
    EXPECT_LT(pair.value, 1.0);
    EXPECT_LE(std::abs(state.purity - pair.value), 3 * se);
}

TEST(DoubleIntegral, QuadraturePairSumMatchesStateRoute)
{
    // On the same grid the pairwise sum and tr(rho'^2) are the same number.
    auto const rho = SpinState::up_z({spin_half});
    auto const lambda = boost_from_rapidity(Vec3(0.4, 0, 0.9));
    auto const packet = make_single_gaussian(0.2, Vec3::Zero(), 1.0);
    auto const spec = IntegratorSpec::gauss_hermite(10);
    auto const pair = boosted_purity_double_integral(rho, lambda, packet, kSingle, spec);
    auto const state = transform_spin_state(rho, lambda, packet, kSingle, spec);
    EXPECT_NEAR(pair.value, state.purity, 1e-13);
}
