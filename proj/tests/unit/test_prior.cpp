#include <gtest/gtest.h>

#include <random>

#include "sctd/prior.hpp"
#include "sctd/solver.hpp"
#include "test_support.hpp"

namespace {

using namespace sctd;
using namespace sctd::testing;

TEST(Prior, DeltaEpsilonIsGaussianKernelScore) {
  Vec mu(2);
  mu << 0.7, -1.2;
  const ScoreModel model = delta_model(mu);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    const double t = uniform(rng, 0.01, 0.99);
    const Vec z = gaussian_vec(2, rng, 2.0);
    const Vec expected = (z - model.schedule.alpha(t) * mu) / model.schedule.sigma(t);
    EXPECT_LT(rel_error(model.epsilon(z, t, Condition::prompt("a")), expected), 1e-13);
  }
}

TEST(Prior, EpsilonVanishesAtTheMode) {
  Vec mu(2);
  mu << 2.0, 1.0;
  const ScoreModel model = single_gaussian_model(mu, 0.3);
  for (double t : {0.01, 0.3, 0.9}) {
    const Vec eps = model.epsilon(model.schedule.alpha(t) * mu, t, Condition::unconditional());
    EXPECT_LT(eps.norm(), 1e-15);
  }
}

// Oracle: -sigma_t times central differences of the diffused log-density.
TEST(Prior, EpsilonMatchesFiniteDifferenceScore) {
  for (const ScoreModel& model : {two_component_model(), default_model()}) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
      const double t = uniform(rng, 0.02, 0.98);
      const double a = model.schedule.alpha(t), s = model.schedule.sigma(t);
      const Condition y = i % 2 == 0 ? Condition::unconditional()
                                     : Condition::prompt(model.prior.conditions().begin()->first);
      const Vec z = gaussian_vec(2, rng, 1.5 + 2.0 * a);
      const Vec fd = fd_gradient([&](const Vec& x) { return model.prior.log_density(x, a, s, y); },
                                 z, 1e-5);
      EXPECT_LT(rel_error(model.epsilon(z, t, y), Vec(-s * fd)), 1e-5) << "t=" << t;
    }
  }
}

TEST(Prior, EpsilonJacobianMatchesFiniteDifferences) {
  const ScoreModel model = two_component_model();
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    const double t = uniform(rng, 0.02, 0.98);
    const Condition y = i % 2 ? Condition::prompt("both") : Condition::unconditional();
    const Vec z = gaussian_vec(2, rng, 1.5);
    const Propagated p = model.epsilon_with_jacobian(z, t, y);
    const Mat fd = fd_jacobian([&](const Vec& x) { return model.epsilon(x, t, y); }, z);
    EXPECT_LT(rel_error(p.jacobian, fd), 1e-6);
    EXPECT_LT((p.jacobian - p.jacobian.transpose()).norm(), 1e-12 * p.jacobian.norm());
    EXPECT_LT(rel_error(p.value, model.epsilon(z, t, y)), 1e-14);
  }
}

TEST(Prior, EpsilonFiniteFarFromAllComponents) {
  const ScoreModel model = default_model();
  Vec z(2);
  z << 1e6, -1e6;
  for (double t : {0.002, 0.5, 0.998}) {
    EXPECT_TRUE(model.epsilon(z, t, Condition::prompt("upper")).allFinite());
    EXPECT_TRUE(model.epsilon_with_jacobian(z, t, Condition::unconditional()).jacobian.allFinite());
  }
}

TEST(Prior, GuidanceOffReturnsConditionalBranch) {
  const ScoreModel model = default_model();
  Vec z(2);
  z << 0.3, 1.1;
  const Condition y = Condition::prompt("upper");
  EXPECT_EQ(model.epsilon_cfg(z, 0.4, y, 0.0), model.epsilon(z, 0.4, y));
}

TEST(Prior, GuidanceRegroupingWorkedExample) {
  const double eps_y = 2.0, eps_0 = 1.0, eps_star = 0.5, w = 3.0;
  const double grouped = (eps_y - eps_star) + w * (eps_y - eps_0);
  const double regrouped = (eps_0 - eps_star) + (w + 1.0) * (eps_y - eps_0);
  EXPECT_EQ(grouped, 4.5);
  EXPECT_EQ(regrouped, 4.5);
}

TEST(Prior, GuidanceRegroupingAtRandomPoints) {
  const ScoreModel model = default_model();
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const double t = uniform(rng, 0.01, 0.99), w = uniform(rng, 0.0, 10.0);
    const Vec z = gaussian_vec(2, rng, 3.0), eps = gaussian_vec(2, rng);
    const Vec ey = model.epsilon(z, t, Condition::prompt("lower"));
    const Vec e0 = model.epsilon(z, t, Condition::unconditional());
    const Vec a = (ey - eps) + w * (ey - e0);
    const Vec b = (e0 - eps) + (w + 1.0) * (ey - e0);
    EXPECT_LE((a - b).norm(), 1e-12 * std::max(1.0, a.norm()));
    const Vec cfg = model.epsilon_cfg(z, t, Condition::prompt("lower"), w);
    EXPECT_LE((cfg - eps - a).norm(), 1e-12 * std::max(1.0, a.norm()));
  }
}

TEST(Prior, FullSetConditionMakesGuidanceInert) {
  const ScoreModel model = two_component_model();
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    const Vec z = gaussian_vec(2, rng, 2.0);
    const double t = uniform(rng, 0.05, 0.95);
    const Vec base = model.epsilon(z, t, Condition::unconditional());
    for (double w : {0.0, 1.0, 7.5}) {
      EXPECT_LT(rel_error(model.epsilon_cfg(z, t, Condition::prompt("both"), w), base), 1e-12);
    }
  }
}

TEST(Prior, ConditionErrors) {
  const ScoreModel model = default_model();
  const Vec z = Vec::Zero(2);
  EXPECT_THROW(model.epsilon(z, 0.5, Condition::prompt("sideways")), PreconditionError);
  EXPECT_THROW(model.epsilon_cfg(z, 0.5, Condition::unconditional(), 1.0), PreconditionError);
}

TEST(Prior, ConstructionValidation) {
  Vec a = Vec::Zero(2), b = Vec::Ones(2), c = Vec::Ones(3);
  EXPECT_THROW(MixturePrior({{a, 0.1, 0.5}, {b, 0.1, 0.4}}, {}), PreconditionError);
  EXPECT_THROW(MixturePrior({{a, 0.1, 0.5}, {c, 0.1, 0.5}}, {}), PreconditionError);
  EXPECT_THROW(MixturePrior({{a, -0.1, 1.0}}, {}), PreconditionError);
  EXPECT_THROW(MixturePrior({{a, 0.1, 1.0}}, {{"x", {}}}), PreconditionError);
  EXPECT_THROW(MixturePrior({{a, 0.1, 1.0}}, {{"x", {1}}}), PreconditionError);
  EXPECT_NO_THROW(MixturePrior({{a, 0.1, 0.5}, {b, 0.0, 0.5}}, {{"x", {1}}}));
}

TEST(Prior, DefaultPriorShape) {
  const MixturePrior prior = default_prior();
  EXPECT_EQ(prior.dimension(), 2);
  EXPECT_EQ(prior.components().size(), 4u);
  EXPECT_EQ(prior.conditions().size(), 2u);
  for (const auto& [label, subset] : prior.conditions()) EXPECT_EQ(subset.size(), 2u);
}

// A single Gaussian keeps (z - alpha mu) / sqrt(alpha^2 c^2 + sigma^2) fixed along the
// probability-flow trajectory, which gives the affine closed form used as the oracle.
TEST(Prior, SingleGaussianFlowMatchesClosedForm) {
  Vec mu(2);
  mu << 1.0, -2.0;
  const double c = 0.5;
  const ScoreModel model = single_gaussian_model(mu, c);
  const NoiseSchedule& sched = model.schedule;
  auto spread = [&](double t) {
    return std::sqrt(sched.alpha(t) * sched.alpha(t) * c * c + sched.sigma(t) * sched.sigma(t));
  };
  std::mt19937_64 rng(15);
  const double t = sched.t_max(), s = sched.t_min();
  for (int i = 0; i < 5; ++i) {
    const Vec z_t = sched.alpha(t) * mu + spread(t) * gaussian_vec(2, rng);
    const Vec expected = sched.alpha(s) * mu + (spread(s) / spread(t)) * (z_t - sched.alpha(t) * mu);
    const Vec got = reference_solve(model, z_t, t, s, Condition::unconditional(), 200);
    EXPECT_LT((got - expected).norm(), 1e-4);
  }
}

}  // namespace
