#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mpmfg/epidemic.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/random.hpp"

using namespace mpmfg;

namespace {

PmaConfig config(double eta, double l_h = std::numeric_limits< double >::infinity())
{
   PmaConfig c;
   c.eta = eta;
   c.l_h = l_h;
   return c;
}

// maximizer of the two-action objective over t = u(0) by grid scan and refinement
double grid_t(const std::vector< double >& q, const std::vector< double >& prev, double eta, const Regularizer& h)
{
   double best_t = 0.0, best = -1e300;
   auto scan = [&](double lo, double hi, double step) {
      for(double t = lo; t <= hi + 1e-15; t += step) {
         const double tc = std::clamp(t, 0.0, 1.0);
         const std::vector< double > u{tc, 1 - tc};
         const double f = pma_objective(q, prev, u, eta, h);
         if(f > best) {
            best = f;
            best_t = tc;
         }
      }
   };
   scan(0.0, 1.0, 1e-5);
   scan(best_t - 2e-5, best_t + 2e-5, 1e-8);
   return best_t;
}

// two-action entropy PMA row: root of the first-order condition in t
double entropy_row_root(double q0, double q1, double p, double eta, double lam)
{
   auto g = [&](double t) { return q0 - q1 + lam * (std::log(1 - t) - std::log(t)) - 2 * (t - p) / eta; };
   double lo = 1e-300, hi = 1 - 1e-16;
   for(int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0 ? lo : hi) = mid;
   }
   return 0.5 * (lo + hi);
}

}  // namespace

TEST(ComputeLh, PrintedFormula)
{
   EXPECT_EQ(compute_l_h({.r_s = 0.0, .r_a = 0.0}, 0.9), 0.0);
   EXPECT_EQ(compute_l_h({.p_s = 1.0, .p_a = 2.0, .r_s = 3.0, .r_a = 0.7}, 0.0), 0.7);
   EXPECT_NEAR(compute_l_h({.p_s = 1.0, .p_a = 1.0, .r_s = 1.0, .r_a = 1.0}, 0.5), 4.0 / 3.0, 1e-15);
   EXPECT_THROW(compute_l_h({.p_s = 2.5}, 0.8), std::invalid_argument);
   EXPECT_THROW(compute_l_h({.p_s = -1.0}, 0.8), std::invalid_argument);
}

TEST(PmaStep, LargeEtaWithZeroQGivesUmax)
{
   const QTable q(3, 3, 0.0);
   const Policy pi = Policy::from_rows({{1, 0, 0}, {0.2, 0.3, 0.5}, {0, 0, 1}});
   const auto out = pma_step(q, pi, config(1e9), Regularizer::entropy(1.0));
   for(StateIndex s = 0; s < 3; ++s)
      for(ActionIndex a = 0; a < 3; ++a) EXPECT_NEAR(out(s, a), 1.0 / 3.0, 1e-4);
}

TEST(PmaStep, TinyEtaStaysPut)
{
   const QTable q(2, 3, std::vector< double >{5, -1, 0, 2, 2, -3});
   const Policy pi = Policy::from_rows({{0.1, 0.6, 0.3}, {0.25, 0.25, 0.5}});
   const auto out = pma_step(q, pi, config(1e-9), Regularizer::entropy(0.5));
   EXPECT_LT(policy_distance(out, pi), 1e-4);
}

TEST(PmaStep, MatchesGridForUnitQ)
{
   const auto h = Regularizer::entropy(0.5);
   const auto out = pma_step(QTable(1, 2, std::vector< double >{1, 0}), Policy::uniform(1, 2), config(1.0), h);
   const double t = grid_t({1, 0}, {0.5, 0.5}, 1.0, h);
   EXPECT_LT(std::abs(out(0, 0) - t) + std::abs(out(0, 1) - (1 - t)), 1e-3);
   EXPECT_NEAR(out(0, 0), entropy_row_root(1, 0, 0.5, 1.0, 0.5), 1e-8);
}

TEST(PmaStep, ConstraintMembershipAndAscent)
{
   Rng rng(1);
   for(int c = 0; c < 200; ++c) {
      const std::size_t na = 2 + c % 3;
      std::vector< double > qv(na), p(na);
      double tot = 0.0;
      for(auto& v : qv) v = 10 * rng.uniform() - 5;
      for(auto& v : p) tot += (v = rng.uniform() * rng.uniform());
      for(auto& v : p) v /= tot;
      const double eta = std::exp(6 * rng.uniform() - 3);
      const double l_h = 0.3 * rng.uniform() * std::log(static_cast< double >(na));
      const auto h = c % 2 ? Regularizer::entropy(0.1 + rng.uniform()) : Regularizer::neg_sq_l2(0.1 + rng.uniform());
      const auto out = pma_step(QTable(1, na, qv), Policy(1, na, p), config(eta, l_h), h);
      const auto u = out.row(0);
      EXPECT_GE(h(u), h.h_max(na) - l_h - 1e-8);
      const auto unconstrained = pma_step(QTable(1, na, qv), Policy(1, na, p), config(eta), h);
      EXPECT_GE(pma_objective(qv, p, unconstrained.row(0), eta, h), pma_objective(qv, p, p, eta, h) - 1e-10);
      // the constrained optimum is no better than the unconstrained one
      EXPECT_LE(pma_objective(qv, p, u, eta, h), pma_objective(qv, p, unconstrained.row(0), eta, h) + 1e-10);
   }
}

TEST(PmaStep, MatchesGridOnRandomTwoActionRows)
{
   Rng rng(2);
   for(int c = 0; c < 100; ++c) {
      const std::vector< double > q{6 * rng.uniform() - 3, 6 * rng.uniform() - 3};
      const double p = rng.uniform(), eta = 0.05 + 2 * rng.uniform();
      const auto h = c % 3 == 0 ? Regularizer::neg_sq_l2(0.5) : Regularizer::entropy(0.2 + rng.uniform());
      const auto out = pma_step(QTable(1, 2, q), Policy(1, 2, {p, 1 - p}), config(eta), h);
      EXPECT_LT(2 * std::abs(out(0, 0) - grid_t(q, {p, 1 - p}, eta, h)), 1e-3);
   }
}

TEST(PmaStep, KeepsPoliciesAwayFromTheBoundary)
{
   const auto b = epidemic::build();
   const double zeta = 1e-3;
   double zeta_out = 1.0;
   Rng rng(3);
   for(int c = 0; c < 100; ++c) {
      const double p = zeta + (1 - 2 * zeta) * rng.uniform(), r = zeta + (1 - 2 * zeta) * rng.uniform();
      const Policy pi = Policy::from_rows({{p, 1 - p}, {r, 1 - r}});
      const QTable q(2, 2, std::vector< double >{-60 * rng.uniform(), -60 * rng.uniform(), -60 * rng.uniform(), -60 * rng.uniform()});
      zeta_out = std::min(zeta_out, pma_step(q, pi, config(0.1), b.model.regularizer()).min_prob());
   }
   RecordProperty("zeta_out", std::to_string(zeta_out));
   EXPECT_GT(zeta_out, 0.0);
}

TEST(GammaEta, MatchesIndependentComposition)
{
   const auto b = epidemic::build();
   const double eta = 0.1, lam = 1.0;
   const auto pi = uniform_profile(3, 2, 2);
   const auto out = gamma_eta(b.model, b.sbm, pi, config(eta));
   // stable ensemble by plain iteration
   MeanFieldEnsemble mu = uniform_ensemble(3, 2);
   for(int i = 0; i < 3000; ++i) mu = gamma_pop(b.model, b.sbm, mu, pi);
   for(PopIndex k = 0; k < 3; ++k) {
      const double zs = aggregated_impact(b.sbm, mu, k)[epidemic::kSick];
      // q under the uniform policy by value iteration on the two-state chain
      double q[2][2] = {{0, 0}, {0, 0}};
      for(int it = 0; it < 3000; ++it) {
         const double v[2] = {0.5 * (q[0][0] + q[0][1]) + lam * std::log(2.0), 0.5 * (q[1][0] + q[1][1]) + lam * std::log(2.0)};
         double next[2][2];
         for(int s = 0; s < 2; ++s)
            for(int a = 0; a < 2; ++a) {
               const double ps = s == epidemic::kSick ? 0.7 : epidemic::infection_probability(a, zs);
               next[s][a] = epidemic::reward(k, s, a) + 0.95 * ((1 - ps) * v[0] + ps * v[1]);
            }
         std::copy(&next[0][0], &next[0][0] + 4, &q[0][0]);
      }
      for(StateIndex s = 0; s < 2; ++s) EXPECT_NEAR(out[k](s, 0), entropy_row_root(q[s][0], q[s][1], 0.5, eta, lam), 1e-9);
   }
}

TEST(GammaEta, TinyEtaLeavesProfile)
{
   const auto b = epidemic::build();
   const PolicyProfile pi{Policy::from_rows({{0.2, 0.8}, {0.6, 0.4}}), Policy::uniform(2, 2), Policy::from_rows({{0.9, 0.1}, {0.5, 0.5}})};
   EXPECT_LT(policy_distance(gamma_eta(b.model, b.sbm, pi, config(1e-9)), pi), 1e-4);
}

class ExactSolve : public ::testing::Test {
  protected:
   static void SetUpTestSuite()
   {
      const auto b = epidemic::build();
      solution_ = new ExactSolution(solve_exact(b.model, b.sbm, u_max_profile(b.model, 3), config(0.1), 1e-10, 5000));
   }
   static void TearDownTestSuite() { delete solution_; }
   static ExactSolution* solution_;
};

ExactSolution* ExactSolve::solution_ = nullptr;

TEST_F(ExactSolve, NashProfileIsAFixedPoint)
{
   ASSERT_TRUE(solution_->converged);
   const auto b = epidemic::build();
   EXPECT_LT(policy_distance(gamma_eta(b.model, b.sbm, solution_->profile, config(0.1)), solution_->profile), 1e-9);
   const auto again = solve_exact(b.model, b.sbm, solution_->profile, config(0.1), 1e-8, 10);
   EXPECT_EQ(again.iterations, 1u);
   EXPECT_TRUE(again.converged);
}

TEST_F(ExactSolve, MoreVulnerablePopulationsMaskMore)
{
   const auto& p = solution_->profile;
   EXPECT_LT(p[0](epidemic::kHealthy, epidemic::kMask), p[1](epidemic::kHealthy, epidemic::kMask));
   EXPECT_LT(p[1](epidemic::kHealthy, epidemic::kMask), p[2](epidemic::kHealthy, epidemic::kMask));
   // from S the next state ignores the action, so the mask rows differ only by rounding
   EXPECT_NEAR(p[0](epidemic::kSick, epidemic::kMask), p[1](epidemic::kSick, epidemic::kMask), 1e-12);
   EXPECT_NEAR(p[1](epidemic::kSick, epidemic::kMask), p[2](epidemic::kSick, epidemic::kMask), 1e-12);
}

TEST_F(ExactSolve, ContractsTowardTheLimit)
{
   const auto& hist = solution_->history;
   const auto& star = solution_->profile;
   std::vector< double > ratios;
   for(std::size_t t = 5; t + 1 < hist.size(); ++t) {
      const double d0 = policy_distance(hist[t], star), d1 = policy_distance(hist[t + 1], star);
      if(d0 < 1e-8) break;
      ratios.push_back(d1 / d0);
      EXPECT_LE(d1 / d0, 1.0 + 1e-9) << "t=" << t;
   }
   ASSERT_GE(ratios.size(), 5u);
   std::nth_element(ratios.begin(), ratios.begin() + static_cast< std::ptrdiff_t >(ratios.size() / 2), ratios.end());
   EXPECT_LT(ratios[ratios.size() / 2], 0.9);
}

TEST(SolveExact, IdentityGameWithZeroRewardGoesUniform)
{
   const GameModel m(
      FiniteSpace(3), FiniteSpace(3),
      [](StateIndex s, ActionIndex, std::span< const double >, std::span< double > out) {
         std::fill(out.begin(), out.end(), 0.0);
         out[s] = 1.0;
      },
      [](PopIndex, StateIndex, ActionIndex, std::span< const double >) { return 0.0; }, 0.9, {0.0, 0.0}, Regularizer::entropy(1.0));
   const SbmModel sbm(std::vector< std::vector< double > >{{0.5, 0.5}, {0.5, 0.5}});
   const PolicyProfile pi0{Policy::from_rows({{0.8, 0.1, 0.1}, {0, 1, 0}, {0.3, 0.3, 0.4}}), Policy::from_rows({{0, 0, 1}, {0.5, 0.5, 0}, {1, 0, 0}})};
   const auto sol = solve_exact(m, sbm, pi0, config(100.0), 1e-10, 1000);
   ASSERT_TRUE(sol.converged);
   EXPECT_LT(policy_distance(sol.profile, uniform_profile(2, 3, 3)), 1e-8);
}

TEST(SolveExact, FlagsExhaustedBudget)
{
   const auto b = epidemic::build();
   const auto sol = solve_exact(b.model, b.sbm, u_max_profile(b.model, 3), config(0.1), 1e-12, 3);
   EXPECT_FALSE(sol.converged);
   EXPECT_EQ(sol.iterations, 3u);
   EXPECT_EQ(sol.delta_pi.size(), 3u);
   EXPECT_EQ(sol.history.size(), 4u);
   EXPECT_THROW(solve_exact(b.model, b.sbm, u_max_profile(b.model, 3), config(0.1), 0.0, 3), std::invalid_argument);
}

TEST(BestResponse, LiesInsideTheConstrainedSet)
{
   // the unrestricted best response must satisfy h(u) >= h_max - L_h
   for(const double lam : {0.5, 1.0}) {
      const auto b = epidemic::build(lam);
      const double floor = b.model.regularizer().h_max(2) - default_l_h(b.model);
      Rng rng(31);
      for(int c = 0; c < 20; ++c) {
         MeanFieldEnsemble mu;
         for(int k = 0; k < 3; ++k) {
            const double p = rng.uniform();
            mu.emplace_back(std::vector< double >{p, 1 - p});
         }
         for(PopIndex k = 0; k < 3; ++k) {
            const auto br = best_response(frozen_mdp(b.model, b.sbm, mu, k), b.model.regularizer(), 1e-12);
            for(StateIndex s = 0; s < 2; ++s) EXPECT_GE(b.model.regularizer()(br.policy.row(s)), floor - 1e-12);
         }
      }
   }
}
