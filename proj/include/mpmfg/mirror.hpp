#ifndef MPMFG_MIRROR_HPP
#define MPMFG_MIRROR_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/evaluation.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/regularizer.hpp"

namespace mpmfg {

struct InnerSolverConfig {
   std::size_t max_iter = 5000;
   double step = 0.0;  ///< initial step; 0 selects eta / (1 + eta)
   double tol = 1e-10;  ///< stop when the iterate moves less than this (L2)
};

struct PmaConfig {
   double eta = 1.0;
   /// Slack of the admissible set {u : h(u) >= h_max - L_h}. +inf disables it.
   double l_h = std::numeric_limits< double >::infinity();
   InnerSolverConfig inner{};

   void validate() const
   {
      if(! (eta > 0.0) || ! std::isfinite(eta)) throw std::invalid_argument("PmaConfig: eta must be finite and > 0");
      if(! (l_h >= 0.0)) throw std::invalid_argument("PmaConfig: L_h must be >= 0");
      if(inner.max_iter < 1) throw std::invalid_argument("PmaConfig: inner.max_iter must be >= 1");
      if(! (inner.tol > 0.0)) throw std::invalid_argument("PmaConfig: inner.tol must be > 0");
      if(inner.step < 0.0) throw std::invalid_argument("PmaConfig: inner.step must be >= 0");
   }
};

/// L_h = r_a + gamma r_s p_a / (2 - gamma p_s).
inline double compute_l_h(const LipschitzConstants& c, double gamma)
{
   if(! c.valid()) throw std::invalid_argument("compute_l_h: constants must be >= 0");
   const double denom = 2.0 - gamma * c.p_s;
   if(! (denom > 0.0)) throw std::invalid_argument("compute_l_h: requires gamma * p_s < 2");
   return c.r_a + gamma * c.r_s * c.p_a / denom;
}

/// L_h from the model's declared constants, +inf if none are declared.
inline double default_l_h(const GameModel& model)
{
   if(! model.lipschitz()) return std::numeric_limits< double >::infinity();
   return compute_l_h(*model.lipschitz(), model.discount());
}

/// <u, q> + h(u) - ||u - prev||^2 / (2 eta)
inline double pma_objective(
   std::span< const double > q, std::span< const double > prev, std::span< const double > u, double eta, const Regularizer& h)
{
   double lin = 0.0, prox = 0.0;
   for(std::size_t a = 0; a < u.size(); ++a) {
      lin += u[a] * q[a];
      prox += (u[a] - prev[a]) * (u[a] - prev[a]);
   }
   return lin + h(u) - prox / (2.0 * eta);
}

struct PmaRowResult {
   std::vector< double > u;
   std::size_t iterations = 0;
   bool converged = false;
};

namespace detail {

/// Projected gradient ascent with backtracking on the unconstrained PMA objective.
inline PmaRowResult projected_gradient_row(
   std::span< const double > q, std::span< const double > prev, double eta, const Regularizer& h, const InnerSolverConfig& inner)
{
   const std::size_t n = q.size();
   PmaRowResult res;
   res.u.assign(prev.begin(), prev.end());
   std::vector< double > grad(n), trial(n), y(n);
   const double step0 = inner.step > 0.0 ? inner.step : eta / (1.0 + eta);
   double step = step0;
   double f = pma_objective(q, prev, res.u, eta, h);
   for(std::size_t it = 1; it <= inner.max_iter; ++it) {
      res.iterations = it;
      h.gradient(res.u, grad);
      for(std::size_t a = 0; a < n; ++a) grad[a] += q[a] - (res.u[a] - prev[a]) / eta;
      double moved = 0.0;
      double f_trial = f;
      for(int bt = 0; bt < 200; ++bt) {
         for(std::size_t a = 0; a < n; ++a) y[a] = res.u[a] + step * grad[a];
         trial = project_to_simplex(y);
         double lin = 0.0, sq = 0.0;
         for(std::size_t a = 0; a < n; ++a) {
            const double d = trial[a] - res.u[a];
            lin += grad[a] * d;
            sq += d * d;
         }
         f_trial = pma_objective(q, prev, trial, eta, h);
         moved = std::sqrt(sq);
         // Armijo test along the projected step; a curvature model would fail at the
         // simplex boundary where the entropy gradient is unbounded
         if(f_trial >= f + 1e-4 * lin - 1e-13 * (1.0 + std::abs(f))) break;
         step *= 0.5;
      }
      // rounding-level slack: near the optimum objective differences vanish
      // below double precision and a strict test would stall the iterate
      if(f_trial >= f - 1e-13 * (1.0 + std::abs(f))) {
         res.u = trial;
         f = f_trial;
      }
      if(moved <= inner.tol) {
         res.converged = true;
         break;
      }
      step = std::min(step * 1.25, step0);
   }
   return res;
}

/// Root of lam log u + u / eta = c, by Newton in x = log u. The map is convex
/// and increasing in x, so Newton from a point right of the root is monotone.
inline double entropy_coordinate(double c, double lam, double eta)
{
   // f(c / lam) > 0 always; f(log(c eta)) >= 0 when c eta >= 1, else f(0) > 0
   double x = std::min(c / lam, c * eta >= 1.0 ? std::log(c * eta) : 0.0);
   for(int it = 0; it < 200; ++it) {
      const double e = std::exp(x) / eta;
      const double dx = (lam * x + e - c) / (lam + e);
      x -= dx;
      if(std::abs(dx) <= 1e-15 * (1.0 + std::abs(x))) break;
   }
   return std::exp(x);
}

/// Entropy rows solved through their optimality conditions: for the simplex
/// multiplier nu, u_a(nu) solves lam log u_a + u_a / eta = q_a - lam + prev_a / eta - nu,
/// and nu is set so the u_a sum to 1 (safeguarded Newton on a bracket).
inline PmaRowResult entropy_row(
   std::span< const double > q, std::span< const double > prev, double eta, double lam, const InnerSolverConfig& inner)
{
   const std::size_t n = q.size();
   PmaRowResult res;
   res.u.assign(n, 0.0);
   auto fill = [&](double nu) {
      double tot = 0.0, slope = 0.0;
      for(std::size_t a = 0; a < n; ++a) {
         const double u = entropy_coordinate(q[a] - lam + prev[a] / eta - nu, lam, eta);
         res.u[a] = u;
         tot += u;
         slope += u / (lam + u / eta);
      }
      return std::pair{tot - 1.0, slope};
   };
   // every coordinate is >= 1/n at lo and <= 1/n at hi
   double c_max = -std::numeric_limits< double >::infinity(), c_min = -c_max;
   for(std::size_t a = 0; a < n; ++a) {
      c_max = std::max(c_max, q[a] - lam + prev[a] / eta);
      c_min = std::min(c_min, q[a] - lam + prev[a] / eta);
   }
   const double inv_n = 1.0 / static_cast< double >(n);
   const double at_inv_n = lam * std::log(inv_n) + inv_n / eta;
   double lo = c_min - at_inv_n;
   double hi = c_max - at_inv_n;
   double nu = 0.5 * (lo + hi);
   for(std::size_t it = 1; it <= inner.max_iter; ++it) {
      res.iterations = it;
      const auto [g, slope] = fill(nu);
      if(g > 0.0) lo = nu;
      else hi = nu;
      if(std::abs(g) <= 1e-15 || hi - lo <= 1e-15 * (1.0 + std::abs(nu))) {
         res.converged = true;
         break;
      }
      // sum(nu) is decreasing with derivative -slope
      double next = nu + g / slope;
      if(! (next > lo && next < hi)) next = 0.5 * (lo + hi);
      nu = next;
   }
   double tot = 0.0;
   for(double u : res.u) tot += u;
   for(double& u : res.u) u /= tot;
   return res;
}

inline PmaRowResult pma_row_unconstrained(
   std::span< const double > q, std::span< const double > prev, double eta, const Regularizer& h, const InnerSolverConfig& inner)
{
   if(h.kind() == RegularizerKind::entropy && h.scale() > 0.0) return entropy_row(q, prev, eta, h.scale(), inner);
   return projected_gradient_row(q, prev, eta, h, inner);
}

}  // namespace detail

/// One row of the policy-improvement operator:
///   argmax_{u in U_{L_h}} <u, q> + h(u) - ||u - prev||^2 / (2 eta).
///
/// The admissible set is the superlevel set {h(u) >= h_max - L_h}. When the
/// unconstrained maximizer violates it, the constraint is dualized: for a
/// multiplier nu >= 0 the Lagrangian is the same objective with h scaled by
/// (1 + nu), and nu is found by bisection so the constraint is tight.
inline PmaRowResult pma_row(
   std::span< const double > q, std::span< const double > prev, const PmaConfig& cfg, const Regularizer& h)
{
   PmaRowResult res = detail::pma_row_unconstrained(q, prev, cfg.eta, h, cfg.inner);
   if(! std::isfinite(cfg.l_h) || h.is_zero()) return res;
   const double floor = h.h_max(q.size()) - cfg.l_h;
   if(h(res.u) >= floor) return res;

   auto solve = [&](double nu) { return detail::pma_row_unconstrained(q, prev, cfg.eta, h.scaled(1.0 + nu), cfg.inner); };
   double lo = 0.0, hi = 1.0;
   PmaRowResult hi_res = solve(hi);
   while(h(hi_res.u) < floor && hi < 1e12) {
      lo = hi;
      hi *= 2.0;
      hi_res = solve(hi);
   }
   for(int it = 0; it < 100 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      PmaRowResult mid_res = solve(mid);
      if(h(mid_res.u) >= floor) {
         hi = mid;
         hi_res = std::move(mid_res);
      } else {
         lo = mid;
      }
   }
   return hi_res;
}

struct PmaStepResult {
   Policy policy;
   bool converged = true;
   std::size_t max_iterations = 0;
};

/// Applies the policy-improvement operator to every state of `pi`.
inline PmaStepResult pma_step_detailed(const QTable& q, const Policy& pi, const PmaConfig& cfg, const Regularizer& h)
{
   cfg.validate();
   if(q.n_states() != pi.n_states() || q.n_actions() != pi.n_actions())
      throw std::invalid_argument("pma_step: q and pi shapes differ");
   for(double v : q.flat())
      if(! std::isfinite(v)) throw std::invalid_argument("pma_step: q must be finite");
   PmaStepResult out;
   std::vector< double > flat;
   flat.reserve(pi.flat().size());
   for(StateIndex s = 0; s < pi.n_states(); ++s) {
      const PmaRowResult r = pma_row(q.row(s), pi.row(s), cfg, h);
      out.converged = out.converged && r.converged;
      out.max_iterations = std::max(out.max_iterations, r.iterations);
      flat.insert(flat.end(), r.u.begin(), r.u.end());
   }
   out.policy = Policy(pi.n_states(), pi.n_actions(), std::move(flat));
   return out;
}

inline Policy pma_step(const QTable& q, const Policy& pi, const PmaConfig& cfg, const Regularizer& h)
{
   return pma_step_detailed(q, pi, cfg, h).policy;
}

/// Population fixed-point settings shared by the exact solver and metrics.
struct PopulationSolve {
   double tol = kDefaultPopTol;
   std::size_t max_iter = kDefaultPopMaxIter;
};

struct GammaEtaResult {
   PolicyProfile profile;
   PopulationFixedPoint population;  ///< stable ensemble of the input profile
};

/// Gamma_eta: stable population, exact q per population, one PMA step each.
inline GammaEtaResult gamma_eta_detailed(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   const PmaConfig& cfg,
   const PopulationSolve& pop = {},
   std::optional< MeanFieldEnsemble > mu0 = std::nullopt)
{
   GammaEtaResult out;
   out.population = gamma_pop_inf(model, sbm, profile, pop.tol, pop.max_iter, std::move(mu0));
   out.profile.reserve(sbm.k());
   for(PopIndex k = 0; k < sbm.k(); ++k) {
      const QTable q = exact_q(model, sbm, profile, out.population.ensemble, k);
      out.profile.push_back(pma_step(q, profile[k], cfg, model.regularizer()));
   }
   return out;
}

inline PolicyProfile gamma_eta(const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, const PmaConfig& cfg)
{
   return gamma_eta_detailed(model, sbm, profile, cfg).profile;
}

/// Profile whose every row is the maximizer of h.
inline PolicyProfile u_max_profile(const GameModel& model, std::size_t k)
{
   return PolicyProfile(k, Policy::constant(model.n_states(), model.regularizer().u_max(model.n_actions())));
}

struct ExactSolution {
   PolicyProfile profile;
   MeanFieldEnsemble ensemble;            ///< stable ensemble of `profile`
   std::vector< double > delta_pi;        ///< ||pi_{t+1} - pi_t||_1 per outer iteration
   std::vector< PolicyProfile > history;  ///< pi_0, pi_1, ..., final
   std::size_t iterations = 0;
   bool converged = false;
   bool population_converged = true;  ///< every inner fixed point converged
};

/// Iterates pi_{t+1} = Gamma_eta(pi_t) until ||pi_{t+1} - pi_t||_1 <= eps_pi.
inline ExactSolution solve_exact(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& pi0,
   const PmaConfig& cfg,
   double eps_pi,
   std::size_t max_outer,
   const PopulationSolve& pop = {})
{
   if(! (eps_pi > 0.0)) throw std::invalid_argument("solve_exact: eps_pi must be > 0");
   cfg.validate();
   ExactSolution sol;
   sol.profile = pi0;
   sol.history.push_back(pi0);
   std::optional< MeanFieldEnsemble > warm;
   for(std::size_t t = 0; t < max_outer; ++t) {
      GammaEtaResult step = gamma_eta_detailed(model, sbm, sol.profile, cfg, pop, warm);
      sol.population_converged = sol.population_converged && step.population.converged;
      warm = step.population.ensemble;
      const double delta = policy_distance(step.profile, sol.profile);
      sol.delta_pi.push_back(delta);
      sol.profile = std::move(step.profile);
      sol.history.push_back(sol.profile);
      sol.iterations = t + 1;
      if(delta <= eps_pi) {
         sol.converged = true;
         break;
      }
   }
   const PopulationFixedPoint fp = gamma_pop_inf(model, sbm, sol.profile, pop.tol, pop.max_iter, warm);
   sol.population_converged = sol.population_converged && fp.converged;
   sol.ensemble = fp.ensemble;
   return sol;
}

}  // namespace mpmfg

#endif  // MPMFG_MIRROR_HPP
