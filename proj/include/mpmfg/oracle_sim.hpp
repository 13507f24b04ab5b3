#ifndef MPMFG_ORACLE_SIM_HPP
#define MPMFG_ORACLE_SIM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/evaluation.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/random.hpp"

namespace mpmfg {

/// Generative model: given (k, s, a, z) returns s' ~ P(.|s,a,z) and r = R^k(s,a,z).
class SimulatorOracle {
  public:
   explicit SimulatorOracle(GameModel model) : model_(std::move(model)) {}

   struct Sample {
      StateIndex next;
      double reward;
   };

   Sample sample(PopIndex k, StateIndex s, ActionIndex a, std::span< const double > z, Rng& rng) const
   {
      thread_local std::vector< double > row;
      row.resize(model_.n_states());
      model_.transition_into(s, a, z, row);
      return {sample_index(row, rng.uniform()), model_.reward(k, s, a, z)};
   }

   [[nodiscard]] const GameModel& model() const noexcept { return model_; }

  private:
   GameModel model_;
};

/// Tabulated transition estimate at a fixed impact: P-hat(s'|s,a) = count / N(s,a).
class EmpiricalKernel {
  public:
   EmpiricalKernel(std::size_t n_states, std::size_t n_actions)
       : n_states_(n_states),
         n_actions_(n_actions),
         counts_(n_states * n_actions * n_states, 0),
         visits_(n_states * n_actions, 0)
   {
   }

   void record(StateIndex s, ActionIndex a, StateIndex next)
   {
      ++counts_[(s * n_actions_ + a) * n_states_ + next];
      ++visits_[s * n_actions_ + a];
   }

   [[nodiscard]] std::size_t n_states() const noexcept { return n_states_; }
   [[nodiscard]] std::size_t n_actions() const noexcept { return n_actions_; }
   [[nodiscard]] std::size_t visits(StateIndex s, ActionIndex a) const { return visits_[s * n_actions_ + a]; }
   [[nodiscard]] bool visited(StateIndex s, ActionIndex a) const { return visits(s, a) > 0; }
   [[nodiscard]] std::size_t total_samples() const
   {
      std::size_t n = 0;
      for(auto v : visits_) n += v;
      return n;
   }

   [[nodiscard]] double probability(StateIndex s, ActionIndex a, StateIndex next) const
   {
      const auto n = visits(s, a);
      if(n == 0) throw std::logic_error("EmpiricalKernel: unvisited state-action pair");
      return static_cast< double >(counts_[(s * n_actions_ + a) * n_states_ + next]) / static_cast< double >(n);
   }
   [[nodiscard]] Distribution row(StateIndex s, ActionIndex a) const
   {
      std::vector< double > r(n_states_);
      for(StateIndex t = 0; t < n_states_; ++t) r[t] = probability(s, a, t);
      return Distribution(std::move(r));
   }

  private:
   std::size_t n_states_;
   std::size_t n_actions_;
   std::vector< std::size_t > counts_;
   std::vector< std::size_t > visits_;
};

/// Draws exactly n_per_pair samples for every (s,a) at impact z. Each (k,s,a)
/// has its own stream below `seed`.
inline EmpiricalKernel estimate_kernel(
   const SimulatorOracle& oracle, PopIndex k, const ImpactVector& z, std::size_t n_per_pair, std::uint64_t seed)
{
   if(n_per_pair < 1) throw std::invalid_argument("estimate_kernel: n_per_pair must be >= 1");
   const auto& m = oracle.model();
   if(z.size() != m.n_states()) throw std::invalid_argument("estimate_kernel: impact vector has wrong size");
   EmpiricalKernel kernel(m.n_states(), m.n_actions());
   for(StateIndex s = 0; s < m.n_states(); ++s)
      for(ActionIndex a = 0; a < m.n_actions(); ++a) {
         Rng rng = Rng::stream(seed, {k, s, a});
         for(std::size_t i = 0; i < n_per_pair; ++i) kernel.record(s, a, oracle.sample(k, s, a, z.weights(), rng).next);
      }
   return kernel;
}

/// Population update with the kernel replaced by its estimate at z^k.
inline MeanFieldEnsemble approx_gamma_pop(
   const SimulatorOracle& oracle,
   const SbmModel& sbm,
   const MeanFieldEnsemble& mu,
   const PolicyProfile& profile,
   std::size_t n_per_pair,
   std::uint64_t seed)
{
   const auto& m = oracle.model();
   detail::check_shapes(m, sbm, mu, profile);
   MeanFieldEnsemble out;
   out.reserve(sbm.k());
   for(PopIndex k = 0; k < sbm.k(); ++k) {
      const EmpiricalKernel kernel = estimate_kernel(oracle, k, aggregated_impact(sbm, mu, k), n_per_pair, seed);
      std::vector< double > next(m.n_states(), 0.0);
      for(StateIndex s = 0; s < m.n_states(); ++s)
         for(ActionIndex a = 0; a < m.n_actions(); ++a) {
            const double w = mu[k][s] * profile[k](s, a);
            if(w == 0.0) continue;
            if(! kernel.visited(s, a)) throw std::runtime_error("approx_gamma_pop: unvisited pair with positive mass");
            for(StateIndex t = 0; t < m.n_states(); ++t) next[t] += w * kernel.probability(s, a, t);
         }
      out.emplace_back(std::move(next));
   }
   return out;
}

/// Iterates approx_gamma_pop until two successive ensembles differ by <= eps_pop.
/// All iterations share `seed`, i.e. common random numbers across the loop.
inline PopulationFixedPoint approx_stable_population(
   const SimulatorOracle& oracle,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   double eps_pop,
   std::size_t n_per_pair,
   const MeanFieldEnsemble& mu0,
   std::size_t max_iter,
   std::uint64_t seed)
{
   if(! (eps_pop > 0.0)) throw std::invalid_argument("approx_stable_population: eps_pop must be > 0");
   if(max_iter < 1) throw std::invalid_argument("approx_stable_population: max_iter must be >= 1");
   PopulationFixedPoint fp;
   fp.ensemble = mu0;
   for(std::size_t it = 1; it <= max_iter; ++it) {
      MeanFieldEnsemble next = approx_gamma_pop(oracle, sbm, fp.ensemble, profile, n_per_pair, seed);
      fp.residual = ensemble_distance(next, fp.ensemble);
      fp.iterations = it;
      if(std::isnan(fp.residual)) throw std::runtime_error("approx_stable_population: NaN in iterate");
      fp.ensemble = std::move(next);
      if(fp.residual <= eps_pop) {
         fp.converged = true;
         break;
      }
   }
   return fp;
}

/// Frozen MDP for population k built from the estimated kernel at z^k and the
/// oracle's (deterministic) rewards.
inline TabularMdp estimated_mdp(
   const SimulatorOracle& oracle, const SbmModel& sbm, const MeanFieldEnsemble& mu, PopIndex k, std::size_t n_per_pair, std::uint64_t seed)
{
   const auto& m = oracle.model();
   const ImpactVector z = aggregated_impact(sbm, mu, k);
   const EmpiricalKernel kernel = estimate_kernel(oracle, k, z, n_per_pair, seed);
   TabularMdp mdp;
   mdp.n_states = m.n_states();
   mdp.n_actions = m.n_actions();
   mdp.discount = m.discount();
   mdp.transition.resize(mdp.n_states * mdp.n_actions * mdp.n_states);
   mdp.reward.resize(mdp.n_states * mdp.n_actions);
   for(StateIndex s = 0; s < mdp.n_states; ++s)
      for(ActionIndex a = 0; a < mdp.n_actions; ++a) {
         for(StateIndex t = 0; t < mdp.n_states; ++t)
            mdp.transition[(s * mdp.n_actions + a) * mdp.n_states + t] = kernel.probability(s, a, t);
         mdp.reward[s * mdp.n_actions + a] = m.reward(k, s, a, z);
      }
   return mdp;
}

struct SimulatorSettings {
   double eps_pi = 0.002;
   double eps_pop = 1e-3;
   std::size_t n_per_pair = 100;
   double q_tol = 1e-8;
   std::size_t max_outer = 500;
   std::size_t max_pop_iter = 10000;
   std::uint64_t seed = 0;

   void validate() const
   {
      if(! (eps_pi > 0.0) || ! (eps_pop > 0.0) || ! (q_tol > 0.0))
         throw std::invalid_argument("SimulatorSettings: tolerances must be > 0");
      if(n_per_pair < 1) throw std::invalid_argument("SimulatorSettings: n_per_pair must be >= 1");
      if(max_pop_iter < 1) throw std::invalid_argument("SimulatorSettings: max_pop_iter must be >= 1");
   }
};

struct SimulatorSolution {
   PolicyProfile profile;
   MeanFieldEnsemble ensemble;  ///< last approximate stable ensemble
   std::vector< double > delta_pi;
   std::vector< PolicyProfile > history;
   std::size_t iterations = 0;
   bool converged = false;
   bool population_converged = true;
};

/// Simulator-based PMA: approximate stable population, model-based policy
/// evaluation on the estimated kernel, one PMA step; repeat until
/// ||pi_{t+1} - pi_t||_1 <= eps_pi.
inline SimulatorSolution simulator_pma(
   const SimulatorOracle& oracle,
   const SbmModel& sbm,
   const PolicyProfile& pi0,
   const PmaConfig& cfg,
   const SimulatorSettings& settings,
   std::optional< MeanFieldEnsemble > mu0 = std::nullopt)
{
   cfg.validate();
   settings.validate();
   const auto& m = oracle.model();
   SimulatorSolution sol;
   sol.profile = pi0;
   sol.history.push_back(pi0);
   sol.ensemble = mu0 ? *mu0 : uniform_ensemble(sbm.k(), m.n_states());
   for(std::size_t t = 0; t < settings.max_outer; ++t) {
      const std::uint64_t iter_seed = derive_seed(settings.seed, {t});
      const PopulationFixedPoint fp = approx_stable_population(
         oracle, sbm, sol.profile, settings.eps_pop, settings.n_per_pair, sol.ensemble, settings.max_pop_iter, iter_seed);
      sol.population_converged = sol.population_converged && fp.converged;
      sol.ensemble = fp.ensemble;

      PolicyProfile next;
      next.reserve(sbm.k());
      for(PopIndex k = 0; k < sbm.k(); ++k) {
         const TabularMdp mdp = estimated_mdp(oracle, sbm, sol.ensemble, k, settings.n_per_pair, iter_seed);
         const QTable q = evaluate_q(mdp, sol.profile[k], m.regularizer());
         const double res = bellman_residual(mdp, sol.profile[k], m.regularizer(), add_state_bonus(q, sol.profile[k], m.regularizer()));
         if(! (res <= settings.q_tol)) throw std::runtime_error("simulator_pma: policy evaluation missed q_tol");
         next.push_back(pma_step(q, sol.profile[k], cfg, m.regularizer()));
      }
      const double delta = policy_distance(next, sol.profile);
      sol.delta_pi.push_back(delta);
      sol.profile = std::move(next);
      sol.history.push_back(sol.profile);
      sol.iterations = t + 1;
      if(delta <= settings.eps_pi) {
         sol.converged = true;
         break;
      }
   }
   return sol;
}

}  // namespace mpmfg

#endif  // MPMFG_ORACLE_SIM_HPP
