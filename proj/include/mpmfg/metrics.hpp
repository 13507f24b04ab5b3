#ifndef MPMFG_METRICS_HPP
#define MPMFG_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/evaluation.hpp"
#include "mpmfg/ggrs.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/parallel.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/random.hpp"

namespace mpmfg {

inline constexpr double kDefaultBrTol = 1e-10;

/// E_{s ~ mu^k}[V^k(s | pi, mu)] for a given ensemble.
inline double avg_reward_at(
   const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, const MeanFieldEnsemble& mu, PopIndex k)
{
   const auto v = exact_V(model, sbm, profile, mu, k);
   double acc = 0.0;
   for(StateIndex s = 0; s < v.size(); ++s) acc += mu[k][s] * v[s];
   return acc;
}

/// Average discounted regularized reward of population k at the stable ensemble of `profile`.
inline double avg_reward(
   const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, PopIndex k, const PopulationSolve& pop = {})
{
   const auto fp = gamma_pop_inf(model, sbm, profile, pop.tol, pop.max_iter);
   if(! fp.converged) throw std::runtime_error("avg_reward: stable population did not converge");
   return avg_reward_at(model, sbm, profile, fp.ensemble, k);
}

enum class ExploitabilityVariant {
   frozen,     ///< best response against the profile's stable ensemble held fixed
   rederived,  ///< the frozen best response re-evaluated at its own stable ensemble
};

inline std::string to_string(ExploitabilityVariant v) { return v == ExploitabilityVariant::frozen ? "frozen" : "rederived"; }

inline ExploitabilityVariant exploitability_variant_from_string(const std::string& s)
{
   if(s == "frozen") return ExploitabilityVariant::frozen;
   if(s == "rederived") return ExploitabilityVariant::rederived;
   throw std::invalid_argument("unknown exploitability variant: " + s);
}

/// Exploitability of population k against an already computed stable ensemble.
inline double exploitability_at(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   const MeanFieldEnsemble& mu,
   PopIndex k,
   double tol = kDefaultBrTol,
   ExploitabilityVariant variant = ExploitabilityVariant::frozen,
   const PopulationSolve& pop = {})
{
   if(! (tol > 0.0)) throw std::invalid_argument("exploitability: tol must be > 0");
   const double current = avg_reward_at(model, sbm, profile, mu, k);
   const BestResponse br = best_response_value(model, sbm, mu, k, tol);
   if(variant == ExploitabilityVariant::frozen) {
      double best = 0.0;
      for(StateIndex s = 0; s < br.value.size(); ++s) best += mu[k][s] * br.value[s];
      return best - current;
   }
   PolicyProfile deviated = profile;
   deviated[k] = br.policy;
   const auto fp = gamma_pop_inf(model, sbm, deviated, pop.tol, pop.max_iter, mu);
   if(! fp.converged) throw std::runtime_error("exploitability: deviated population did not converge");
   return avg_reward_at(model, sbm, deviated, fp.ensemble, k) - current;
}

inline double exploitability(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   PopIndex k,
   double tol = kDefaultBrTol,
   ExploitabilityVariant variant = ExploitabilityVariant::frozen,
   const PopulationSolve& pop = {})
{
   const auto fp = gamma_pop_inf(model, sbm, profile, pop.tol, pop.max_iter);
   if(! fp.converged) throw std::runtime_error("exploitability: stable population did not converge");
   return exploitability_at(model, sbm, profile, fp.ensemble, k, tol, variant, pop);
}

struct MetricReport {
   std::vector< double > avg_reward;
   std::vector< double > exploitability;
   double exploitability_max = 0.0;
   std::optional< double > policy_distance;
   MeanFieldEnsemble ensemble;
   bool population_converged = true;
};

/// All per-iterate metrics at once, sharing one stable-population solve.
inline MetricReport evaluate_profile(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   const std::optional< PolicyProfile >& reference = std::nullopt,
   double tol = kDefaultBrTol,
   ExploitabilityVariant variant = ExploitabilityVariant::frozen,
   const PopulationSolve& pop = {})
{
   MetricReport rep;
   const auto fp = gamma_pop_inf(model, sbm, profile, pop.tol, pop.max_iter);
   rep.population_converged = fp.converged;
   rep.ensemble = fp.ensemble;
   for(PopIndex k = 0; k < sbm.k(); ++k) {
      rep.avg_reward.push_back(avg_reward_at(model, sbm, profile, fp.ensemble, k));
      rep.exploitability.push_back(exploitability_at(model, sbm, profile, fp.ensemble, k, tol, variant, pop));
   }
   rep.exploitability_max = *std::max_element(rep.exploitability.begin(), rep.exploitability.end());
   if(reference) rep.policy_distance = policy_distance(profile, *reference);
   return rep;
}

/// max over sampled pairs of d_out(f(x), f(y)) / d_in(x, y), skipping pairs
/// with d_in < 1e-8.
template < class X, class Y >
double estimate_lipschitz(
   const std::function< Y(const X&) >& op,
   const std::function< X(Rng&) >& sampler,
   const std::function< double(const X&, const X&) >& d_in,
   const std::function< double(const Y&, const Y&) >& d_out,
   std::size_t n_pairs,
   Rng& rng)
{
   if(n_pairs < 2) throw std::invalid_argument("estimate_lipschitz: n_pairs must be >= 2");
   double best = 0.0;
   std::size_t used = 0;
   for(std::size_t i = 0; i < n_pairs; ++i) {
      const X x = sampler(rng);
      const X y = sampler(rng);
      const double din = d_in(x, y);
      if(din < 1e-8) continue;
      ++used;
      best = std::max(best, d_out(op(x), op(y)) / din);
   }
   if(used == 0) throw std::runtime_error("estimate_lipschitz: every sampled pair was degenerate");
   return best;
}

/// Random ensemble: each distribution uniform on the simplex (normalized exponentials).
inline MeanFieldEnsemble random_ensemble(std::size_t k, std::size_t n_states, Rng& rng)
{
   MeanFieldEnsemble mu;
   mu.reserve(k);
   for(std::size_t i = 0; i < k; ++i) {
      std::vector< double > w(n_states);
      double tot = 0.0;
      for(double& x : w) tot += (x = -std::log1p(-rng.uniform()));
      for(double& x : w) x /= tot;
      mu.emplace_back(std::move(w));
   }
   return mu;
}

/// Grid of impact vectors {z >= 0, sum z <= z_max} with spacing z_max / resolution.
inline std::vector< std::vector< double > > impact_grid(std::size_t n_states, double z_max, std::size_t resolution)
{
   if(resolution < 1) throw std::invalid_argument("impact_grid: resolution must be >= 1");
   std::vector< std::vector< double > > out;
   std::vector< std::size_t > idx(n_states, 0);
   const double h = z_max / static_cast< double >(resolution);
   while(true) {
      std::size_t tot = 0;
      for(auto i : idx) tot += i;
      if(tot <= resolution) {
         std::vector< double > z(n_states);
         for(std::size_t s = 0; s < n_states; ++s) z[s] = h * static_cast< double >(idx[s]);
         out.push_back(std::move(z));
      }
      std::size_t d = 0;
      while(d < n_states && ++idx[d] > resolution) idx[d++] = 0;
      if(d == n_states) break;
   }
   return out;
}

/// Largest total impact any population can feel: max_k (1/K) sum_i W(k,i).
inline double max_impact_mass(const SbmModel& sbm)
{
   double m = 0.0;
   for(PopIndex k = 0; k < sbm.k(); ++k) {
      double row = 0.0;
      for(PopIndex i = 0; i < sbm.k(); ++i) row += sbm.w(k, i);
      m = std::max(m, row / static_cast< double >(sbm.k()));
   }
   return m;
}

/// Kernel and reward constants by finite differences over a deterministic grid
/// of reachable impacts. p_s, p_a, r_s, r_a use the discrete metric; p_mu and
/// r_mu are the largest one-coordinate difference quotients with step `step`
/// (the L1 -> L1 operator norm of the Jacobian is its largest column sum).
inline LipschitzConstants estimate_model_constants(
   const GameModel& model, const SbmModel& sbm, std::size_t resolution = 10, double step = 1e-4)
{
   if(! (step > 0.0)) throw std::invalid_argument("estimate_model_constants: step must be > 0");
   const std::size_t ns = model.n_states(), na = model.n_actions();
   const double z_max = max_impact_mass(sbm);
   LipschitzConstants c;
   std::vector< double > p1(ns), p2(ns), zp(ns);
   auto l1 = [](const std::vector< double >& a, const std::vector< double >& b) {
      double d = 0.0;
      for(std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
      return d;
   };
   for(const auto& z : impact_grid(ns, z_max, resolution)) {
      double mass = 0.0;
      for(double x : z) mass += x;
      for(PopIndex k = 0; k < sbm.k(); ++k)
         for(StateIndex s = 0; s < ns; ++s)
            for(ActionIndex a = 0; a < na; ++a) {
               model.transition_into(s, a, z, p1);
               const double r1 = model.reward(k, s, a, z);
               for(StateIndex s2 = 0; s2 < ns; ++s2) {
                  if(s2 == s) continue;
                  model.transition_into(s2, a, z, p2);
                  c.p_s = std::max(c.p_s, l1(p1, p2));
                  c.r_s = std::max(c.r_s, std::abs(r1 - model.reward(k, s2, a, z)));
               }
               for(ActionIndex a2 = 0; a2 < na; ++a2) {
                  if(a2 == a) continue;
                  model.transition_into(s, a2, z, p2);
                  c.p_a = std::max(c.p_a, l1(p1, p2));
                  c.r_a = std::max(c.r_a, std::abs(r1 - model.reward(k, s, a2, z)));
               }
               for(StateIndex i = 0; i < ns; ++i) {
                  zp = z;
                  // forward step when it stays in the set, backward otherwise
                  const double h = (mass + step <= z_max + 1e-12 && z[i] + step <= 1.0) ? step : -std::min(step, z[i]);
                  if(h == 0.0) continue;
                  zp[i] += h;
                  model.transition_into(s, a, zp, p2);
                  c.p_mu = std::max(c.p_mu, l1(p1, p2) / std::abs(h));
                  c.r_mu = std::max(c.r_mu, std::abs(r1 - model.reward(k, s, a, zp)) / std::abs(h));
               }
            }
   }
   return c;
}

struct DeviationRow {
   std::size_t min_n = 0;
   double mean = 0.0;      ///< mean over seeds of max_t ||mu-tilde_t - mu-hat_t||_1
   double std_error = 0.0;
   std::vector< double > per_seed;
};

/// For every size setting, runs GGR-S (sampled graph every step) and the fully
/// connected finite game (z-hat from the known W) from the same initial states
/// with the same per-agent action/transition streams, and records the largest
/// ensemble gap over t = 1..T. Seeds run in parallel.
inline std::vector< DeviationRow > deviation_curve(
   const GameModel& model,
   const SbmModel& sbm,
   const std::vector< std::vector< std::size_t > >& size_settings,
   const PolicyProfile& profile,
   std::size_t horizon,
   std::size_t n_seeds,
   std::uint64_t seed,
   const Execution& exec = {},
   ImpactMode ggrs_mode = ImpactMode::graph,
   std::optional< MeanFieldEnsemble > mu0 = std::nullopt)
{
   if(size_settings.size() < 2) throw std::invalid_argument("deviation_curve: need at least two size settings");
   if(n_seeds < 1) throw std::invalid_argument("deviation_curve: n_seeds must be >= 1");
   const MeanFieldEnsemble start = mu0 ? *mu0 : uniform_ensemble(sbm.k(), model.n_states());
   std::vector< DeviationRow > rows;
   for(std::size_t si = 0; si < size_settings.size(); ++si) {
      const SbmModel sized = sbm.with_sizes(size_settings[si]);
      DeviationRow row;
      row.min_n = sized.min_size();
      row.per_seed.assign(n_seeds, 0.0);
      parallel_for(n_seeds, exec, [&](std::size_t r) {
         const std::uint64_t run_seed = derive_seed(seed, {si, r});
         const AgentStates init = initial_agent_states(sized, start, run_seed);
         GgrsSimulator graph(model, sized, init, run_seed, ggrs_mode);
         GgrsSimulator full(model, sized, init, run_seed, ImpactMode::mean_field);
         double worst = 0.0;
         for(std::size_t t = 0; t < horizon; ++t) {
            graph.step(profile);
            full.step(profile);
            worst = std::max(worst, ensemble_distance(graph.ensemble(), full.ensemble()));
         }
         row.per_seed[r] = worst;
      });
      double mean = 0.0;
      for(double v : row.per_seed) mean += v;
      mean /= static_cast< double >(n_seeds);
      double var = 0.0;
      for(double v : row.per_seed) var += (v - mean) * (v - mean);
      row.mean = mean;
      row.std_error = n_seeds > 1 ? std::sqrt(var / static_cast< double >(n_seeds - 1) / static_cast< double >(n_seeds)) : 0.0;
      rows.push_back(std::move(row));
   }
   return rows;
}

}  // namespace mpmfg

#endif  // MPMFG_METRICS_HPP
