#ifndef MPMFG_POPULATION_HPP
#define MPMFG_POPULATION_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/model.hpp"

namespace mpmfg {

/// Stochastic block model: symmetric K x K connection probabilities plus
/// (optionally) the number of agents in each block.
class SbmModel {
  public:
   SbmModel(std::vector< std::vector< double > > w, std::vector< std::size_t > sizes = {})
       : w_(std::move(w)), sizes_(std::move(sizes))
   {
      const std::size_t k = w_.size();
      if(k == 0) throw std::invalid_argument("SbmModel: W must be non-empty");
      for(std::size_t i = 0; i < k; ++i) {
         if(w_[i].size() != k) throw std::invalid_argument("SbmModel: W must be square");
         for(std::size_t j = 0; j < k; ++j) {
            const double p = w_[i][j];
            if(! (p > 0.0 && p <= 1.0)) throw std::invalid_argument("SbmModel: W entries must lie in (0,1]");
         }
      }
      for(std::size_t i = 0; i < k; ++i)
         for(std::size_t j = 0; j < i; ++j)
            if(w_[i][j] != w_[j][i]) throw std::invalid_argument("SbmModel: W must be symmetric");
      if(! sizes_.empty()) {
         if(sizes_.size() != k) throw std::invalid_argument("SbmModel: one size per population required");
         for(auto n : sizes_)
            if(n == 0) throw std::invalid_argument("SbmModel: population sizes must be >= 1");
      }
   }

   [[nodiscard]] std::size_t k() const noexcept { return w_.size(); }
   [[nodiscard]] double w(std::size_t i, std::size_t j) const { return w_.at(i).at(j); }
   [[nodiscard]] const std::vector< std::vector< double > >& matrix() const noexcept { return w_; }
   [[nodiscard]] const std::vector< std::size_t >& sizes() const noexcept { return sizes_; }
   [[nodiscard]] bool has_sizes() const noexcept { return ! sizes_.empty(); }
   [[nodiscard]] std::size_t total_agents() const
   {
      std::size_t n = 0;
      for(auto s : sizes_) n += s;
      return n;
   }
   [[nodiscard]] std::size_t min_size() const
   {
      if(sizes_.empty()) throw std::logic_error("SbmModel: no population sizes");
      return *std::min_element(sizes_.begin(), sizes_.end());
   }

   [[nodiscard]] SbmModel with_sizes(std::vector< std::size_t > sizes) const { return SbmModel(w_, std::move(sizes)); }

  private:
   std::vector< std::vector< double > > w_;
   std::vector< std::size_t > sizes_;
};

/// Per-population vectors of agent state indices.
using AgentStates = std::vector< std::vector< StateIndex > >;

namespace detail {

inline void check_shapes(const SbmModel& sbm, const MeanFieldEnsemble& mu)
{
   if(mu.size() != sbm.k()) throw std::invalid_argument("ensemble has wrong number of populations");
   for(const auto& m : mu)
      if(m.size() != mu.front().size()) throw std::invalid_argument("ensemble distributions differ in size");
}

inline void check_shapes(const GameModel& model, const SbmModel& sbm, const MeanFieldEnsemble& mu, const PolicyProfile& pi)
{
   check_shapes(sbm, mu);
   if(pi.size() != sbm.k()) throw std::invalid_argument("profile has wrong number of populations");
   if(mu.front().size() != model.n_states()) throw std::invalid_argument("ensemble does not match state space");
   for(const auto& p : pi)
      if(p.n_states() != model.n_states() || p.n_actions() != model.n_actions())
         throw std::invalid_argument("policy does not match model spaces");
}

/// z = (1/K) sum_i W(k,i) mu^i, written into `out`.
inline void aggregated_impact_into(const SbmModel& sbm, const MeanFieldEnsemble& mu, PopIndex k, std::span< double > out)
{
   std::fill(out.begin(), out.end(), 0.0);
   const double inv_k = 1.0 / static_cast< double >(sbm.k());
   for(std::size_t i = 0; i < sbm.k(); ++i) {
      const double wk = sbm.w(k, i) * inv_k;
      for(std::size_t s = 0; s < out.size(); ++s) out[s] += wk * mu[i][s];
   }
}

}  // namespace detail

inline ImpactVector aggregated_impact(const SbmModel& sbm, const MeanFieldEnsemble& mu, PopIndex k)
{
   detail::check_shapes(sbm, mu);
   if(k >= sbm.k()) throw std::out_of_range("aggregated_impact: population index out of range");
   std::vector< double > z(mu.front().size());
   detail::aggregated_impact_into(sbm, mu, k, z);
   return ImpactVector(std::move(z));
}

/// Normalized state histogram of each population.
inline MeanFieldEnsemble empirical_ensemble(const AgentStates& states, std::size_t n_states)
{
   MeanFieldEnsemble out;
   out.reserve(states.size());
   for(const auto& pop : states) {
      if(pop.empty()) throw std::invalid_argument("empirical_ensemble: empty population");
      std::vector< double > h(n_states, 0.0);
      for(auto s : pop) {
         if(s >= n_states) throw std::out_of_range("empirical_ensemble: state index out of range");
         h[s] += 1.0;
      }
      for(double& x : h) x /= static_cast< double >(pop.size());
      out.emplace_back(std::move(h));
   }
   return out;
}

/// One-step pushforward of mu^k under pi^k and P(.|.,.,z^k).
inline Distribution gamma_pop_k(
   const GameModel& model, const SbmModel& sbm, const MeanFieldEnsemble& mu, const PolicyProfile& profile, PopIndex k)
{
   detail::check_shapes(model, sbm, mu, profile);
   if(k >= sbm.k()) throw std::out_of_range("gamma_pop_k: population index out of range");
   const std::size_t ns = model.n_states();
   std::vector< double > z(ns), row(ns), out(ns, 0.0);
   detail::aggregated_impact_into(sbm, mu, k, z);
   for(StateIndex s = 0; s < ns; ++s) {
      const double ms = mu[k][s];
      if(ms == 0.0) continue;
      for(ActionIndex a = 0; a < model.n_actions(); ++a) {
         const double w = ms * profile[k](s, a);
         if(w == 0.0) continue;
         model.transition_into(s, a, z, row);
         for(StateIndex t = 0; t < ns; ++t) out[t] += w * row[t];
      }
   }
   for(double x : out)
      if(! std::isfinite(x)) throw std::runtime_error("gamma_pop_k: non-finite mass");
   return Distribution(std::move(out));
}

inline MeanFieldEnsemble gamma_pop(
   const GameModel& model, const SbmModel& sbm, const MeanFieldEnsemble& mu, const PolicyProfile& profile)
{
   MeanFieldEnsemble out;
   out.reserve(sbm.k());
   for(PopIndex k = 0; k < sbm.k(); ++k) out.push_back(gamma_pop_k(model, sbm, mu, profile, k));
   return out;
}

struct PopulationFixedPoint {
   MeanFieldEnsemble ensemble;
   std::size_t iterations = 0;
   bool converged = false;
   double residual = 0.0;  ///< ||Gamma_pop(mu) - mu||_1 at the returned mu
};

inline constexpr double kDefaultPopTol = 1e-10;
inline constexpr std::size_t kDefaultPopMaxIter = 100000;

/// Stable ensemble of a fixed profile by fixed-point iteration of gamma_pop.
/// Returns the last iterate flagged as non-converged if max_iter is hit.
inline PopulationFixedPoint gamma_pop_inf(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   double tol = kDefaultPopTol,
   std::size_t max_iter = kDefaultPopMaxIter,
   std::optional< MeanFieldEnsemble > mu0 = std::nullopt)
{
   if(! (tol > 0.0)) throw std::invalid_argument("gamma_pop_inf: tol must be > 0");
   if(max_iter < 1) throw std::invalid_argument("gamma_pop_inf: max_iter must be >= 1");
   PopulationFixedPoint fp;
   fp.ensemble = mu0 ? *mu0 : uniform_ensemble(sbm.k(), model.n_states());
   for(std::size_t it = 1; it <= max_iter; ++it) {
      MeanFieldEnsemble next = gamma_pop(model, sbm, fp.ensemble, profile);
      fp.residual = ensemble_distance(next, fp.ensemble);
      fp.iterations = it;
      if(std::isnan(fp.residual)) throw std::runtime_error("gamma_pop_inf: NaN in iterate");
      if(fp.residual <= tol) {
         fp.converged = true;
         return fp;
      }
      fp.ensemble = std::move(next);
   }
   fp.residual = ensemble_distance(gamma_pop(model, sbm, fp.ensemble, profile), fp.ensemble);
   fp.converged = fp.residual <= tol;
   return fp;
}

}  // namespace mpmfg

#endif  // MPMFG_POPULATION_HPP
