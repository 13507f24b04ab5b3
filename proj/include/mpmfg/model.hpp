#ifndef MPMFG_MODEL_HPP
#define MPMFG_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/regularizer.hpp"

namespace mpmfg {

/// Joint Lipschitz constants of the transition kernel and the reward.
struct LipschitzConstants {
   double p_mu = 0.0;
   double p_s = 0.0;
   double p_a = 0.0;
   double r_mu = 0.0;
   double r_s = 0.0;
   double r_a = 0.0;

   [[nodiscard]] bool valid() const
   {
      return p_mu >= 0 && p_s >= 0 && p_a >= 0 && r_mu >= 0 && r_s >= 0 && r_a >= 0;
   }
   /// Lipschitz constant of the population update operator.
   [[nodiscard]] double l_pop() const { return 0.5 * p_s + p_a + p_mu; }
};

/// The MP-MFG primitive: P(.|s,a,z), R^k(s,a,z), discount and regularizer.
///
/// The reward takes the population index because heterogeneous populations may
/// be penalized differently for the same (s,a,z).
class GameModel {
  public:
   /// Writes P(.|s,a,z) into `out` (size |S|).
   using TransitionFn = std::function< void(StateIndex, ActionIndex, std::span< const double >, std::span< double >) >;
   using RewardFn = std::function< double(PopIndex, StateIndex, ActionIndex, std::span< const double >) >;

   GameModel(
      FiniteSpace states,
      FiniteSpace actions,
      TransitionFn transition,
      RewardFn reward,
      double discount,
      std::pair< double, double > reward_range,
      Regularizer regularizer,
      std::optional< LipschitzConstants > lipschitz = std::nullopt)
       : states_(states),
         actions_(actions),
         transition_(std::move(transition)),
         reward_(std::move(reward)),
         discount_(discount),
         reward_range_(reward_range),
         regularizer_(regularizer),
         lipschitz_(lipschitz)
   {
      if(! (discount > 0.0 && discount < 1.0)) throw std::invalid_argument("GameModel: discount must lie in (0,1)");
      if(! (reward_range.first <= reward_range.second))
         throw std::invalid_argument("GameModel: reward range must satisfy min <= max");
      if(lipschitz_ && ! lipschitz_->valid())
         throw std::invalid_argument("GameModel: Lipschitz constants must be >= 0");
      if(! transition_ || ! reward_) throw std::invalid_argument("GameModel: transition and reward are required");
   }

   [[nodiscard]] std::size_t n_states() const noexcept { return states_.size(); }
   [[nodiscard]] std::size_t n_actions() const noexcept { return actions_.size(); }
   [[nodiscard]] double discount() const noexcept { return discount_; }
   [[nodiscard]] const Regularizer& regularizer() const noexcept { return regularizer_; }
   [[nodiscard]] std::pair< double, double > reward_range() const noexcept { return reward_range_; }
   [[nodiscard]] const std::optional< LipschitzConstants >& lipschitz() const noexcept { return lipschitz_; }

   /// Hot-path form: no allocation, no validation.
   void transition_into(StateIndex s, ActionIndex a, std::span< const double > z, std::span< double > out) const
   {
      transition_(s, a, z, out);
   }

   [[nodiscard]] Distribution transition(StateIndex s, ActionIndex a, const ImpactVector& z) const
   {
      check_indices(s, a, z.size());
      std::vector< double > out(n_states());
      transition_(s, a, z.weights(), out);
      return Distribution(std::move(out));
   }

   [[nodiscard]] double reward(PopIndex k, StateIndex s, ActionIndex a, std::span< const double > z) const
   {
      return reward_(k, s, a, z);
   }
   [[nodiscard]] double reward(PopIndex k, StateIndex s, ActionIndex a, const ImpactVector& z) const
   {
      check_indices(s, a, z.size());
      return reward_(k, s, a, z.weights());
   }

   /// Uniform bound on |Q| for learners: (max(|R_min|,|R_max|) + h_max) / (1 - gamma).
   [[nodiscard]] double q_bound() const
   {
      const double r = std::max(std::abs(reward_range_.first), std::abs(reward_range_.second));
      return (r + regularizer_.h_max(n_actions())) / (1.0 - discount_);
   }

   /// Copy with a different discount.
   [[nodiscard]] GameModel with_discount(double gamma) const
   {
      GameModel m = *this;
      if(! (gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("GameModel: discount must lie in (0,1)");
      m.discount_ = gamma;
      return m;
   }
   [[nodiscard]] GameModel with_regularizer(Regularizer h) const
   {
      GameModel m = *this;
      m.regularizer_ = h;
      return m;
   }

  private:
   void check_indices(StateIndex s, ActionIndex a, std::size_t z_size) const
   {
      if(! states_.contains(s) || ! actions_.contains(a)) throw std::out_of_range("GameModel: index out of range");
      if(z_size != n_states()) throw std::invalid_argument("GameModel: impact vector has wrong size");
   }

   FiniteSpace states_;
   FiniteSpace actions_;
   TransitionFn transition_;
   RewardFn reward_;
   double discount_;
   std::pair< double, double > reward_range_;
   Regularizer regularizer_;
   std::optional< LipschitzConstants > lipschitz_;
};

/// P-bar(.|s,u,z) = sum_a u(a) P(.|s,a,z).
inline Distribution mixed_transition(const GameModel& model, StateIndex s, const Distribution& u, const ImpactVector& z)
{
   if(u.size() != model.n_actions()) throw std::invalid_argument("mixed_transition: action distribution size");
   std::vector< double > out(model.n_states(), 0.0);
   for(ActionIndex a = 0; a < model.n_actions(); ++a) {
      if(u[a] == 0.0) continue;
      const Distribution row = model.transition(s, a, z);
      for(StateIndex t = 0; t < out.size(); ++t) out[t] += u[a] * row[t];
   }
   return Distribution(std::move(out));
}

/// R-bar(s,u,z) = sum_a u(a) R(s,a,z).
inline double mixed_reward(const GameModel& model, PopIndex k, StateIndex s, const Distribution& u, const ImpactVector& z)
{
   if(u.size() != model.n_actions()) throw std::invalid_argument("mixed_reward: action distribution size");
   double r = 0.0;
   for(ActionIndex a = 0; a < model.n_actions(); ++a)
      if(u[a] != 0.0) r += u[a] * model.reward(k, s, a, z);
   return r;
}

/// A single-population MDP with the aggregated impact held fixed.
struct TabularMdp {
   std::size_t n_states = 0;
   std::size_t n_actions = 0;
   std::vector< double > transition;  ///< [s][a][s'] row-major
   std::vector< double > reward;      ///< [s][a]
   double discount = 0.0;

   [[nodiscard]] std::span< const double > row(StateIndex s, ActionIndex a) const
   {
      return std::span< const double >(transition).subspan((s * n_actions + a) * n_states, n_states);
   }
   [[nodiscard]] double r(StateIndex s, ActionIndex a) const { return reward[s * n_actions + a]; }
};

/// Freezes the model at impact z for population k.
inline TabularMdp freeze(const GameModel& model, PopIndex k, const ImpactVector& z)
{
   TabularMdp m;
   m.n_states = model.n_states();
   m.n_actions = model.n_actions();
   m.discount = model.discount();
   m.transition.resize(m.n_states * m.n_actions * m.n_states);
   m.reward.resize(m.n_states * m.n_actions);
   for(StateIndex s = 0; s < m.n_states; ++s)
      for(ActionIndex a = 0; a < m.n_actions; ++a) {
         const Distribution row = model.transition(s, a, z);
         std::copy(row.vec().begin(), row.vec().end(), m.transition.begin() + (s * m.n_actions + a) * m.n_states);
         m.reward[s * m.n_actions + a] = model.reward(k, s, a, z);
      }
   return m;
}

}  // namespace mpmfg

#endif  // MPMFG_MODEL_HPP
