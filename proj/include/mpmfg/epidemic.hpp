#ifndef MPMFG_EPIDEMIC_HPP
#define MPMFG_EPIDEMIC_HPP

#include <span>
#include <vector>

#include "mpmfg/model.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/regularizer.hpp"

namespace mpmfg::epidemic {

// Label mapping used in every output file.
inline constexpr StateIndex kHealthy = 0;
inline constexpr StateIndex kSick = 1;
inline constexpr ActionIndex kMask = 0;
inline constexpr ActionIndex kNoMask = 1;

inline constexpr double kDefaultDiscount = 0.95;

/// Connectivity between the three populations (least to most susceptible).
inline std::vector< std::vector< double > > connectivity()
{
   return {{0.5, 0.4, 0.5}, {0.4, 0.6, 0.3}, {0.5, 0.3, 0.7}};
}

/// P(S | H, a, z) for the two mask choices; P(H | S) = 0.3 regardless of a.
inline double infection_probability(ActionIndex a, double z_sick)
{
   return a == kMask ? 0.8 * z_sick + 0.1 : 0.55 * z_sick + 0.3;
}

/// r^k(s,a) = -2k 1{s=S} - 1{a=Y} - 0.5 1{s=S} 1{a=N}, k = 1..3 (here k is 0-based).
inline double reward(PopIndex k, StateIndex s, ActionIndex a)
{
   const double sick = s == kSick ? 1.0 : 0.0;
   const double mask = a == kMask ? 1.0 : 0.0;
   return -2.0 * static_cast< double >(k + 1) * sick - mask - sick * (1.0 - mask) * 0.5;
}

/// Constants of the printed kernel/reward, with z(S) <= max_k (1/K) sum_i W(k,i) = 0.5.
inline LipschitzConstants lipschitz_constants()
{
   return {.p_mu = 1.6, .p_s = 1.2, .p_a = 0.4, .r_mu = 0.0, .r_s = 6.5, .r_a = 1.0};
}

struct Benchmark {
   GameModel model;
   SbmModel sbm;
};

/// The three-population mask-wearing game. The reward does not depend on z.
inline Benchmark build(double lambda = 1.0, double gamma = kDefaultDiscount, std::vector< std::size_t > sizes = {})
{
   auto transition = [](StateIndex s, ActionIndex a, std::span< const double > z, std::span< double > out) {
      if(s == kSick) {
         out[kHealthy] = 0.3;
         out[kSick] = 0.7;
         return;
      }
      const double p = infection_probability(a, z[kSick]);
      out[kSick] = p;
      out[kHealthy] = 1.0 - p;
   };
   auto r = [](PopIndex k, StateIndex s, ActionIndex a, std::span< const double >) { return reward(k, s, a); };
   GameModel model(
      FiniteSpace(2), FiniteSpace(2), transition, r, gamma, {-7.0, 0.0}, Regularizer::entropy(lambda), lipschitz_constants());
   return {std::move(model), SbmModel(connectivity(), std::move(sizes))};
}

}  // namespace mpmfg::epidemic

#endif  // MPMFG_EPIDEMIC_HPP
