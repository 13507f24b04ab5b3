#ifndef MPMFG_EVALUATION_HPP
#define MPMFG_EVALUATION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/regularizer.hpp"

namespace mpmfg {

// ---------------------------------------------------------------------------
// Evaluation on a frozen single-population MDP
// ---------------------------------------------------------------------------

/// Expected continuation  sum_{s',a'} P(s'|s,a) pi(a'|s') (Q(s',a') + bonus(s')).
inline double expected_next(
   const TabularMdp& mdp, StateIndex s, ActionIndex a, const Policy& pi, const QTable& q, std::span< const double > bonus)
{
   double acc = 0.0;
   const auto row = mdp.row(s, a);
   for(StateIndex t = 0; t < mdp.n_states; ++t) {
      if(row[t] == 0.0) continue;
      double v = bonus.empty() ? 0.0 : bonus[t];
      for(ActionIndex b = 0; b < mdp.n_actions; ++b) v += pi(t, b) * q(t, b);
      acc += row[t] * v;
   }
   return acc;
}

/// Solves the q-Bellman equation
///   q(s,a) = R(s,a) + gamma * E_{s',a'}[ q(s',a') + h(pi(s')) ]
/// exactly as the |S||A| linear system (I - gamma P_pi) q = R + gamma P h_pi.
inline QTable evaluate_q(const TabularMdp& mdp, const Policy& pi, const Regularizer& h)
{
   if(pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
      throw std::invalid_argument("evaluate_q: policy does not match MDP");
   const std::size_t ns = mdp.n_states, na = mdp.n_actions, n = ns * na;
   const auto h_pi = h.per_state(pi);
   Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast< Eigen::Index >(n), static_cast< Eigen::Index >(n));
   Eigen::VectorXd rhs(static_cast< Eigen::Index >(n));
   for(StateIndex s = 0; s < ns; ++s)
      for(ActionIndex a = 0; a < na; ++a) {
         const auto i = static_cast< Eigen::Index >(s * na + a);
         const auto row = mdp.row(s, a);
         double bonus = 0.0;
         for(StateIndex t = 0; t < ns; ++t) {
            bonus += row[t] * h_pi[t];
            for(ActionIndex b = 0; b < na; ++b)
               m(i, static_cast< Eigen::Index >(t * na + b)) -= mdp.discount * row[t] * pi(t, b);
         }
         rhs(i) = mdp.r(s, a) + mdp.discount * bonus;
      }
   const Eigen::PartialPivLU< Eigen::MatrixXd > lu(m);
   Eigen::VectorXd x = lu.solve(rhs);
   // one step of iterative refinement
   x += lu.solve(rhs - m * x);
   if(! x.allFinite()) throw std::runtime_error("evaluate_q: singular Bellman system");
   return QTable(ns, na, std::vector< double >(x.data(), x.data() + x.size()));
}

/// sup-norm of Q - T^pi Q with (T^pi Q)(s,a) = R + h(pi(s)) + gamma E[Q(s',a')].
inline double bellman_residual(const TabularMdp& mdp, const Policy& pi, const Regularizer& h, const QTable& big_q)
{
   const auto h_pi = h.per_state(pi);
   double res = 0.0;
   for(StateIndex s = 0; s < mdp.n_states; ++s)
      for(ActionIndex a = 0; a < mdp.n_actions; ++a) {
         const double tq = mdp.r(s, a) + h_pi[s] + mdp.discount * expected_next(mdp, s, a, pi, big_q, {});
         res = std::max(res, std::abs(big_q(s, a) - tq));
      }
   return res;
}

/// Q = q + h(pi(s)) row by row.
inline QTable add_state_bonus(const QTable& q, const Policy& pi, const Regularizer& h)
{
   QTable out = q;
   for(StateIndex s = 0; s < q.n_states(); ++s) {
      const double b = h(pi.row(s));
      for(ActionIndex a = 0; a < q.n_actions(); ++a) out(s, a) += b;
   }
   return out;
}

/// V(s) = sum_a pi(a|s) Q(s,a).
inline std::vector< double > state_values(const QTable& big_q, const Policy& pi)
{
   std::vector< double > v(big_q.n_states(), 0.0);
   for(StateIndex s = 0; s < big_q.n_states(); ++s)
      for(ActionIndex a = 0; a < big_q.n_actions(); ++a) v[s] += pi(s, a) * big_q(s, a);
   return v;
}

/// Solution of the regularized inner problem max_{u in simplex} <u, x> + h(u).
struct InnerMax {
   double value;
   std::vector< double > argmax;
};

/// Euclidean projection onto the probability simplex (sort-based).
inline std::vector< double > project_to_simplex(std::span< const double > y)
{
   const std::size_t n = y.size();
   std::vector< double > sorted(y.begin(), y.end());
   std::sort(sorted.begin(), sorted.end(), std::greater<>());
   double cum = 0.0, theta = 0.0;
   for(std::size_t j = 0; j < n; ++j) {
      cum += sorted[j];
      const double t = (cum - 1.0) / static_cast< double >(j + 1);
      if(sorted[j] - t > 0.0) theta = t;
   }
   std::vector< double > x(n);
   double tot = 0.0;
   for(std::size_t i = 0; i < n; ++i) tot += (x[i] = std::max(y[i] - theta, 0.0));
   for(double& v : x) v /= tot;
   return x;
}

inline InnerMax regularized_max(std::span< const double > x, const Regularizer& h)
{
   const std::size_t n = x.size();
   InnerMax out{0.0, std::vector< double >(n, 0.0)};
   if(h.is_zero()) {
      // ties go to the lowest action index
      const auto it = std::max_element(x.begin(), x.end());
      out.argmax[static_cast< std::size_t >(it - x.begin())] = 1.0;
      out.value = *it;
      return out;
   }
   if(h.kind() == RegularizerKind::entropy) {
      // value = lambda * logsumexp(x / lambda), argmax = softmax(x / lambda)
      const double lam = h.scale();
      const double mx = *std::max_element(x.begin(), x.end());
      double z = 0.0;
      for(std::size_t a = 0; a < n; ++a) z += (out.argmax[a] = std::exp((x[a] - mx) / lam));
      for(double& u : out.argmax) u /= z;
      out.value = mx + lam * std::log(z);
      return out;
   }
   // <u,x> + lambda(1 - ||u||^2) = -lambda ||u - x/(2 lambda)||^2 + const
   std::vector< double > y(n);
   for(std::size_t a = 0; a < n; ++a) y[a] = x[a] / (2.0 * h.scale());
   out.argmax = project_to_simplex(y);
   double v = h(out.argmax);
   for(std::size_t a = 0; a < n; ++a) v += out.argmax[a] * x[a];
   out.value = v;
   return out;
}

struct BestResponse {
   std::vector< double > value;  ///< V*(s)
   Policy policy;                ///< maximizing mixed strategy per state
   std::size_t iterations = 0;
};

/// Regularized value iteration  V(s) = max_u <u, R(s,.) + gamma P V> + h(u)
/// until the sup-norm change is <= tol. The reported value is the exact value of
/// the returned policy, so it is attained and within tol-order of V*.
inline BestResponse best_response(const TabularMdp& mdp, const Regularizer& h, double tol, std::size_t max_iter = 1000000)
{
   if(! (tol > 0.0)) throw std::invalid_argument("best_response: tol must be > 0");
   const std::size_t ns = mdp.n_states, na = mdp.n_actions;
   std::vector< double > v(ns, 0.0), next(ns), x(na);
   std::vector< double > flat(ns * na);
   BestResponse br;
   for(std::size_t it = 1; it <= max_iter; ++it) {
      double change = 0.0;
      for(StateIndex s = 0; s < ns; ++s) {
         for(ActionIndex a = 0; a < na; ++a) {
            const auto row = mdp.row(s, a);
            double ev = 0.0;
            for(StateIndex t = 0; t < ns; ++t) ev += row[t] * v[t];
            x[a] = mdp.r(s, a) + mdp.discount * ev;
         }
         const InnerMax im = regularized_max(x, h);
         next[s] = im.value;
         std::copy(im.argmax.begin(), im.argmax.end(), flat.begin() + static_cast< std::ptrdiff_t >(s * na));
         change = std::max(change, std::abs(next[s] - v[s]));
      }
      v.swap(next);
      br.iterations = it;
      if(change <= tol) break;
   }
   br.policy = Policy(ns, na, flat);
   br.value = state_values(add_state_bonus(evaluate_q(mdp, br.policy, h), br.policy, h), br.policy);
   return br;
}

// ---------------------------------------------------------------------------
// Population-level wrappers: freeze the model at z^k of the given ensemble
// ---------------------------------------------------------------------------

inline TabularMdp frozen_mdp(const GameModel& model, const SbmModel& sbm, const MeanFieldEnsemble& mu, PopIndex k)
{
   return freeze(model, k, aggregated_impact(sbm, mu, k));
}

/// q^k(.,.|pi, mu): the unregularized-at-current-state action value.
inline QTable exact_q(
   const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, const MeanFieldEnsemble& mu, PopIndex k)
{
   detail::check_shapes(model, sbm, mu, profile);
   return evaluate_q(frozen_mdp(model, sbm, mu, k), profile.at(k), model.regularizer());
}

/// Q^k = q^k + h(pi^k(s)).
inline QTable exact_Q(
   const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, const MeanFieldEnsemble& mu, PopIndex k)
{
   return add_state_bonus(exact_q(model, sbm, profile, mu, k), profile.at(k), model.regularizer());
}

inline std::vector< double > exact_V(
   const GameModel& model, const SbmModel& sbm, const PolicyProfile& profile, const MeanFieldEnsemble& mu, PopIndex k)
{
   return state_values(exact_Q(model, sbm, profile, mu, k), profile.at(k));
}

inline BestResponse best_response_value(
   const GameModel& model, const SbmModel& sbm, const MeanFieldEnsemble& mu, PopIndex k, double tol)
{
   detail::check_shapes(sbm, mu);
   return best_response(frozen_mdp(model, sbm, mu, k), model.regularizer(), tol);
}

inline double bellman_residual(
   const GameModel& model,
   const SbmModel& sbm,
   const PolicyProfile& profile,
   const MeanFieldEnsemble& mu,
   PopIndex k,
   const QTable& big_q)
{
   detail::check_shapes(model, sbm, mu, profile);
   return bellman_residual(frozen_mdp(model, sbm, mu, k), profile.at(k), model.regularizer(), big_q);
}

}  // namespace mpmfg

#endif  // MPMFG_EVALUATION_HPP
