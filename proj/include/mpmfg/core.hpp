#ifndef MPMFG_CORE_HPP
#define MPMFG_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mpmfg {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using PopIndex = std::size_t;

/// Tolerance used when validating that weights form a probability vector.
inline constexpr double kSimplexTol = 1e-9;

/// A finite, 0-indexed space of states or actions.
class FiniteSpace {
  public:
   explicit FiniteSpace(std::size_t size) : size_(size)
   {
      if(size == 0) throw std::invalid_argument("FiniteSpace: size must be >= 1");
   }
   [[nodiscard]] std::size_t size() const noexcept { return size_; }
   [[nodiscard]] bool contains(std::size_t i) const noexcept { return i < size_; }
   bool operator==(const FiniteSpace&) const = default;

  private:
   std::size_t size_;
};

namespace detail {

inline double sum(std::span< const double > v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline void check_probability_vector(std::span< const double > w, const char* what)
{
   if(w.empty()) throw std::invalid_argument(std::string(what) + ": empty weight vector");
   for(double x : w) {
      if(! std::isfinite(x) || x < -kSimplexTol)
         throw std::invalid_argument(std::string(what) + ": negative or non-finite weight");
   }
   if(std::abs(sum(w) - 1.0) > kSimplexTol)
      throw std::invalid_argument(std::string(what) + ": weights do not sum to 1");
}

}  // namespace detail

inline double l1_distance(std::span< const double > a, std::span< const double > b)
{
   if(a.size() != b.size()) throw std::invalid_argument("l1_distance: size mismatch");
   double d = 0.0;
   for(std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
   return d;
}

/// Probability vector over a finite space. Validated and renormalized on construction.
class Distribution {
  public:
   Distribution() = default;
   explicit Distribution(std::vector< double > weights) : w_(std::move(weights))
   {
      detail::check_probability_vector(w_, "Distribution");
      for(double& x : w_) x = std::max(x, 0.0);
      const double s = detail::sum(w_);
      for(double& x : w_) x /= s;
   }

   static Distribution uniform(std::size_t n)
   {
      if(n == 0) throw std::invalid_argument("Distribution::uniform: n must be >= 1");
      return Distribution(std::vector< double >(n, 1.0 / static_cast< double >(n)));
   }
   static Distribution point_mass(std::size_t n, std::size_t at)
   {
      if(at >= n) throw std::invalid_argument("Distribution::point_mass: index out of range");
      std::vector< double > w(n, 0.0);
      w[at] = 1.0;
      return Distribution(std::move(w));
   }

   [[nodiscard]] std::size_t size() const noexcept { return w_.size(); }
   [[nodiscard]] double operator[](std::size_t i) const { return w_[i]; }
   [[nodiscard]] std::span< const double > weights() const noexcept { return w_; }
   [[nodiscard]] const std::vector< double >& vec() const noexcept { return w_; }
   bool operator==(const Distribution&) const = default;

  private:
   std::vector< double > w_;
};

/// W-weighted average of state distributions. Entries in [0,1], total mass <= 1.
class ImpactVector {
  public:
   ImpactVector() = default;
   explicit ImpactVector(std::vector< double > weights) : w_(std::move(weights))
   {
      for(double& x : w_) {
         if(! std::isfinite(x) || x < -kSimplexTol || x > 1.0 + kSimplexTol)
            throw std::invalid_argument("ImpactVector: entry outside [0,1]");
         x = std::clamp(x, 0.0, 1.0);
      }
      if(detail::sum(w_) > 1.0 + kSimplexTol)
         throw std::invalid_argument("ImpactVector: total mass exceeds 1");
   }
   static ImpactVector zeros(std::size_t n) { return ImpactVector(std::vector< double >(n, 0.0)); }

   [[nodiscard]] std::size_t size() const noexcept { return w_.size(); }
   [[nodiscard]] double operator[](std::size_t i) const { return w_[i]; }
   [[nodiscard]] double mass() const { return detail::sum(w_); }
   [[nodiscard]] std::span< const double > weights() const noexcept { return w_; }

  private:
   std::vector< double > w_;
};

/// Stationary policy: one distribution over actions per state, stored row-major.
class Policy {
  public:
   Policy() = default;
   Policy(std::size_t n_states, std::size_t n_actions, std::vector< double > probs)
       : n_states_(n_states), n_actions_(n_actions), p_(std::move(probs))
   {
      if(n_states == 0 || n_actions == 0)
         throw std::invalid_argument("Policy: empty state or action space");
      if(p_.size() != n_states * n_actions) throw std::invalid_argument("Policy: shape mismatch");
      for(std::size_t s = 0; s < n_states_; ++s) {
         auto r = std::span< double >(p_).subspan(s * n_actions_, n_actions_);
         detail::check_probability_vector(r, "Policy row");
         for(double& x : r) x = std::max(x, 0.0);
         const double tot = detail::sum(r);
         for(double& x : r) x /= tot;
      }
   }

   static Policy from_rows(const std::vector< std::vector< double > >& rows)
   {
      if(rows.empty()) throw std::invalid_argument("Policy: no rows");
      std::vector< double > flat;
      for(const auto& r : rows) {
         if(r.size() != rows.front().size()) throw std::invalid_argument("Policy: ragged rows");
         flat.insert(flat.end(), r.begin(), r.end());
      }
      return Policy(rows.size(), rows.front().size(), std::move(flat));
   }
   static Policy uniform(std::size_t n_states, std::size_t n_actions)
   {
      return constant(n_states, Distribution::uniform(n_actions));
   }
   static Policy constant(std::size_t n_states, const Distribution& row)
   {
      std::vector< double > flat;
      for(std::size_t s = 0; s < n_states; ++s) flat.insert(flat.end(), row.vec().begin(), row.vec().end());
      return Policy(n_states, row.size(), std::move(flat));
   }

   [[nodiscard]] std::size_t n_states() const noexcept { return n_states_; }
   [[nodiscard]] std::size_t n_actions() const noexcept { return n_actions_; }
   [[nodiscard]] double operator()(StateIndex s, ActionIndex a) const { return p_[s * n_actions_ + a]; }
   [[nodiscard]] std::span< const double > row(StateIndex s) const
   {
      return std::span< const double >(p_).subspan(s * n_actions_, n_actions_);
   }
   [[nodiscard]] const std::vector< double >& flat() const noexcept { return p_; }
   /// Smallest action probability over all states.
   [[nodiscard]] double min_prob() const { return *std::min_element(p_.begin(), p_.end()); }
   bool operator==(const Policy&) const = default;

  private:
   std::size_t n_states_ = 0;
   std::size_t n_actions_ = 0;
   std::vector< double > p_;
};

using PolicyProfile = std::vector< Policy >;
using MeanFieldEnsemble = std::vector< Distribution >;

/// |S| x |A| table of reals.
class QTable {
  public:
   QTable() = default;
   QTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
       : n_states_(n_states), n_actions_(n_actions), v_(n_states * n_actions, fill)
   {
   }
   QTable(std::size_t n_states, std::size_t n_actions, std::vector< double > values)
       : n_states_(n_states), n_actions_(n_actions), v_(std::move(values))
   {
      if(v_.size() != n_states * n_actions) throw std::invalid_argument("QTable: shape mismatch");
   }

   [[nodiscard]] std::size_t n_states() const noexcept { return n_states_; }
   [[nodiscard]] std::size_t n_actions() const noexcept { return n_actions_; }
   double& operator()(StateIndex s, ActionIndex a) { return v_[s * n_actions_ + a]; }
   [[nodiscard]] double operator()(StateIndex s, ActionIndex a) const { return v_[s * n_actions_ + a]; }
   [[nodiscard]] std::span< const double > row(StateIndex s) const
   {
      return std::span< const double >(v_).subspan(s * n_actions_, n_actions_);
   }
   [[nodiscard]] const std::vector< double >& flat() const noexcept { return v_; }
   std::vector< double >& flat() noexcept { return v_; }

   [[nodiscard]] double sup_distance(const QTable& other) const
   {
      if(other.v_.size() != v_.size()) throw std::invalid_argument("QTable: shape mismatch");
      double d = 0.0;
      for(std::size_t i = 0; i < v_.size(); ++i) d = std::max(d, std::abs(v_[i] - other.v_[i]));
      return d;
   }
   bool operator==(const QTable&) const = default;

  private:
   std::size_t n_states_ = 0;
   std::size_t n_actions_ = 0;
   std::vector< double > v_;
};

/// One-step observation (s, a, r, s', a').
struct Observation {
   StateIndex s;
   ActionIndex a;
   double r;
   StateIndex s_next;
   ActionIndex a_next;
};

/// sup over states of the row L1 distance.
inline double policy_distance(const Policy& p, const Policy& q)
{
   if(p.n_states() != q.n_states() || p.n_actions() != q.n_actions())
      throw std::invalid_argument("policy_distance: shape mismatch");
   double d = 0.0;
   for(StateIndex s = 0; s < p.n_states(); ++s) d = std::max(d, l1_distance(p.row(s), q.row(s)));
   return d;
}

/// max over populations of the per-policy distance.
inline double policy_distance(const PolicyProfile& p, const PolicyProfile& q)
{
   if(p.size() != q.size()) throw std::invalid_argument("policy_distance: profile size mismatch");
   double d = 0.0;
   for(std::size_t k = 0; k < p.size(); ++k) d = std::max(d, policy_distance(p[k], q[k]));
   return d;
}

inline double ensemble_distance(const MeanFieldEnsemble& a, const MeanFieldEnsemble& b)
{
   if(a.size() != b.size()) throw std::invalid_argument("ensemble_distance: size mismatch");
   double d = 0.0;
   for(std::size_t k = 0; k < a.size(); ++k) {
      if(a[k].size() != b[k].size()) throw std::invalid_argument("ensemble_distance: shape mismatch");
      d = std::max(d, l1_distance(a[k].weights(), b[k].weights()));
   }
   return d;
}

inline PolicyProfile uniform_profile(std::size_t k, std::size_t n_states, std::size_t n_actions)
{
   return PolicyProfile(k, Policy::uniform(n_states, n_actions));
}

inline MeanFieldEnsemble uniform_ensemble(std::size_t k, std::size_t n_states)
{
   return MeanFieldEnsemble(k, Distribution::uniform(n_states));
}

}  // namespace mpmfg

#endif  // MPMFG_CORE_HPP
