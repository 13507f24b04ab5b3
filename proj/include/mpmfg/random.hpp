#ifndef MPMFG_RANDOM_HPP
#define MPMFG_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mpmfg {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}

/// Deterministically derives a child seed from a parent seed and a path of tags.
/// Used to give every (population, state, action), every agent at every step,
/// etc. its own stream so serial and parallel execution draw identical numbers.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list< std::uint64_t > tags) noexcept
{
   std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
   for(std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x3c6ef372fe94f82bULL));
   return h;
}

/// xoshiro256** seeded through splitmix64. Satisfies UniformRandomBitGenerator.
class Rng {
  public:
   using result_type = std::uint64_t;

   explicit Rng(std::uint64_t seed = 0) noexcept
   {
      std::uint64_t x = seed;
      for(auto& w : s_) {
         x += 0x9e3779b97f4a7c15ULL;
         w = splitmix64(x);
      }
   }
   /// Independent stream for a tag path below `seed`.
   static Rng stream(std::uint64_t seed, std::initializer_list< std::uint64_t > tags) noexcept
   {
      return Rng(derive_seed(seed, tags));
   }

   static constexpr result_type min() noexcept { return 0; }
   static constexpr result_type max() noexcept { return std::numeric_limits< result_type >::max(); }

   result_type operator()() noexcept
   {
      const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
      const std::uint64_t t = s_[1] << 17;
      s_[2] ^= s_[0];
      s_[3] ^= s_[1];
      s_[1] ^= s_[2];
      s_[0] ^= s_[3];
      s_[2] ^= t;
      s_[3] = rotl(s_[3], 45);
      return result;
   }

   /// Uniform double in [0,1) with 53 random bits.
   double uniform() noexcept { return static_cast< double >((*this)() >> 11) * 0x1.0p-53; }

   bool bernoulli(double p) noexcept { return uniform() < p; }

  private:
   static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
   std::uint64_t s_[4]{};
};

/// SplitMix64 generator. Cheap to seed, used for the many short per-agent,
/// per-step streams of the N-agent simulator.
class SplitMix64 {
  public:
   using result_type = std::uint64_t;
   explicit SplitMix64(std::uint64_t seed) noexcept : x_(seed) {}
   static constexpr result_type min() noexcept { return 0; }
   static constexpr result_type max() noexcept { return std::numeric_limits< result_type >::max(); }
   result_type operator()() noexcept
   {
      x_ += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x_;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
   }
   double uniform() noexcept { return static_cast< double >((*this)() >> 11) * 0x1.0p-53; }

  private:
   std::uint64_t x_;
};

/// Inverse-CDF draw from (unnormalized-safe) probability weights given a uniform u in [0,1).
inline std::size_t sample_index(std::span< const double > w, double u) noexcept
{
   double acc = 0.0;
   for(std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if(u < acc) return i;
   }
   // mass lost to rounding goes to the last index with positive weight
   for(std::size_t i = w.size(); i-- > 0;)
      if(w[i] > 0.0) return i;
   return w.size() - 1;
}

/// Walker/Vose alias table: O(1) draws from a fixed discrete distribution.
class AliasTable {
  public:
   AliasTable() = default;
   explicit AliasTable(std::span< const double > weights)
   {
      const std::size_t n = weights.size();
      if(n == 0) throw std::invalid_argument("AliasTable: empty weights");
      double total = 0.0;
      for(double w : weights) {
         if(! (w >= 0.0)) throw std::invalid_argument("AliasTable: negative weight");
         total += w;
      }
      if(! (total > 0.0)) throw std::invalid_argument("AliasTable: zero total weight");
      prob_.assign(n, 0.0);
      alias_.assign(n, 0);
      std::vector< double > scaled(n);
      std::vector< std::uint32_t > small, large;
      for(std::size_t i = 0; i < n; ++i) {
         scaled[i] = weights[i] * static_cast< double >(n) / total;
         (scaled[i] < 1.0 ? small : large).push_back(static_cast< std::uint32_t >(i));
      }
      while(! small.empty() && ! large.empty()) {
         const auto l = small.back();
         small.pop_back();
         const auto g = large.back();
         prob_[l] = scaled[l];
         alias_[l] = g;
         scaled[g] = (scaled[g] + scaled[l]) - 1.0;
         if(scaled[g] < 1.0) {
            large.pop_back();
            small.push_back(g);
         }
      }
      for(auto i : large) prob_[i] = 1.0;
      for(auto i : small) prob_[i] = 1.0;
   }

   [[nodiscard]] std::size_t size() const noexcept { return prob_.size(); }

   /// One 64-bit draw: high 32 bits pick the column, low 32 bits the coin.
   [[nodiscard]] std::size_t sample(std::uint64_t bits) const noexcept
   {
      const std::uint64_t col = ((bits >> 32) * static_cast< std::uint64_t >(prob_.size())) >> 32;
      const double coin = static_cast< double >(bits & 0xffffffffULL) * 0x1.0p-32;
      return coin < prob_[col] ? col : alias_[col];
   }

  private:
   std::vector< double > prob_;
   std::vector< std::uint32_t > alias_;
};

/// Binomial(n, p) probability mass function, computed in log space.
inline std::vector< double > binomial_pmf(std::size_t n, double p)
{
   std::vector< double > pmf(n + 1, 0.0);
   if(p <= 0.0) {
      pmf[0] = 1.0;
      return pmf;
   }
   if(p >= 1.0) {
      pmf[n] = 1.0;
      return pmf;
   }
   const double lp = std::log(p), lq = std::log1p(-p);
   const double lgn = std::lgamma(static_cast< double >(n) + 1.0);
   for(std::size_t x = 0; x <= n; ++x) {
      const double xd = static_cast< double >(x);
      const double nd = static_cast< double >(n);
      pmf[x] = std::exp(lgn - std::lgamma(xd + 1.0) - std::lgamma(nd - xd + 1.0) + xd * lp + (nd - xd) * lq);
   }
   return pmf;
}

/// Lazily built cache of Binomial(n, p) alias tables.
///
/// Not thread-safe for insertion: callers resolve the tables they need with
/// `get` before fanning out and then only call `AliasTable::sample`.
class BinomialTableCache {
  public:
   const AliasTable& get(std::size_t n, double p)
   {
      auto key = std::make_pair(n, p);
      auto it = tables_.find(key);
      if(it == tables_.end()) {
         const auto pmf = binomial_pmf(n, p);
         it = tables_.emplace(key, std::make_unique< AliasTable >(pmf)).first;
      }
      return *it->second;
   }
   [[nodiscard]] std::size_t size() const noexcept { return tables_.size(); }

  private:
   std::map< std::pair< std::size_t, double >, std::unique_ptr< AliasTable > > tables_;
};

}  // namespace mpmfg

#endif  // MPMFG_RANDOM_HPP
