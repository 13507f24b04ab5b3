#ifndef MPMFG_GGRS_HPP
#define MPMFG_GGRS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpmfg/core.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/parallel.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/random.hpp"

namespace mpmfg {

/// How each agent's neighbor impact is produced in a dynamics step.
///  - graph:      a full symmetric adjacency is sampled and z-tilde is read off it.
///  - marginal:   each agent's neighbor counts are drawn directly from their
///                Binomial(n_{i,s}, W(k,i)) law; same per-agent z-tilde law as
///                `graph`, without the cross-agent correlation of shared edges.
///  - mean_field: no graph; every agent in population k feels
///                z-hat^k = (1/K) sum_i W(k,i) mu-tilde^i (fully connected game).
enum class ImpactMode { graph, marginal, mean_field };

inline std::string to_string(ImpactMode m)
{
   switch(m) {
      case ImpactMode::graph: return "graph";
      case ImpactMode::marginal: return "marginal";
      case ImpactMode::mean_field: return "mean_field";
   }
   return "?";
}

inline ImpactMode impact_mode_from_string(const std::string& s)
{
   if(s == "graph") return ImpactMode::graph;
   if(s == "marginal") return ImpactMode::marginal;
   if(s == "mean_field") return ImpactMode::mean_field;
   throw std::invalid_argument("unknown impact mode: " + s);
}

/// Maps (population, local index) to a global agent id and back.
class AgentLayout {
  public:
   AgentLayout() = default;
   explicit AgentLayout(const std::vector< std::size_t >& sizes) : sizes_(sizes)
   {
      if(sizes.empty()) throw std::invalid_argument("AgentLayout: no populations");
      offsets_.reserve(sizes.size() + 1);
      offsets_.push_back(0);
      for(PopIndex k = 0; k < sizes.size(); ++k) {
         if(sizes[k] == 0) throw std::invalid_argument("AgentLayout: population sizes must be >= 1");
         offsets_.push_back(offsets_.back() + sizes[k]);
         pop_.insert(pop_.end(), sizes[k], k);
      }
   }
   [[nodiscard]] std::size_t k() const noexcept { return sizes_.size(); }
   [[nodiscard]] std::size_t size(PopIndex k) const { return sizes_.at(k); }
   [[nodiscard]] const std::vector< std::size_t >& sizes() const noexcept { return sizes_; }
   [[nodiscard]] std::size_t total() const noexcept { return pop_.size(); }
   [[nodiscard]] std::size_t global(PopIndex k, std::size_t l) const { return offsets_[k] + l; }
   [[nodiscard]] PopIndex pop_of(std::size_t agent) const { return pop_[agent]; }
   [[nodiscard]] std::size_t local(std::size_t agent) const { return agent - offsets_[pop_[agent]]; }

  private:
   std::vector< std::size_t > sizes_;
   std::vector< std::size_t > offsets_;
   std::vector< PopIndex > pop_;
};

inline std::vector< std::size_t > sizes_of(const AgentStates& states)
{
   std::vector< std::size_t > s;
   s.reserve(states.size());
   for(const auto& p : states) s.push_back(p.size());
   return s;
}

/// Undirected 0/1 graph over all agents as sorted neighbor lists. A self-loop
/// appears once in the agent's own list.
struct Adjacency {
   AgentLayout layout;
   std::vector< std::vector< std::size_t > > neighbors;

   [[nodiscard]] bool connected(std::size_t u, std::size_t v) const
   {
      return std::binary_search(neighbors[u].begin(), neighbors[u].end(), v);
   }
   [[nodiscard]] std::size_t edge_count() const
   {
      std::size_t twice = 0, loops = 0;
      for(std::size_t u = 0; u < neighbors.size(); ++u) {
         twice += neighbors[u].size();
         if(connected(u, u)) ++loops;
      }
      return (twice - loops) / 2 + loops;
   }
};

namespace detail {

inline constexpr std::uint64_t kTagGraph = 0;
inline constexpr std::uint64_t kTagDynamics = 1;
inline constexpr std::uint64_t kTagInit = 0x696e6974;

inline SplitMix64 agent_stream(std::uint64_t step_seed, std::size_t u)
{
   return SplitMix64(splitmix64(step_seed ^ splitmix64(static_cast< std::uint64_t >(u))));
}

/// Stream of agent u at step t for one purpose (graph or dynamics).
inline SplitMix64 agent_stream(std::uint64_t seed, std::uint64_t step, std::uint64_t tag, std::size_t u)
{
   return agent_stream(derive_seed(seed, {step, tag}), u);
}

/// Agent u's share of the graph: neighbors v >= u (v == u only with self-loops).
template < class Gen >
void sample_upper_row(
   const SbmModel& sbm, const AgentLayout& layout, std::size_t u, bool self_loops, Gen& rng, std::vector< std::size_t >& out)
{
   const PopIndex k = layout.pop_of(u);
   std::size_t v = self_loops ? u : u + 1;
   out.resize(layout.total() - v);
   std::size_t n = 0;
   for(PopIndex i = k; i < layout.k(); ++i) {
      const std::size_t end = layout.global(i, 0) + layout.size(i);
      const double p = sbm.w(k, i);
      if(p >= 1.0) {
         for(; v < end; ++v) out[n++] = v;
         continue;
      }
      // rng() < p 2^64, branch-free
      const auto threshold = static_cast< std::uint64_t >(std::ldexp(p, 64));
      for(; v < end; ++v) {
         out[n] = v;
         n += rng() < threshold ? 1 : 0;
      }
   }
   out.resize(n);
}

}  // namespace detail

/// Samples the step-`step` graph: every unordered pair of distinct agents from
/// blocks k, i is connected with probability W(k,i); self-pairs with W(k,k).
inline Adjacency sample_adjacency(
   const SbmModel& sbm, std::uint64_t seed, std::uint64_t step = 0, bool self_loops = true, const Execution& exec = {})
{
   if(! sbm.has_sizes()) throw std::invalid_argument("sample_adjacency: population sizes required");
   Adjacency adj{AgentLayout(sbm.sizes()), {}};
   const std::size_t n = adj.layout.total();
   std::vector< std::vector< std::size_t > > upper(n);
   parallel_for(n, exec, [&](std::size_t u) {
      auto rng = detail::agent_stream(seed, step, detail::kTagGraph, u);
      detail::sample_upper_row(sbm, adj.layout, u, self_loops, rng, upper[u]);
   });
   adj.neighbors.assign(n, {});
   for(std::size_t u = 0; u < n; ++u)
      for(std::size_t v : upper[u]) {
         adj.neighbors[u].push_back(v);
         if(v != u) adj.neighbors[v].push_back(u);
      }
   return adj;
}

/// z-tilde(s) = (1/K) sum_i (1/N_i) #{neighbors j in population i with state s}.
inline ImpactVector neighbor_impact(const Adjacency& adj, const AgentStates& states, PopIndex k, std::size_t l, std::size_t n_states)
{
   if(sizes_of(states) != adj.layout.sizes()) throw std::invalid_argument("neighbor_impact: states do not match adjacency");
   if(k >= states.size() || l >= states[k].size()) throw std::out_of_range("neighbor_impact: agent out of range");
   const std::size_t u = adj.layout.global(k, l);
   std::vector< double > z(n_states, 0.0);
   const double inv_k = 1.0 / static_cast< double >(states.size());
   for(std::size_t v : adj.neighbors[u]) {
      const PopIndex i = adj.layout.pop_of(v);
      const StateIndex s = states[i][adj.layout.local(v)];
      if(s >= n_states) throw std::out_of_range("neighbor_impact: state index out of range");
      z[s] += inv_k / static_cast< double >(states[i].size());
   }
   return ImpactVector(std::move(z));
}

/// Draws every agent's initial state from mu0^k on its own stream.
inline AgentStates initial_agent_states(const SbmModel& sbm, const MeanFieldEnsemble& mu0, std::uint64_t seed)
{
   if(! sbm.has_sizes()) throw std::invalid_argument("initial_agent_states: population sizes required");
   detail::check_shapes(sbm, mu0);
   const AgentLayout layout(sbm.sizes());
   AgentStates states(sbm.k());
   for(PopIndex k = 0; k < sbm.k(); ++k) {
      states[k].resize(sbm.sizes()[k]);
      for(std::size_t l = 0; l < states[k].size(); ++l) {
         Rng rng = Rng::stream(seed, {detail::kTagInit, layout.global(k, l)});
         states[k][l] = sample_index(mu0[k].weights(), rng.uniform());
      }
   }
   return states;
}

/// N-agent GGR-S dynamics on a single path. Step t draws agent u's randomness
/// from streams (seed, t, u, tag), so results do not depend on the thread count.
class GgrsSimulator {
  public:
   GgrsSimulator(
      const GameModel& model,
      const SbmModel& sbm,
      AgentStates initial,
      std::uint64_t seed,
      ImpactMode mode = ImpactMode::marginal,
      bool self_loops = true,
      Execution exec = {},
      std::uint64_t first_step = 0)
       : model_(&model),
         sbm_(&sbm),
         layout_(sizes_of(initial)),
         states_(std::move(initial)),
         seed_(seed),
         mode_(mode),
         self_loops_(self_loops),
         exec_(exec),
         t_(first_step)
   {
      if(states_.size() != sbm.k()) throw std::invalid_argument("GgrsSimulator: states have wrong number of populations");
      if(sbm.has_sizes() && sbm.sizes() != layout_.sizes())
         throw std::invalid_argument("GgrsSimulator: states do not match the configured sizes");
      for(const auto& pop : states_)
         for(auto s : pop)
            if(s >= model.n_states()) throw std::out_of_range("GgrsSimulator: state index out of range");
      const std::size_t n = layout_.total();
      actions_.resize(sbm.k());
      rewards_.resize(sbm.k());
      next_.resize(sbm.k());
      for(PopIndex k = 0; k < sbm.k(); ++k) {
         actions_[k].assign(states_[k].size(), 0);
         rewards_[k].assign(states_[k].size(), 0.0);
         next_[k].assign(states_[k].size(), 0);
      }
      counts_.assign(n * sbm.k() * model.n_states(), 0);
      kk_ = sbm.k();
      ns_ = model.n_states();
      for(PopIndex i = 0; i < kk_; ++i)
         scale_.push_back(1.0 / (static_cast< double >(kk_) * static_cast< double >(layout_.size(i))));
      if(mode_ == ImpactMode::graph) upper_.resize(n);
   }

   /// Advances every agent one step under `profile`.
   void step(const PolicyProfile& profile)
   {
      if(profile.size() != sbm_->k()) throw std::invalid_argument("GgrsSimulator: profile has wrong size");
      for(const auto& p : profile)
         if(p.n_states() != model_->n_states() || p.n_actions() != model_->n_actions())
            throw std::invalid_argument("GgrsSimulator: policy does not match model");
      const std::size_t ns = model_->n_states(), kk = sbm_->k();
      // population state counts n_{i,s}
      pop_counts_.assign(kk * ns, 0);
      for(PopIndex i = 0; i < kk; ++i)
         for(auto s : states_[i]) ++pop_counts_[i * ns + s];

      graph_seed_ = derive_seed(seed_, {t_, detail::kTagGraph});
      dynamics_seed_ = derive_seed(seed_, {t_, detail::kTagDynamics});
      switch(mode_) {
         case ImpactMode::graph: sample_graph_counts(); break;
         case ImpactMode::marginal: sample_marginal_counts(); break;
         case ImpactMode::mean_field: break;
      }
      if(mode_ == ImpactMode::mean_field) {
         mean_field_z_.assign(kk * ns, 0.0);
         for(PopIndex k = 0; k < kk; ++k)
            for(PopIndex i = 0; i < kk; ++i)
               for(StateIndex s = 0; s < ns; ++s)
                  mean_field_z_[k * ns + s] += sbm_->w(k, i) * static_cast< double >(pop_counts_[i * ns + s])
                     / static_cast< double >(layout_.size(i)) / static_cast< double >(kk);
      }

      parallel_for(layout_.total(), exec_, [&](std::size_t u) { advance_agent(u, profile); });
      states_.swap(next_);
      ++t_;
   }

   [[nodiscard]] const AgentStates& states() const noexcept { return states_; }
   /// Actions and rewards of the most recent step (indexed like the pre-step states).
   [[nodiscard]] const std::vector< std::vector< ActionIndex > >& actions() const noexcept { return actions_; }
   [[nodiscard]] const std::vector< std::vector< double > >& rewards() const noexcept { return rewards_; }
   [[nodiscard]] std::uint64_t steps() const noexcept { return t_; }
   [[nodiscard]] const AgentLayout& layout() const noexcept { return layout_; }
   [[nodiscard]] MeanFieldEnsemble ensemble() const { return empirical_ensemble(states_, model_->n_states()); }
   /// Adjacency of the most recent step in graph mode.
   [[nodiscard]] Adjacency last_adjacency() const
   {
      if(mode_ != ImpactMode::graph) throw std::logic_error("GgrsSimulator: no adjacency outside graph mode");
      Adjacency adj{layout_, std::vector< std::vector< std::size_t > >(layout_.total())};
      for(std::size_t u = 0; u < upper_.size(); ++u)
         for(std::size_t v : upper_[u]) {
            adj.neighbors[u].push_back(v);
            if(v != u) adj.neighbors[v].push_back(u);
         }
      return adj;
   }

  private:
   [[nodiscard]] std::size_t count_index(std::size_t u, PopIndex i, StateIndex s) const
   {
      return (u * kk_ + i) * ns_ + s;
   }

   void sample_graph_counts()
   {
      const std::size_t n = layout_.total();
      parallel_for(n, exec_, [&](std::size_t u) {
         auto rng = detail::agent_stream(graph_seed_, u);
         detail::sample_upper_row(*sbm_, layout_, u, self_loops_, rng, upper_[u]);
      });
      std::fill(counts_.begin(), counts_.end(), 0);
      // code[v] = offset of (population of v, state of v) inside a count row
      code_.resize(n);
      for(std::size_t v = 0; v < n; ++v) {
         const PopIndex kv = layout_.pop_of(v);
         code_[v] = kv * ns_ + states_[kv][layout_.local(v)];
      }
      const std::size_t stride = kk_ * ns_;
      for(std::size_t u = 0; u < n; ++u) {
         std::uint32_t* row_u = counts_.data() + u * stride;
         const std::size_t cu = code_[u];
         for(std::size_t v : upper_[u]) {
            ++row_u[code_[v]];
            if(v != u) ++counts_[v * stride + cu];
         }
      }
   }

   void sample_marginal_counts()
   {
      const std::size_t ns = model_->n_states(), kk = sbm_->k();
      // tables[(k*K + i)*S + s] for n_{i,s}; own[(k*S) + s] for n_{k,s} - 1
      tables_.assign(kk * kk * ns, nullptr);
      own_tables_.assign(kk * ns, nullptr);
      for(PopIndex k = 0; k < kk; ++k)
         for(PopIndex i = 0; i < kk; ++i)
            for(StateIndex s = 0; s < ns; ++s) {
               const std::size_t c = pop_counts_[i * ns + s];
               tables_[(k * kk + i) * ns + s] = &cache_.get(c, sbm_->w(k, i));
               if(i == k && c > 0) own_tables_[k * ns + s] = &cache_.get(c - 1, sbm_->w(k, k));
            }
      parallel_for(layout_.total(), exec_, [&](std::size_t u) {
         auto rng = detail::agent_stream(graph_seed_, u);
         const PopIndex k = layout_.pop_of(u);
         const StateIndex su = states_[k][layout_.local(u)];
         for(PopIndex i = 0; i < kk; ++i)
            for(StateIndex s = 0; s < ns; ++s) {
               const AliasTable* tab
                  = (! self_loops_ && i == k && s == su) ? own_tables_[k * ns + s] : tables_[(k * kk + i) * ns + s];
               counts_[count_index(u, i, s)] = static_cast< std::uint32_t >(tab->sample(rng()));
            }
      });
   }

   void advance_agent(std::size_t u, const PolicyProfile& profile)
   {
      thread_local std::vector< double > z, row;
      const std::size_t ns = ns_, kk = kk_;
      const PopIndex k = layout_.pop_of(u);
      const std::size_t l = layout_.local(u);
      z.resize(ns);
      if(mode_ == ImpactMode::mean_field) {
         std::copy_n(mean_field_z_.begin() + static_cast< std::ptrdiff_t >(k * ns), ns, z.begin());
      } else {
         std::fill(z.begin(), z.end(), 0.0);
         const std::uint32_t* c = counts_.data() + u * kk * ns;
         for(PopIndex i = 0; i < kk; ++i, c += ns)
            for(StateIndex s = 0; s < ns; ++s) z[s] += static_cast< double >(c[s]) * scale_[i];
      }
      auto rng = detail::agent_stream(dynamics_seed_, u);
      const StateIndex s = states_[k][l];
      const ActionIndex a = sample_index(profile[k].row(s), rng.uniform());
      row.resize(ns);
      model_->transition_into(s, a, z, row);
      actions_[k][l] = a;
      rewards_[k][l] = model_->reward(k, s, a, z);
      next_[k][l] = sample_index(row, rng.uniform());
   }

   const GameModel* model_;
   const SbmModel* sbm_;
   AgentLayout layout_;
   AgentStates states_;
   AgentStates next_;
   std::vector< std::vector< ActionIndex > > actions_;
   std::vector< std::vector< double > > rewards_;
   std::uint64_t seed_;
   ImpactMode mode_;
   bool self_loops_;
   Execution exec_;
   std::uint64_t t_;
   std::uint64_t graph_seed_ = 0;
   std::uint64_t dynamics_seed_ = 0;
   std::size_t kk_ = 0;
   std::size_t ns_ = 0;
   std::vector< double > scale_;
   std::vector< std::size_t > code_;
   std::vector< std::size_t > pop_counts_;
   std::vector< std::uint32_t > counts_;
   std::vector< std::vector< std::size_t > > upper_;
   std::vector< double > mean_field_z_;
   BinomialTableCache cache_;
   std::vector< const AliasTable* > tables_;
   std::vector< const AliasTable* > own_tables_;
};

struct StepResult {
   AgentStates states;
   std::vector< std::vector< ActionIndex > > actions;
   std::vector< std::vector< double > > rewards;
   Adjacency adjacency;
};

/// One GGR-S step with a freshly sampled graph.
inline StepResult step_dynamics(
   const GameModel& model,
   const SbmModel& sbm,
   const AgentStates& states,
   const PolicyProfile& profile,
   std::uint64_t seed,
   std::uint64_t step = 0,
   bool self_loops = true,
   const Execution& exec = {})
{
   GgrsSimulator sim(model, sbm, states, seed, ImpactMode::graph, self_loops, exec, step);
   sim.step(profile);
   return {sim.states(), sim.actions(), sim.rewards(), sim.last_adjacency()};
}

/// Learning-rate schedule for CTD.
///  - practical:   beta_n = (2 / (1 - gamma)) / (n + t0 - 1)
///  - theoretical: beta_n = 2 / (4 (1+gamma)^2 / ((1-gamma) d z) + (1-gamma) d z (n - 1)),
///                 d = delta'_mix, z = zeta
///  - constant:    beta_n = value
/// n starts at 1.
struct CtdSchedule {
   enum class Kind { practical, theoretical, constant };
   Kind kind = Kind::practical;
   double t0 = 100.0;
   double delta_mix = 0.0;
   double zeta = 0.0;
   double value = 0.0;

   bool operator==(const CtdSchedule&) const = default;

   static CtdSchedule practical(double t0) { return {Kind::practical, t0, 0.0, 0.0, 0.0}; }
   static CtdSchedule theoretical(double delta_mix, double zeta) { return {Kind::theoretical, 100.0, delta_mix, zeta, 0.0}; }
   static CtdSchedule constant(double value) { return {Kind::constant, 100.0, 0.0, 0.0, value}; }

   void validate() const
   {
      switch(kind) {
         case Kind::practical:
            if(! (t0 >= 1.0)) throw std::invalid_argument("CtdSchedule: t0 must be >= 1");
            break;
         case Kind::theoretical:
            if(! (delta_mix > 0.0) || ! (zeta > 0.0))
               throw std::invalid_argument("CtdSchedule: theoretical schedule needs delta_mix > 0 and zeta > 0");
            break;
         case Kind::constant:
            if(! (value >= 0.0) || ! std::isfinite(value)) throw std::invalid_argument("CtdSchedule: value must be >= 0");
            break;
      }
   }

   [[nodiscard]] double beta(std::size_t n, double gamma) const
   {
      const double nd = static_cast< double >(n);
      switch(kind) {
         case Kind::practical: return (2.0 / (1.0 - gamma)) / (nd + t0 - 1.0);
         case Kind::theoretical: {
            const double dz = delta_mix * zeta;
            return 2.0 / (4.0 * (1.0 + gamma) * (1.0 + gamma) / ((1.0 - gamma) * dz) + (1.0 - gamma) * dz * (nd - 1.0));
         }
         case Kind::constant: return value;
      }
      return 0.0;
   }
};

inline std::string to_string(CtdSchedule::Kind k)
{
   switch(k) {
      case CtdSchedule::Kind::practical: return "practical";
      case CtdSchedule::Kind::theoretical: return "theoretical";
      case CtdSchedule::Kind::constant: return "constant";
   }
   return "?";
}

inline CtdSchedule::Kind schedule_kind_from_string(const std::string& s)
{
   if(s == "practical") return CtdSchedule::Kind::practical;
   if(s == "theoretical") return CtdSchedule::Kind::theoretical;
   if(s == "constant") return CtdSchedule::Kind::constant;
   throw std::invalid_argument("unknown schedule kind: " + s);
}

struct GgrsConfig {
   std::size_t i_ctd = 500;
   std::size_t i_mix = 200;
   std::size_t m = 50;
   CtdSchedule schedule{};
   std::uint64_t seed = 0;
   ImpactMode impact = ImpactMode::marginal;
   bool self_loops = true;
   std::size_t representative = 0;  ///< local index l of the observed agent in each population
   Execution exec{};

   void validate() const
   {
      if(i_mix < 2) throw std::invalid_argument("GgrsConfig: i_mix must be >= 2");
      schedule.validate();
   }
};

/// F-tilde(Q, omega) at (s,a): Q(s,a) - r - h(pi(s)) - gamma Q(s',a'). Zero elsewhere.
struct TdUpdate {
   StateIndex s;
   ActionIndex a;
   double value;
};

inline TdUpdate stochastic_td(const QTable& q, const Observation& w, const Policy& pi, double gamma, const Regularizer& h)
{
   return {w.s, w.a, q(w.s, w.a) - w.r - h(pi.row(w.s)) - gamma * q(w.s_next, w.a_next)};
}

struct CtdResult {
   std::vector< QTable > q;  ///< one table per population
   std::size_t updates = 0;
};

/// CTD on an existing path: I_ctd rounds of I_mix dynamics steps, each followed
/// by one TD update per population from its representative agent's last
/// transition, Q-tilde_{n+1} = clip(Q-tilde_n - beta_n F-tilde).
inline CtdResult ctd_learn(GgrsSimulator& sim, const GameModel& model, const PolicyProfile& profile, const GgrsConfig& cfg)
{
   cfg.validate();
   const std::size_t kk = profile.size();
   for(PopIndex k = 0; k < kk; ++k)
      if(cfg.representative >= sim.layout().size(k)) throw std::invalid_argument("ctd_learn: representative index out of range");
   const double bound = model.q_bound();
   const double gamma = model.discount();
   CtdResult res;
   res.q.assign(kk, QTable(model.n_states(), model.n_actions(), bound));
   const std::size_t l = cfg.representative;
   std::vector< Observation > obs(kk);
   for(std::size_t n = 1; n <= cfg.i_ctd; ++n) {
      for(std::size_t t = 1; t <= cfg.i_mix; ++t) {
         if(t == cfg.i_mix - 1)
            for(PopIndex k = 0; k < kk; ++k) obs[k].s = sim.states()[k][l];
         sim.step(profile);
         if(t == cfg.i_mix - 1)
            for(PopIndex k = 0; k < kk; ++k) {
               obs[k].a = sim.actions()[k][l];
               obs[k].r = sim.rewards()[k][l];
               obs[k].s_next = sim.states()[k][l];
            }
         if(t == cfg.i_mix)
            for(PopIndex k = 0; k < kk; ++k) obs[k].a_next = sim.actions()[k][l];
      }
      const double beta = cfg.schedule.beta(n, gamma);
      for(PopIndex k = 0; k < kk; ++k) {
         const TdUpdate f = stochastic_td(res.q[k], obs[k], profile[k], gamma, model.regularizer());
         double& v = res.q[k](f.s, f.a);
         v = std::clamp(v - beta * f.value, -bound, bound);
      }
      res.updates = n;
   }
   return res;
}

/// Convenience form starting a fresh path from `states`.
inline CtdResult ctd_learn(
   const GameModel& model, const SbmModel& sbm, const AgentStates& states, const PolicyProfile& profile, const GgrsConfig& cfg,
   AgentStates* final_states = nullptr)
{
   GgrsSimulator sim(model, sbm, states, cfg.seed, cfg.impact, cfg.self_loops, cfg.exec);
   CtdResult res = ctd_learn(sim, model, profile, cfg);
   if(final_states) *final_states = sim.states();
   return res;
}

struct PmaCtdRecord {
   std::size_t iteration = 0;
   double delta_pi = 0.0;
   std::optional< double > distance_to_reference;
   std::optional< double > exploitability;
   std::vector< QTable > q;  ///< Q-tilde snapshot that produced this iterate
};

struct PmaCtdHooks {
   std::optional< PolicyProfile > reference;
   std::function< double(const PolicyProfile&) > exploitability;
   bool keep_q = true;
};

struct PmaCtdResult {
   PolicyProfile profile;
   std::vector< PolicyProfile > history;  ///< pi_0 .. pi_M
   std::vector< PmaCtdRecord > trace;     ///< record 0 describes pi_0
   AgentStates states;                    ///< agent states at the end of the path
   std::uint64_t steps = 0;
};

/// M outer iterations of {CTD on the shared path; per-population PMA step on Q-tilde}.
/// Agent states are never reset; the step counter runs across all iterations.
inline PmaCtdResult pma_ctd(
   const GameModel& model,
   const SbmModel& sbm,
   const AgentStates& initial_states,
   const PolicyProfile& pi0,
   const GgrsConfig& cfg,
   const PmaConfig& pma,
   const PmaCtdHooks& hooks = {})
{
   cfg.validate();
   pma.validate();
   if(pi0.size() != sbm.k()) throw std::invalid_argument("pma_ctd: profile has wrong number of populations");
   GgrsSimulator sim(model, sbm, initial_states, cfg.seed, cfg.impact, cfg.self_loops, cfg.exec);
   PmaCtdResult res;
   res.profile = pi0;
   res.history.push_back(pi0);
   auto record = [&](std::size_t m, double delta, std::vector< QTable > q) {
      PmaCtdRecord r;
      r.iteration = m;
      r.delta_pi = delta;
      if(hooks.reference) r.distance_to_reference = policy_distance(res.profile, *hooks.reference);
      if(hooks.exploitability) r.exploitability = hooks.exploitability(res.profile);
      if(hooks.keep_q) r.q = std::move(q);
      res.trace.push_back(std::move(r));
   };
   record(0, 0.0, {});
   for(std::size_t m = 1; m <= cfg.m; ++m) {
      CtdResult ctd = ctd_learn(sim, model, res.profile, cfg);
      PolicyProfile next;
      next.reserve(sbm.k());
      for(PopIndex k = 0; k < sbm.k(); ++k) next.push_back(pma_step(ctd.q[k], res.profile[k], pma, model.regularizer()));
      const double delta = policy_distance(next, res.profile);
      res.profile = std::move(next);
      res.history.push_back(res.profile);
      record(m, delta, std::move(ctd.q));
   }
   res.states = sim.states();
   res.steps = sim.steps();
   return res;
}

}  // namespace mpmfg

#endif  // MPMFG_GGRS_HPP
