#ifndef MPMFG_ACCEPTANCE_HPP
#define MPMFG_ACCEPTANCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mpmfg/mpmfg.hpp"

namespace mpmfg::acceptance {

struct Outcome {
   bool pass = false;
   std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double x)
{
   char buf[64];
   std::snprintf(buf, sizeof(buf), f, x);
   return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
   return std::chrono::duration< double >(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector< double > v)
{
   std::sort(v.begin(), v.end());
   const std::size_t n = v.size();
   return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// R^2 of the least-squares line through (x_i, y_i).
inline double r_squared(const std::vector< double >& x, const std::vector< double >& y)
{
   const double n = static_cast< double >(x.size());
   double mx = 0, my = 0;
   for(std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
   }
   mx /= n;
   my /= n;
   double sxy = 0, sxx = 0, syy = 0;
   for(std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
   }
   if(syy == 0.0) return 1.0;
   return sxy * sxy / (sxx * syy);
}

inline PmaConfig pma(const GameModel& m, double eta)
{
   PmaConfig c;
   c.eta = eta;
   c.l_h = default_l_h(m);
   return c;
}

/// Plain fixed-point iteration of q = R + gamma P (q' + h) summed against pi.
inline std::vector< double > q_by_iteration(const TabularMdp& mdp, const Policy& pi, const Regularizer& h)
{
   const std::size_t ns = mdp.n_states, na = mdp.n_actions;
   std::vector< double > q(ns * na, 0.0), next(ns * na), v(ns);
   for(int it = 0; it < 100000; ++it) {
      for(StateIndex s = 0; s < ns; ++s) {
         double acc = h(pi.row(s));
         for(ActionIndex a = 0; a < na; ++a) acc += pi(s, a) * q[s * na + a];
         v[s] = acc;
      }
      double change = 0.0;
      for(StateIndex s = 0; s < ns; ++s)
         for(ActionIndex a = 0; a < na; ++a) {
            double ev = 0.0;
            for(StateIndex t = 0; t < ns; ++t) ev += mdp.transition[(s * na + a) * ns + t] * v[t];
            next[s * na + a] = mdp.reward[s * na + a] + mdp.discount * ev;
            change = std::max(change, std::abs(next[s * na + a] - q[s * na + a]));
         }
      q.swap(next);
      if(change < 1e-14) break;
   }
   return q;
}

inline std::vector< double > random_simplex(std::size_t n, Rng& rng)
{
   std::vector< double > w(n);
   double s = 0.0;
   for(auto& x : w) {
      x = -std::log(1.0 - rng.uniform());
      s += x;
   }
   for(auto& x : w) x /= s;
   return w;
}

/// Brute-force maximizer of <u,q> + h(u) - |u - prev|^2/(2 eta) over
/// {h(u) >= floor}: a coarse simplex grid, then a fine grid around the best point.
inline std::vector< double > grid_argmax(
   const std::vector< double >& q, const std::vector< double >& prev, double eta, const Regularizer& h, double floor)
{
   const std::size_t n = q.size();
   std::vector< double > best(n);
   double best_f = -std::numeric_limits< double >::infinity();
   auto consider = [&](const std::vector< double >& cand) {
      if(h(cand) < floor) return;
      const double f = pma_objective(q, prev, cand, eta, h);
      if(f > best_f) {
         best_f = f;
         best = cand;
      }
   };
   auto scan = [&](const std::vector< double >& centre, double half, double step) {
      const long m = static_cast< long >(std::llround(half / step));
      if(n == 2) {
         for(long i = -m; i <= m; ++i) {
            const double t = centre[0] + static_cast< double >(i) * step;
            if(t < 0.0 || t > 1.0) continue;
            consider({t, 1.0 - t});
         }
         return;
      }
      for(long i = -m; i <= m; ++i)
         for(long j = -m; j <= m; ++j) {
            const double a = centre[0] + static_cast< double >(i) * step;
            const double b = centre[1] + static_cast< double >(j) * step;
            const double c = 1.0 - a - b;
            if(a < 0.0 || b < 0.0 || c < -1e-15) continue;
            consider({a, b, std::max(c, 0.0)});
         }
   };
   // each level re-centres until its best point stops moving: the objective
   // can be a long flat valley near the simplex boundary
   auto settle = [&](double half, double step) {
      for(int r = 0; r < 200; ++r) {
         const auto before = best;
         scan(before, half, step);
         if(best == before) break;
      }
   };
   if(n == 2) {
      scan({0.5, 0.5}, 0.5, 1e-4);
      settle(2e-4, 1e-7);
   } else {
      scan({0.5, 0.5, 0.0}, 0.5, 5e-3);
      settle(0.01, 1e-4);
      settle(2e-4, 2e-6);
      settle(4e-6, 4e-8);
   }
   return best;
}

}  // namespace detail

// --------------------------------------------------------------------------

inline epidemic::Benchmark exact_benchmark() { return epidemic::build(1.0, 0.95); }

inline Outcome criterion_1_2_3(int which)
{
   const auto b = exact_benchmark();
   const PmaConfig cfg = detail::pma(b.model, kEtaExact);
   const auto t0 = std::chrono::steady_clock::now();
   const ExactSolution sol = solve_exact(b.model, b.sbm, u_max_profile(b.model, 3), cfg, 0.002, 500);
   const double secs = detail::seconds_since(t0);
   if(which == 1) {
      const PolicyProfile next = gamma_eta(b.model, b.sbm, sol.profile, cfg);
      const double residual = policy_distance(next, sol.profile);
      const double expl = evaluate_profile(b.model, b.sbm, sol.profile).exploitability_max;
      const bool ok = sol.converged && sol.iterations <= 500 && residual <= 0.004 && expl <= 1e-3 && secs < 60.0;
      return {ok, "iterations=" + std::to_string(sol.iterations) + " residual=" + detail::fmt("%.3g", residual)
                     + " exploitability=" + detail::fmt("%.3g", expl) + " time=" + detail::fmt("%.2fs", secs)};
   }
   if(which == 2) {
      std::vector< double > x, y;
      for(std::size_t t = 5; t < sol.delta_pi.size(); ++t) {
         x.push_back(static_cast< double >(t + 1));
         y.push_back(std::log(sol.delta_pi[t]));
      }
      if(x.size() < 3) return {false, "too few post-burn-in iterations (" + std::to_string(x.size()) + ")"};
      const double r2 = detail::r_squared(x, y);
      return {r2 >= 0.9, "R^2=" + detail::fmt("%.4f", r2) + " over " + std::to_string(x.size()) + " iterations"};
   }
   bool ok = true;
   std::string d;
   for(StateIndex s = 0; s < 2; ++s) {
      const double p1 = sol.profile[0](s, epidemic::kMask), p2 = sol.profile[1](s, epidemic::kMask),
                   p3 = sol.profile[2](s, epidemic::kMask);
      // in S the next state ignores the action, so the three rows agree up to rounding
      ok = ok && p1 <= p2 + 1e-12 && p2 <= p3 + 1e-12;
      d += std::string(s == 0 ? "H" : " S") + ": " + detail::fmt("%.4f", p1) + " <= " + detail::fmt("%.4f", p2) + " <= "
           + detail::fmt("%.4f", p3);
   }
   return {ok, d};
}

inline Outcome criterion_4()
{
   const auto b = exact_benchmark();
   const ExactSolution ref = solve_exact(b.model, b.sbm, u_max_profile(b.model, 3), detail::pma(b.model, kEtaExact), 1e-10, 100000);
   const PmaConfig cfg = detail::pma(b.model, kEtaOracle);
   const SimulatorOracle oracle(b.model);
   const auto t0 = std::chrono::steady_clock::now();
   std::vector< double > dist;
   std::size_t converged = 0;
   for(std::uint64_t seed = 0; seed < 5; ++seed) {
      SimulatorSettings s;
      s.n_per_pair = 100;
      s.eps_pi = 0.002;
      s.seed = seed;
      const SimulatorSolution sol = simulator_pma(oracle, b.sbm, u_max_profile(b.model, 3), cfg, s);
      converged += sol.converged ? 1 : 0;
      dist.push_back(policy_distance(sol.profile, ref.profile));
   }
   const double secs = detail::seconds_since(t0);
   const double med = detail::median(dist);
   // sampling noise keeps delta_pi above eps_pi, so runs may end at max_outer
   return {med <= 0.1 && secs < 300.0,
           "median distance=" + detail::fmt("%.4f", med) + " converged=" + std::to_string(converged) + "/5"
              + " time=" + detail::fmt("%.1fs", secs)};
}

inline Outcome criterion_5()
{
   const auto b = epidemic::build(1.0, 0.95, {50, 50, 50});
   const std::size_t reps = 10000;
   std::size_t worst_cfg = 0, failures = 0;
   double worst = 0.0;
   for(std::size_t c = 0; c < 10; ++c) {
      Rng rng = Rng::stream(5, {c});
      AgentStates states(3);
      for(auto& pop : states) {
         const double p_sick = rng.uniform();
         for(std::size_t l = 0; l < 50; ++l) pop.push_back(rng.bernoulli(p_sick) ? epidemic::kSick : epidemic::kHealthy);
      }
      const MeanFieldEnsemble mu = empirical_ensemble(states, 2);
      std::vector< double > sum(3 * 2, 0.0), sq(3 * 2, 0.0);
      for(std::size_t r = 0; r < reps; ++r) {
         const Adjacency adj = sample_adjacency(b.sbm, derive_seed(5, {c}), r);
         for(PopIndex k = 0; k < 3; ++k) {
            const ImpactVector z = neighbor_impact(adj, states, k, 0, 2);
            for(StateIndex s = 0; s < 2; ++s) {
               sum[k * 2 + s] += z[s];
               sq[k * 2 + s] += z[s] * z[s];
            }
         }
      }
      for(PopIndex k = 0; k < 3; ++k) {
         const ImpactVector target = aggregated_impact(b.sbm, mu, k);
         for(StateIndex s = 0; s < 2; ++s) {
            const double n = static_cast< double >(reps);
            const double mean = sum[k * 2 + s] / n;
            const double var = std::max(sq[k * 2 + s] / n - mean * mean, 0.0) * n / (n - 1.0);
            const double se = std::sqrt(var / n);
            const double zscore = se > 0.0 ? std::abs(mean - target[s]) / se : (mean == target[s] ? 0.0 : 1e300);
            if(zscore > 3.0) ++failures;
            if(zscore > worst) {
               worst = zscore;
               worst_cfg = c;
            }
         }
      }
   }
   return {failures == 0,
           "60 comparisons, max |mean-target|/SE=" + detail::fmt("%.2f", worst) + " (configuration " + std::to_string(worst_cfg)
              + "), exceedances=" + std::to_string(failures)};
}

inline Outcome criterion_6()
{
   const auto b = epidemic::build(0.5, 0.95);
   const auto t0 = std::chrono::steady_clock::now();
   const auto rows = deviation_curve(b.model, b.sbm, {{50, 50, 50}, {500, 500, 500}}, u_max_profile(b.model, 3), 200, 20, 6);
   const double secs = detail::seconds_since(t0);
   const double ratio = rows[0].mean / rows[1].mean;
   return {ratio >= 2.0 && secs < 600.0,
           "mean max-deviation N=50: " + detail::fmt("%.4f", rows[0].mean) + ", N=500: " + detail::fmt("%.4f", rows[1].mean)
              + ", ratio=" + detail::fmt("%.2f", ratio) + " time=" + detail::fmt("%.1fs", secs)};
}

inline Outcome criterion_7()
{
   const auto b = epidemic::build(0.5, 0.95, {500, 500, 500});
   const PolicyProfile pi = u_max_profile(b.model, 3);
   const auto fp = gamma_pop_inf(b.model, b.sbm, pi);
   std::vector< QTable > truth;
   for(PopIndex k = 0; k < 3; ++k) truth.push_back(exact_Q(b.model, b.sbm, pi, fp.ensemble, k));
   auto error = [&](std::size_t i_ctd, std::uint64_t seed) {
      GgrsConfig cfg;
      cfg.i_ctd = i_ctd;
      cfg.i_mix = 200;
      cfg.seed = seed;
      const AgentStates init = initial_agent_states(b.sbm, uniform_ensemble(3, 2), seed);
      const CtdResult res = ctd_learn(b.model, b.sbm, init, pi, cfg);
      double e = 0.0;
      for(PopIndex k = 0; k < 3; ++k)
         for(std::size_t i = 0; i < truth[k].flat().size(); ++i) e = std::max(e, std::abs(res.q[k].flat()[i] - truth[k].flat()[i]));
      return e;
   };
   std::vector< double > e50, e500;
   for(std::uint64_t seed = 0; seed < 10; ++seed) {
      e50.push_back(error(50, seed));
      e500.push_back(error(500, seed));
   }
   const double m50 = detail::median(e50), m500 = detail::median(e500);
   return {m500 < m50, "median sup-norm error I_ctd=50: " + detail::fmt("%.3f", m50) + ", I_ctd=500: " + detail::fmt("%.3f", m500)};
}

inline Outcome criterion_8()
{
   const auto base = epidemic::build(0.5, 0.95);
   const PmaConfig cfg = detail::pma(base.model, kEtaGgrs);
   const ExactSolution ref = solve_exact(base.model, base.sbm, u_max_profile(base.model, 3), cfg, 1e-10, 100000);
   PmaCtdHooks hooks;
   hooks.reference = ref.profile;
   hooks.keep_q = false;
   hooks.exploitability = [&](const PolicyProfile& p) { return evaluate_profile(base.model, base.sbm, p).exploitability_max; };
   std::vector< double > final_dist[2];
   bool decreased = true;
   std::string expl_detail;
   const std::size_t sizes[2] = {50, 500};
   for(int si = 0; si < 2; ++si) {
      const SbmModel sbm = base.sbm.with_sizes({sizes[si], sizes[si], sizes[si]});
      for(std::uint64_t seed = 0; seed < 5; ++seed) {
         GgrsConfig g;
         g.seed = seed;
         const AgentStates init = initial_agent_states(sbm, uniform_ensemble(3, 2), seed);
         const PmaCtdResult res = pma_ctd(base.model, sbm, init, u_max_profile(base.model, 3), g, cfg, hooks);
         final_dist[si].push_back(*res.trace.back().distance_to_reference);
         const double e1 = *res.trace[1].exploitability, em = *res.trace.back().exploitability;
         decreased = decreased && em < e1;
         expl_detail += " " + std::to_string(sizes[si]) + "/" + std::to_string(seed) + ":" + detail::fmt("%.3f", e1) + "->"
                        + detail::fmt("%.3f", em);
      }
   }
   const double m50 = detail::median(final_dist[0]), m500 = detail::median(final_dist[1]);
   return {m500 < m50 && decreased,
           "median final distance N=50: " + detail::fmt("%.4f", m50) + ", N=500: " + detail::fmt("%.4f", m500)
              + "; exploitability iteration 1 -> M:" + expl_detail};
}

inline Outcome criterion_9()
{
   // (a) exact_q against plain fixed-point iteration on random affine games
   double worst_q = 0.0;
   for(std::uint64_t g = 0; g < 20; ++g) {
      Rng rng = Rng::stream(9, {0, g});
      const std::size_t ns = 2 + g % 4, na = 2 + g % 2, kk = 2;
      std::vector< double > base(ns * na * ns), slope(ns * na * ns), reward(kk * ns * na), r_slope(kk * ns * na);
      for(std::size_t i = 0; i < ns * na; ++i) {
         const auto row = detail::random_simplex(ns, rng);
         std::copy(row.begin(), row.end(), base.begin() + static_cast< std::ptrdiff_t >(i * ns));
         // move mass from state 0 to state 1 in proportion to z_0
         const double c = 0.5 * row[0];
         slope[i * ns] = -c;
         slope[i * ns + 1] = c;
      }
      for(auto& r : reward) r = rng.uniform() * 2.0 - 1.0;
      for(auto& r : r_slope) r = rng.uniform();
      auto transition = [=](StateIndex s, ActionIndex a, std::span< const double > z, std::span< double > out) {
         for(StateIndex t = 0; t < ns; ++t) out[t] = base[(s * na + a) * ns + t] + slope[(s * na + a) * ns + t] * z[0];
      };
      auto rew = [=](PopIndex k, StateIndex s, ActionIndex a, std::span< const double > z) {
         return reward[(k * ns + s) * na + a] + r_slope[(k * ns + s) * na + a] * z[0];
      };
      const double gamma = 0.5 + 0.45 * rng.uniform();
      const Regularizer h = g % 3 == 0 ? Regularizer::neg_sq_l2(rng.uniform()) : Regularizer::entropy(rng.uniform());
      const GameModel model(FiniteSpace(ns), FiniteSpace(na), transition, rew, gamma, {-1.0, 2.0}, h);
      const double w01 = 0.2 + 0.6 * rng.uniform();
      const SbmModel sbm({{0.3 + 0.7 * rng.uniform(), w01}, {w01, 0.3 + 0.7 * rng.uniform()}});
      PolicyProfile profile;
      MeanFieldEnsemble mu;
      for(PopIndex k = 0; k < kk; ++k) {
         std::vector< std::vector< double > > rows;
         for(StateIndex s = 0; s < ns; ++s) rows.push_back(detail::random_simplex(na, rng));
         profile.push_back(Policy::from_rows(rows));
         mu.emplace_back(detail::random_simplex(ns, rng));
      }
      for(PopIndex k = 0; k < kk; ++k) {
         // oracle builds z and the frozen MDP by hand
         std::vector< double > z(ns, 0.0);
         for(PopIndex i = 0; i < kk; ++i)
            for(StateIndex s = 0; s < ns; ++s) z[s] += sbm.w(k, i) * mu[i][s] / static_cast< double >(kk);
         TabularMdp mdp;
         mdp.n_states = ns;
         mdp.n_actions = na;
         mdp.discount = gamma;
         mdp.transition.resize(ns * na * ns);
         mdp.reward.resize(ns * na);
         for(StateIndex s = 0; s < ns; ++s)
            for(ActionIndex a = 0; a < na; ++a) {
               for(StateIndex t = 0; t < ns; ++t)
                  mdp.transition[(s * na + a) * ns + t] = base[(s * na + a) * ns + t] + slope[(s * na + a) * ns + t] * z[0];
               mdp.reward[s * na + a] = reward[(k * ns + s) * na + a] + r_slope[(k * ns + s) * na + a] * z[0];
            }
         const auto oracle = detail::q_by_iteration(mdp, profile[k], h);
         const QTable q = exact_q(model, sbm, profile, mu, k);
         for(std::size_t i = 0; i < oracle.size(); ++i) worst_q = std::max(worst_q, std::abs(oracle[i] - q.flat()[i]));
      }
   }

   // (b) pma_step against brute-force search
   double worst_pma = 0.0;
   for(std::uint64_t c = 0; c < 200; ++c) {
      Rng rng = Rng::stream(9, {1, c});
      const std::size_t na = 2 + c % 2;
      const Regularizer h = c % 4 == 3 ? Regularizer::neg_sq_l2(0.1 + rng.uniform()) : Regularizer::entropy(0.05 + rng.uniform());
      std::vector< double > q(na);
      for(auto& x : q) x = 4.0 * rng.uniform() - 2.0;
      const auto prev = detail::random_simplex(na, rng);
      PmaConfig cfg;
      cfg.eta = std::exp(std::log(0.05) + rng.uniform() * std::log(100.0));
      // every fifth case makes the admissible-set constraint bind
      if(c % 5 == 0) cfg.l_h = h.h_max(na) * (0.2 + 0.5 * rng.uniform());
      const QTable qt(1, na, q);
      const Policy pi(1, na, prev);
      const Policy got = pma_step(qt, pi, cfg, h);
      const double floor = std::isfinite(cfg.l_h) ? h.h_max(na) - cfg.l_h : -std::numeric_limits< double >::infinity();
      const auto want = detail::grid_argmax(q, prev, cfg.eta, h, floor);
      worst_pma = std::max(worst_pma, l1_distance(got.row(0), want));
   }

   // (c) deterministic kernels are recovered exactly
   bool kernel_exact = true;
   {
      auto transition = [](StateIndex s, ActionIndex a, std::span< const double >, std::span< double > out) {
         std::fill(out.begin(), out.end(), 0.0);
         out[(s + a + 1) % out.size()] = 1.0;
      };
      auto rew = [](PopIndex, StateIndex s, ActionIndex a, std::span< const double >) { return static_cast< double >(s) - static_cast< double >(a); };
      const GameModel model(FiniteSpace(4), FiniteSpace(3), transition, rew, 0.9, {-2.0, 3.0}, Regularizer::entropy(0.1));
      const SimulatorOracle oracle(model);
      for(std::size_t n : {1, 7, 100}) {
         const EmpiricalKernel kernel = estimate_kernel(oracle, 0, ImpactVector(std::vector< double >(4, 0.1)), n, 9);
         for(StateIndex s = 0; s < 4; ++s)
            for(ActionIndex a = 0; a < 3; ++a)
               for(StateIndex t = 0; t < 4; ++t)
                  kernel_exact = kernel_exact && kernel.probability(s, a, t) == (t == (s + a + 1) % 4 ? 1.0 : 0.0);
      }
   }
   return {worst_q <= 1e-8 && worst_pma <= 1e-3 && kernel_exact,
           "(a) max |q - oracle|=" + detail::fmt("%.2e", worst_q) + " (b) max L1 to grid=" + detail::fmt("%.2e", worst_pma)
              + " (c) deterministic kernel " + (kernel_exact ? "exact" : "NOT exact")};
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p)
{
   std::ifstream in(p, std::ios::binary);
   return {std::istreambuf_iterator< char >(in), std::istreambuf_iterator< char >()};
}

}  // namespace detail

inline Outcome criterion_10()
{
   std::vector< ExperimentConfig > configs;
   {
      ExperimentConfig c;
      c.mode = RunMode::exact;
      c.seed = 3;
      configs.push_back(c);
   }
   {
      ExperimentConfig c;
      c.mode = RunMode::oracle;
      c.seed = 3;
      c.n_per_pair = 50;
      configs.push_back(c);
   }
   {
      ExperimentConfig c = config_from_json({{"mode", "ggrs"}, {"seed", 3}});
      c.sizes = {40, 40, 40};
      c.i_ctd = 20;
      c.i_mix = 20;
      c.m = 3;
      configs.push_back(c);
      c.impact = ImpactMode::graph;
      configs.push_back(c);
   }
   {
      ExperimentConfig c;
      c.mode = RunMode::metrics;
      c.seed = 3;
      c.size_settings = {{20, 20, 20}, {60, 60, 60}};
      c.horizon = 20;
      c.n_seeds = 6;
      configs.push_back(c);
   }
   const auto root = std::filesystem::temp_directory_path() / ("mpmfg_acceptance_" + std::to_string(::getpid()));
   std::size_t files = 0;
   std::string mismatch;
   for(std::size_t i = 0; i < configs.size(); ++i) {
      std::vector< std::filesystem::path > dirs;
      const std::size_t thread_counts[3] = {1, 1, 8};
      for(std::size_t r = 0; r < 3; ++r) {
         ExperimentConfig c = configs[i];
         c.threads = thread_counts[r];
         dirs.push_back(root / (std::to_string(i) + "_" + std::to_string(r)));
         run(c, dirs.back());
      }
      for(const auto& entry : std::filesystem::directory_iterator(dirs[0])) {
         const auto name = entry.path().filename();
         const std::string ref = detail::read_file(entry.path());
         ++files;
         for(std::size_t r = 1; r < 3; ++r)
            if(detail::read_file(dirs[r] / name) != ref && mismatch.empty())
               mismatch = to_string(configs[i].mode) + "/" + name.string();
      }
   }
   std::filesystem::remove_all(root);
   return {mismatch.empty(),
           std::to_string(configs.size()) + " configurations, " + std::to_string(files) + " files compared across 2 reruns (threads 1, 1, 8)"
              + (mismatch.empty() ? "" : ", first mismatch: " + mismatch)};
}

// --------------------------------------------------------------------------

inline const char* criterion_name(int i)
{
   static const char* names[] = {"",
                                 "exact-case convergence",
                                 "linear rate of the exact iteration",
                                 "NE ordering across populations",
                                 "simulator-oracle agreement",
                                 "neighbour-impact unbiasedness",
                                 "deviation scaling with N",
                                 "CTD consistency",
                                 "population-size effect on PMA-CTD",
                                 "oracle equivalences",
                                 "determinism"};
   return names[i];
}

inline Outcome run_criterion(int i)
{
   switch(i) {
      case 1:
      case 2:
      case 3: return criterion_1_2_3(i);
      case 4: return criterion_4();
      case 5: return criterion_5();
      case 6: return criterion_6();
      case 7: return criterion_7();
      case 8: return criterion_8();
      case 9: return criterion_9();
      case 10: return criterion_10();
      default: return {false, "no such criterion"};
   }
}

/// Prints one line per criterion; returns 0 when all selected criteria pass.
inline int run_suite(std::vector< int > only, std::ostream& out)
{
   if(only.empty())
      for(int i = 1; i <= 10; ++i) only.push_back(i);
   int failed = 0;
   for(int i : only) {
      Outcome o;
      const auto t0 = std::chrono::steady_clock::now();
      try {
         o = run_criterion(i);
      } catch(const std::exception& e) {
         o = {false, std::string("exception: ") + e.what()};
      }
      if(! o.pass) ++failed;
      out << "criterion " << i << " [" << (o.pass ? "PASS" : "FAIL") << "] " << criterion_name(i) << ": " << o.detail << " ("
          << detail::fmt("%.1fs", detail::seconds_since(t0)) << ")" << std::endl;
   }
   return failed == 0 ? 0 : 1;
}

}  // namespace mpmfg::acceptance

#endif  // MPMFG_ACCEPTANCE_HPP
