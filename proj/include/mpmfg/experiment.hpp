#ifndef MPMFG_EXPERIMENT_HPP
#define MPMFG_EXPERIMENT_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpmfg/epidemic.hpp"
#include "mpmfg/ggrs.hpp"
#include "mpmfg/metrics.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/oracle_sim.hpp"

#ifndef MPMFG_VERSION
#define MPMFG_VERSION "0.0.0"
#endif

namespace mpmfg {

using json = nlohmann::json;

/// Configuration problem tied to one field of the input.
class ConfigError : public std::runtime_error {
  public:
   ConfigError(std::string field, const std::string& message)
       : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message)
   {
   }
   [[nodiscard]] const std::string& field() const noexcept { return field_; }
   [[nodiscard]] const std::string& message() const noexcept { return message_; }
   [[nodiscard]] json to_json() const { return {{"error", {{"field", field_}, {"message", message_}}}}; }

  private:
   std::string field_;
   std::string message_;
};

enum class RunMode { exact, oracle, ggrs, metrics };

inline std::string to_string(RunMode m)
{
   switch(m) {
      case RunMode::exact: return "exact";
      case RunMode::oracle: return "oracle";
      case RunMode::ggrs: return "ggrs";
      case RunMode::metrics: return "metrics";
   }
   return "unknown";
}

inline RunMode run_mode_from_string(const std::string& s)
{
   if(s == "exact") return RunMode::exact;
   if(s == "oracle") return RunMode::oracle;
   if(s == "ggrs") return RunMode::ggrs;
   if(s == "metrics") return RunMode::metrics;
   throw ConfigError("mode", "expected one of exact, oracle, ggrs, metrics; got '" + s + "'");
}

/// "auto" derives L_h from the model's constants, "none" disables the constraint.
struct LhSetting {
   enum class Kind { automatic, none, value };
   Kind kind = Kind::automatic;
   double value = 0.0;

   bool operator==(const LhSetting&) const = default;
};

inline constexpr double kEtaExact = 0.1;
inline constexpr double kEtaOracle = 0.05;
inline constexpr double kEtaGgrs = 0.05;

struct ExperimentConfig {
   RunMode mode = RunMode::exact;
   std::string model = "epidemic";  ///< "epidemic" or "custom"
   std::string model_file;          ///< JSON model description when model == "custom"
   std::uint64_t seed = 0;

   double lambda = 1.0;
   double gamma = epidemic::kDefaultDiscount;
   RegularizerKind regularizer = RegularizerKind::entropy;
   double eta = kEtaExact;
   LhSetting l_h{};
   double eps_pi = 0.002;
   std::size_t max_outer = 500;
   double pop_tol = kDefaultPopTol;
   std::size_t pop_max_iter = kDefaultPopMaxIter;
   std::optional< std::vector< std::vector< double > > > mu0;

   // oracle
   std::size_t n_per_pair = 100;
   double eps_pop = 1e-3;
   double q_tol = 1e-8;

   // ggrs
   std::vector< std::size_t > sizes;
   std::size_t i_ctd = 500;
   std::size_t i_mix = 200;
   std::size_t m = 50;
   CtdSchedule schedule = CtdSchedule::practical(100.0);
   ImpactMode impact = ImpactMode::marginal;
   bool self_loops = true;
   std::size_t representative = 0;

   // metrics
   std::vector< std::vector< std::size_t > > size_settings;
   std::size_t horizon = 200;
   std::size_t n_seeds = 20;
   std::string profile = "uniform";  ///< "uniform" or "exact_ne"
   ImpactMode deviation_impact = ImpactMode::graph;

   // evaluation
   ExploitabilityVariant exploitability = ExploitabilityVariant::frozen;
   double br_tol = kDefaultBrTol;
   bool reference = true;
   double reference_eps_pi = 1e-10;
   std::size_t reference_max_outer = 100000;

   // not part of the result-defining configuration
   std::string output;
   std::size_t threads = 1;

   bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

template < class T >
T get_field(const json& j, const std::string& field)
{
   try {
      return j.get< T >();
   } catch(const json::exception&) {
      throw ConfigError(field, "wrong type (got " + std::string(j.type_name()) + ")");
   }
}

inline double get_number(const json& j, const std::string& field)
{
   if(! j.is_number()) throw ConfigError(field, "expected a number");
   return j.get< double >();
}

inline std::size_t get_count(const json& j, const std::string& field)
{
   if(! j.is_number_integer() || j.get< std::int64_t >() < 0) throw ConfigError(field, "expected a non-negative integer");
   return j.get< std::size_t >();
}

inline void require(bool ok, const std::string& field, const std::string& message)
{
   if(! ok) throw ConfigError(field, message);
}

inline CtdSchedule parse_schedule(const json& j)
{
   if(! j.is_object()) throw ConfigError("schedule", "expected an object");
   CtdSchedule s = CtdSchedule::practical(100.0);
   if(j.contains("kind")) {
      try {
         s.kind = schedule_kind_from_string(get_field< std::string >(j.at("kind"), "schedule.kind"));
      } catch(const std::invalid_argument& e) {
         throw ConfigError("schedule.kind", e.what());
      }
   }
   for(const auto& [key, value] : j.items()) {
      const std::string f = "schedule." + key;
      if(key == "kind") continue;
      if(key == "t0")
         s.t0 = get_number(value, f);
      else if(key == "delta_mix")
         s.delta_mix = get_number(value, f);
      else if(key == "zeta")
         s.zeta = get_number(value, f);
      else if(key == "value")
         s.value = get_number(value, f);
      else
         throw ConfigError(f, "unknown key");
   }
   try {
      s.validate();
   } catch(const std::invalid_argument& e) {
      throw ConfigError("schedule", e.what());
   }
   return s;
}

inline json schedule_to_json(const CtdSchedule& s)
{
   json j = {{"kind", to_string(s.kind)}};
   switch(s.kind) {
      case CtdSchedule::Kind::practical: j["t0"] = s.t0; break;
      case CtdSchedule::Kind::theoretical:
         j["delta_mix"] = s.delta_mix;
         j["zeta"] = s.zeta;
         break;
      case CtdSchedule::Kind::constant: j["value"] = s.value; break;
   }
   return j;
}

inline ImpactMode parse_impact(const json& j, const std::string& field)
{
   try {
      return impact_mode_from_string(get_field< std::string >(j, field));
   } catch(const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
   }
}

}  // namespace detail

/// Parses a configuration object. Mode-dependent defaults are applied before
/// the explicit keys, so an explicit key always wins. Unknown keys are errors.
inline ExperimentConfig config_from_json(const json& j)
{
   using detail::get_count;
   using detail::get_number;
   using detail::require;
   if(! j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
   ExperimentConfig c;
   if(! j.contains("mode")) throw ConfigError("mode", "missing required key");
   c.mode = run_mode_from_string(detail::get_field< std::string >(j.at("mode"), "mode"));
   if(c.mode == RunMode::ggrs) {
      c.lambda = 0.5;
      c.eta = kEtaGgrs;
   } else if(c.mode == RunMode::oracle)
      c.eta = kEtaOracle;

   for(const auto& [key, v] : j.items()) {
      if(key == "mode") continue;
      if(key == "model") {
         c.model = detail::get_field< std::string >(v, key);
         require(c.model == "epidemic" || c.model == "custom", key, "expected 'epidemic' or 'custom'");
      } else if(key == "model_file")
         c.model_file = detail::get_field< std::string >(v, key);
      else if(key == "seed")
         c.seed = detail::get_field< std::uint64_t >(v, key);
      else if(key == "lambda")
         c.lambda = get_number(v, key);
      else if(key == "gamma")
         c.gamma = get_number(v, key);
      else if(key == "regularizer") {
         try {
            c.regularizer = regularizer_kind_from_string(detail::get_field< std::string >(v, key));
         } catch(const std::invalid_argument& e) {
            throw ConfigError(key, e.what());
         }
      } else if(key == "eta")
         c.eta = get_number(v, key);
      else if(key == "l_h") {
         if(v.is_string()) {
            const auto s = v.get< std::string >();
            require(s == "auto" || s == "none", key, "expected a number, 'auto' or 'none'");
            c.l_h.kind = s == "auto" ? LhSetting::Kind::automatic : LhSetting::Kind::none;
         } else {
            c.l_h = {LhSetting::Kind::value, get_number(v, key)};
         }
      } else if(key == "eps_pi")
         c.eps_pi = get_number(v, key);
      else if(key == "max_outer")
         c.max_outer = get_count(v, key);
      else if(key == "pop_tol")
         c.pop_tol = get_number(v, key);
      else if(key == "pop_max_iter")
         c.pop_max_iter = get_count(v, key);
      else if(key == "mu0")
         c.mu0 = detail::get_field< std::vector< std::vector< double > > >(v, key);
      else if(key == "n_per_pair")
         c.n_per_pair = get_count(v, key);
      else if(key == "eps_pop")
         c.eps_pop = get_number(v, key);
      else if(key == "q_tol")
         c.q_tol = get_number(v, key);
      else if(key == "sizes")
         c.sizes = detail::get_field< std::vector< std::size_t > >(v, key);
      else if(key == "i_ctd")
         c.i_ctd = get_count(v, key);
      else if(key == "i_mix")
         c.i_mix = get_count(v, key);
      else if(key == "m")
         c.m = get_count(v, key);
      else if(key == "schedule")
         c.schedule = detail::parse_schedule(v);
      else if(key == "impact")
         c.impact = detail::parse_impact(v, key);
      else if(key == "self_loops")
         c.self_loops = detail::get_field< bool >(v, key);
      else if(key == "representative")
         c.representative = get_count(v, key);
      else if(key == "size_settings")
         c.size_settings = detail::get_field< std::vector< std::vector< std::size_t > > >(v, key);
      else if(key == "horizon")
         c.horizon = get_count(v, key);
      else if(key == "n_seeds")
         c.n_seeds = get_count(v, key);
      else if(key == "profile") {
         c.profile = detail::get_field< std::string >(v, key);
         require(c.profile == "uniform" || c.profile == "exact_ne", key, "expected 'uniform' or 'exact_ne'");
      } else if(key == "deviation_impact")
         c.deviation_impact = detail::parse_impact(v, key);
      else if(key == "exploitability") {
         try {
            c.exploitability = exploitability_variant_from_string(detail::get_field< std::string >(v, key));
         } catch(const std::invalid_argument& e) {
            throw ConfigError(key, e.what());
         }
      } else if(key == "br_tol")
         c.br_tol = get_number(v, key);
      else if(key == "reference")
         c.reference = detail::get_field< bool >(v, key);
      else if(key == "reference_eps_pi")
         c.reference_eps_pi = get_number(v, key);
      else if(key == "reference_max_outer")
         c.reference_max_outer = get_count(v, key);
      else if(key == "output")
         c.output = detail::get_field< std::string >(v, key);
      else if(key == "threads")
         c.threads = get_count(v, key);
      else
         throw ConfigError(key, "unknown key");
   }

   require(c.model != "custom" || ! c.model_file.empty(), "model_file", "required when model is 'custom'");
   require(c.model == "custom" || c.model_file.empty(), "model_file", "only valid when model is 'custom'");
   require(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda", "must be finite and >= 0");
   require(c.gamma > 0.0 && c.gamma < 1.0, "gamma", "must lie in (0,1)");
   require(c.eta > 0.0 && std::isfinite(c.eta), "eta", "must be finite and > 0");
   require(c.l_h.kind != LhSetting::Kind::value || c.l_h.value >= 0.0, "l_h", "must be >= 0");
   require(c.eps_pi > 0.0, "eps_pi", "must be > 0");
   require(c.pop_tol > 0.0, "pop_tol", "must be > 0");
   require(c.pop_max_iter >= 1, "pop_max_iter", "must be >= 1");
   require(c.n_per_pair >= 1, "n_per_pair", "must be >= 1");
   require(c.eps_pop > 0.0, "eps_pop", "must be > 0");
   require(c.q_tol > 0.0, "q_tol", "must be > 0");
   require(c.i_mix >= 2, "i_mix", "must be >= 2");
   require(c.br_tol > 0.0, "br_tol", "must be > 0");
   require(c.reference_eps_pi > 0.0, "reference_eps_pi", "must be > 0");
   require(c.threads >= 1, "threads", "must be >= 1");
   for(auto n : c.sizes) require(n >= 1, "sizes", "population sizes must be >= 1");
   for(const auto& s : c.size_settings)
      for(auto n : s) require(n >= 1, "size_settings", "population sizes must be >= 1");
   if(c.mode == RunMode::metrics) require(c.n_seeds >= 1, "n_seeds", "must be >= 1");
   if(c.mu0)
      for(const auto& row : *c.mu0) {
         try {
            Distribution d(row);
         } catch(const std::invalid_argument& e) {
            throw ConfigError("mu0", e.what());
         }
      }
   return c;
}

inline json config_to_json(const ExperimentConfig& c)
{
   json j;
   j["mode"] = to_string(c.mode);
   j["model"] = c.model;
   if(! c.model_file.empty()) j["model_file"] = c.model_file;
   j["seed"] = c.seed;
   j["lambda"] = c.lambda;
   j["gamma"] = c.gamma;
   j["regularizer"] = to_string(c.regularizer);
   j["eta"] = c.eta;
   switch(c.l_h.kind) {
      case LhSetting::Kind::automatic: j["l_h"] = "auto"; break;
      case LhSetting::Kind::none: j["l_h"] = "none"; break;
      case LhSetting::Kind::value: j["l_h"] = c.l_h.value; break;
   }
   j["eps_pi"] = c.eps_pi;
   j["max_outer"] = c.max_outer;
   j["pop_tol"] = c.pop_tol;
   j["pop_max_iter"] = c.pop_max_iter;
   if(c.mu0) j["mu0"] = *c.mu0;
   j["n_per_pair"] = c.n_per_pair;
   j["eps_pop"] = c.eps_pop;
   j["q_tol"] = c.q_tol;
   j["sizes"] = c.sizes;
   j["i_ctd"] = c.i_ctd;
   j["i_mix"] = c.i_mix;
   j["m"] = c.m;
   j["schedule"] = detail::schedule_to_json(c.schedule);
   j["impact"] = to_string(c.impact);
   j["self_loops"] = c.self_loops;
   j["representative"] = c.representative;
   j["size_settings"] = c.size_settings;
   j["horizon"] = c.horizon;
   j["n_seeds"] = c.n_seeds;
   j["profile"] = c.profile;
   j["deviation_impact"] = to_string(c.deviation_impact);
   j["exploitability"] = to_string(c.exploitability);
   j["br_tol"] = c.br_tol;
   j["reference"] = c.reference;
   j["reference_eps_pi"] = c.reference_eps_pi;
   j["reference_max_outer"] = c.reference_max_outer;
   return j;
}

inline json read_json_file(const std::filesystem::path& path, const std::string& field)
{
   std::ifstream in(path);
   if(! in) throw ConfigError(field, "cannot open '" + path.string() + "'");
   try {
      return json::parse(in);
   } catch(const json::parse_error& e) {
      throw ConfigError(field, std::string("parse error: ") + e.what());
   }
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
   ExperimentConfig c = config_from_json(read_json_file(path, "<file>"));
   // a relative model file is taken relative to the configuration file
   if(! c.model_file.empty() && std::filesystem::path(c.model_file).is_relative()) {
      const auto base = path.parent_path();
      if(! base.empty()) c.model_file = (base / c.model_file).lexically_normal().string();
   }
   return c;
}

struct LoadedModel {
   GameModel model;
   SbmModel sbm;
   std::vector< std::string > state_labels;
   std::vector< std::string > action_labels;
};

namespace detail {

template < class T >
std::vector< T > flatten_checked(const json& j, const std::vector< std::size_t >& shape, const std::string& field)
{
   std::vector< T > out;
   std::function< void(const json&, std::size_t) > walk = [&](const json& node, std::size_t depth) {
      if(depth == shape.size()) {
         if(! node.is_number()) throw ConfigError(field, "expected numbers at the innermost level");
         out.push_back(node.get< T >());
         return;
      }
      if(! node.is_array() || node.size() != shape[depth])
         throw ConfigError(field, "expected an array of length " + std::to_string(shape[depth]) + " at depth " + std::to_string(depth));
      for(const auto& child : node) walk(child, depth + 1);
   };
   walk(j, 0);
   return out;
}

/// Custom model: P(s'|s,a,z) = base[s][a][s'] + sum_j slope[s][a][s'][j] z_j and
/// R^k(s,a,z) = base[k][s][a] + sum_j slope[k][s][a][j] z_j.
inline LoadedModel load_custom_model(const ExperimentConfig& cfg)
{
   const json j = read_json_file(cfg.model_file, "model_file");
   if(! j.is_object()) throw ConfigError("model_file", "model must be a JSON object");
   for(const auto& [key, v] : j.items()) {
      static const std::vector< std::string > known{"n_states", "n_actions", "w", "transition", "reward", "labels", "lipschitz"};
      if(std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("model_file." + key, "unknown key");
   }
   for(const char* key : {"n_states", "n_actions", "w", "transition", "reward"})
      if(! j.contains(key)) throw ConfigError(std::string("model_file.") + key, "missing required key");
   const std::size_t ns = get_count(j.at("n_states"), "model_file.n_states");
   const std::size_t na = get_count(j.at("n_actions"), "model_file.n_actions");
   require(ns >= 1 && na >= 1, "model_file", "n_states and n_actions must be >= 1");
   const auto w = get_field< std::vector< std::vector< double > > >(j.at("w"), "model_file.w");
   const std::size_t kk = w.size();
   std::vector< std::size_t > sizes = cfg.sizes.empty() ? std::vector< std::size_t >(kk, 500) : cfg.sizes;
   std::optional< SbmModel > sbm;
   try {
      sbm.emplace(w, sizes);
   } catch(const std::invalid_argument& e) {
      throw ConfigError("model_file.w", e.what());
   }

   auto parse_affine = [&](const json& node, const std::string& field, std::vector< std::size_t > shape) {
      if(! node.is_object()) throw ConfigError(field, "expected an object with 'base' and optional 'slope'");
      for(const auto& [key, v] : node.items())
         if(key != "base" && key != "slope") throw ConfigError(field + "." + key, "unknown key");
      if(! node.contains("base")) throw ConfigError(field + ".base", "missing required key");
      auto base = flatten_checked< double >(node.at("base"), shape, field + ".base");
      shape.push_back(ns);
      std::vector< double > slope(base.size() * ns, 0.0);
      if(node.contains("slope")) slope = flatten_checked< double >(node.at("slope"), shape, field + ".slope");
      return std::pair{std::move(base), std::move(slope)};
   };
   auto [p_base, p_slope] = parse_affine(j.at("transition"), "model_file.transition", {ns, na, ns});
   auto [r_base, r_slope] = parse_affine(j.at("reward"), "model_file.reward", {kk, ns, na});

   // Impacts live in {z >= 0, sum z <= z_max}; affine maps are checked at its vertices.
   const double z_max = max_impact_mass(*sbm);
   std::vector< std::vector< double > > vertices{std::vector< double >(ns, 0.0)};
   for(StateIndex i = 0; i < ns; ++i) {
      std::vector< double > v(ns, 0.0);
      v[i] = z_max;
      vertices.push_back(std::move(v));
   }
   for(StateIndex s = 0; s < ns; ++s)
      for(ActionIndex a = 0; a < na; ++a)
         for(const auto& z : vertices) {
            double total = 0.0;
            for(StateIndex t = 0; t < ns; ++t) {
               double p = p_base[(s * na + a) * ns + t];
               for(StateIndex i = 0; i < ns; ++i) p += p_slope[((s * na + a) * ns + t) * ns + i] * z[i];
               require(p >= -1e-12, "model_file.transition", "negative probability on the admissible impact set");
               total += p;
            }
            require(std::abs(total - 1.0) <= 1e-9, "model_file.transition", "rows must sum to 1 for every admissible impact");
         }
   double r_min = std::numeric_limits< double >::infinity(), r_max = -r_min;
   for(std::size_t idx = 0; idx < r_base.size(); ++idx)
      for(const auto& z : vertices) {
         double r = r_base[idx];
         for(StateIndex i = 0; i < ns; ++i) r += r_slope[idx * ns + i] * z[i];
         r_min = std::min(r_min, r);
         r_max = std::max(r_max, r);
      }

   std::optional< LipschitzConstants > lip;
   if(j.contains("lipschitz")) {
      const json& l = j.at("lipschitz");
      if(! l.is_object()) throw ConfigError("model_file.lipschitz", "expected an object");
      LipschitzConstants c;
      for(const auto& [key, v] : l.items()) {
         const std::string f = "model_file.lipschitz." + key;
         if(key == "p_mu")
            c.p_mu = get_number(v, f);
         else if(key == "p_s")
            c.p_s = get_number(v, f);
         else if(key == "p_a")
            c.p_a = get_number(v, f);
         else if(key == "r_mu")
            c.r_mu = get_number(v, f);
         else if(key == "r_s")
            c.r_s = get_number(v, f);
         else if(key == "r_a")
            c.r_a = get_number(v, f);
         else
            throw ConfigError(f, "unknown key");
      }
      require(c.valid(), "model_file.lipschitz", "constants must be >= 0");
      lip = c;
   }

   auto transition = [ns, na, p_base = p_base, p_slope = p_slope](
                        StateIndex s, ActionIndex a, std::span< const double > z, std::span< double > out) {
      for(StateIndex t = 0; t < ns; ++t) {
         const std::size_t row = (s * na + a) * ns + t;
         double p = p_base[row];
         for(StateIndex i = 0; i < ns; ++i) p += p_slope[row * ns + i] * z[i];
         out[t] = std::max(p, 0.0);
      }
   };
   auto reward = [ns, na, r_base = r_base, r_slope = r_slope](PopIndex k, StateIndex s, ActionIndex a, std::span< const double > z) {
      const std::size_t idx = (k * ns + s) * na + a;
      double r = r_base[idx];
      for(StateIndex i = 0; i < ns; ++i) r += r_slope[idx * ns + i] * z[i];
      return r;
   };

   std::vector< std::string > s_labels, a_labels;
   if(j.contains("labels")) {
      const json& l = j.at("labels");
      if(! l.is_object()) throw ConfigError("model_file.labels", "expected an object");
      for(const auto& [key, v] : l.items()) {
         if(key == "states")
            s_labels = get_field< std::vector< std::string > >(v, "model_file.labels.states");
         else if(key == "actions")
            a_labels = get_field< std::vector< std::string > >(v, "model_file.labels.actions");
         else
            throw ConfigError("model_file.labels." + key, "unknown key");
      }
      require(s_labels.empty() || s_labels.size() == ns, "model_file.labels.states", "one label per state");
      require(a_labels.empty() || a_labels.size() == na, "model_file.labels.actions", "one label per action");
   }
   for(std::size_t i = s_labels.size(); i < ns; ++i) s_labels.push_back(std::to_string(i));
   for(std::size_t i = a_labels.size(); i < na; ++i) a_labels.push_back(std::to_string(i));

   GameModel model(
      FiniteSpace(ns), FiniteSpace(na), transition, reward, cfg.gamma, {r_min, r_max}, Regularizer(cfg.regularizer, cfg.lambda),
      lip);
   return {std::move(model), std::move(*sbm), std::move(s_labels), std::move(a_labels)};
}

}  // namespace detail

inline LoadedModel load_model(const ExperimentConfig& cfg)
{
   if(cfg.model == "custom") return detail::load_custom_model(cfg);
   std::vector< std::size_t > sizes = cfg.sizes.empty() ? std::vector< std::size_t >(3, 500) : cfg.sizes;
   if(sizes.size() != 3) throw ConfigError("sizes", "the epidemic benchmark has 3 populations");
   epidemic::Benchmark b = epidemic::build(cfg.lambda, cfg.gamma, sizes);
   GameModel model = b.model.with_regularizer(Regularizer(cfg.regularizer, cfg.lambda));
   return {std::move(model), std::move(b.sbm), {"H", "S"}, {"Y", "N"}};
}

/// Shortest decimal string that parses back to the same double.
inline std::string format_number(double x)
{
   if(std::isnan(x)) return "nan";
   if(std::isinf(x)) return x > 0 ? "inf" : "-inf";
   char buf[64];
   const auto res = std::to_chars(buf, buf + sizeof(buf), x);
   return std::string(buf, res.ptr);
}

struct TraceRow {
   std::size_t iteration = 0;
   std::optional< double > delta_pi;  ///< empty for the initial profile
   double exploitability_max = 0.0;
   std::vector< double > avg_reward;
   std::optional< double > policy_dist_to_ref;
};

inline std::string trace_csv(const std::vector< TraceRow >& rows, std::size_t k)
{
   std::ostringstream out;
   out << "iteration,delta_pi,exploitability_max";
   for(std::size_t i = 1; i <= k; ++i) out << ",avg_reward_" << i;
   out << ",policy_dist_to_ref\n";
   for(const auto& r : rows) {
      out << r.iteration << ',' << (r.delta_pi ? format_number(*r.delta_pi) : "") << ',' << format_number(r.exploitability_max);
      for(double v : r.avg_reward) out << ',' << format_number(v);
      out << ',' << (r.policy_dist_to_ref ? format_number(*r.policy_dist_to_ref) : "") << '\n';
   }
   return out.str();
}

inline json profile_to_json(const PolicyProfile& profile)
{
   json out = json::array();
   for(const auto& pi : profile) {
      json pop = json::array();
      for(StateIndex s = 0; s < pi.n_states(); ++s) pop.push_back(std::vector< double >(pi.row(s).begin(), pi.row(s).end()));
      out.push_back(std::move(pop));
   }
   return out;
}

inline PolicyProfile profile_from_json(const json& j)
{
   PolicyProfile p;
   for(const auto& pop : j) p.push_back(Policy::from_rows(pop.get< std::vector< std::vector< double > > >()));
   return p;
}

struct RunResult {
   json manifest;
   std::vector< TraceRow > trace;
   PolicyProfile profile;
   json metrics;                              ///< MetricReport of the final profile
   std::optional< std::string > deviation;   ///< metrics mode only
   bool converged = false;
};

namespace detail {

inline PmaConfig pma_config(const ExperimentConfig& cfg, const GameModel& model)
{
   PmaConfig pma;
   pma.eta = cfg.eta;
   switch(cfg.l_h.kind) {
      case LhSetting::Kind::automatic: pma.l_h = default_l_h(model); break;
      case LhSetting::Kind::none: pma.l_h = std::numeric_limits< double >::infinity(); break;
      case LhSetting::Kind::value: pma.l_h = cfg.l_h.value; break;
   }
   return pma;
}

inline MeanFieldEnsemble initial_ensemble(const ExperimentConfig& cfg, const LoadedModel& lm)
{
   if(! cfg.mu0) return uniform_ensemble(lm.sbm.k(), lm.model.n_states());
   if(cfg.mu0->size() != lm.sbm.k()) throw ConfigError("mu0", "one distribution per population required");
   MeanFieldEnsemble mu;
   for(const auto& row : *cfg.mu0) {
      if(row.size() != lm.model.n_states()) throw ConfigError("mu0", "each distribution needs one entry per state");
      mu.emplace_back(row);
   }
   return mu;
}

inline json report_to_json(const MetricReport& r)
{
   json j;
   j["avg_reward"] = r.avg_reward;
   j["exploitability"] = r.exploitability;
   j["exploitability_max"] = r.exploitability_max;
   j["policy_distance"] = r.policy_distance ? json(*r.policy_distance) : json(nullptr);
   json mu = json::array();
   for(const auto& d : r.ensemble) mu.push_back(d.vec());
   j["ensemble"] = mu;
   j["population_converged"] = r.population_converged;
   return j;
}

}  // namespace detail

/// Runs one experiment in memory. Files are written by write_run.
inline RunResult execute(const ExperimentConfig& cfg)
{
   const LoadedModel lm = load_model(cfg);
   const GameModel& model = lm.model;
   const SbmModel& sbm = lm.sbm;
   const std::size_t kk = sbm.k();
   const PmaConfig pma = detail::pma_config(cfg, model);
   const PopulationSolve pop{cfg.pop_tol, cfg.pop_max_iter};
   const PolicyProfile pi0 = u_max_profile(model, kk);
   const MeanFieldEnsemble mu0 = detail::initial_ensemble(cfg, lm);
   const Execution exec{cfg.threads};

   std::optional< PolicyProfile > reference;
   bool reference_converged = true;
   if(cfg.reference || cfg.profile == "exact_ne") {
      const ExactSolution ref = solve_exact(model, sbm, pi0, pma, cfg.reference_eps_pi, cfg.reference_max_outer, pop);
      reference = ref.profile;
      reference_converged = ref.converged;
   }
   const std::optional< PolicyProfile > trace_ref = cfg.reference ? reference : std::nullopt;

   RunResult out;
   bool population_ok = true;
   auto row_for = [&](std::size_t it, std::optional< double > delta, const PolicyProfile& p) {
      const MetricReport rep = evaluate_profile(model, sbm, p, trace_ref, cfg.br_tol, cfg.exploitability, pop);
      population_ok = population_ok && rep.population_converged;
      out.trace.push_back({it, delta, rep.exploitability_max, rep.avg_reward, rep.policy_distance});
   };
   auto history_trace = [&](const std::vector< PolicyProfile >& history, const std::vector< double >& delta) {
      for(std::size_t t = 0; t < history.size(); ++t)
         row_for(t, t == 0 ? std::nullopt : std::optional< double >(delta[t - 1]), history[t]);
   };

   json extra = json::object();
   switch(cfg.mode) {
      case RunMode::exact: {
         const ExactSolution sol = solve_exact(model, sbm, pi0, pma, cfg.eps_pi, cfg.max_outer, pop);
         history_trace(sol.history, sol.delta_pi);
         out.profile = sol.profile;
         out.converged = sol.converged;
         population_ok = population_ok && sol.population_converged;
         extra["iterations"] = sol.iterations;
         break;
      }
      case RunMode::oracle: {
         const SimulatorOracle oracle(model);
         SimulatorSettings s;
         s.eps_pi = cfg.eps_pi;
         s.eps_pop = cfg.eps_pop;
         s.n_per_pair = cfg.n_per_pair;
         s.q_tol = cfg.q_tol;
         s.max_outer = cfg.max_outer;
         s.max_pop_iter = cfg.pop_max_iter;
         s.seed = cfg.seed;
         const SimulatorSolution sol = simulator_pma(oracle, sbm, pi0, pma, s, mu0);
         history_trace(sol.history, sol.delta_pi);
         out.profile = sol.profile;
         out.converged = sol.converged;
         population_ok = population_ok && sol.population_converged;
         extra["iterations"] = sol.iterations;
         break;
      }
      case RunMode::ggrs: {
         GgrsConfig g;
         g.i_ctd = cfg.i_ctd;
         g.i_mix = cfg.i_mix;
         g.m = cfg.m;
         g.schedule = cfg.schedule;
         g.seed = cfg.seed;
         g.impact = cfg.impact;
         g.self_loops = cfg.self_loops;
         g.representative = cfg.representative;
         g.exec = exec;
         const AgentStates init = initial_agent_states(sbm, mu0, cfg.seed);
         PmaCtdHooks hooks;
         hooks.keep_q = false;
         const PmaCtdResult res = pma_ctd(model, sbm, init, pi0, g, pma, hooks);
         std::vector< double > delta;
         for(std::size_t i = 1; i < res.trace.size(); ++i) delta.push_back(res.trace[i].delta_pi);
         history_trace(res.history, delta);
         out.profile = res.profile;
         // no stopping rule: flag whether the last move was within eps_pi
         out.converged = ! delta.empty() && delta.back() <= cfg.eps_pi;
         extra["iterations"] = cfg.m;
         extra["steps"] = res.steps;
         break;
      }
      case RunMode::metrics: {
         const PolicyProfile profile = cfg.profile == "exact_ne" ? *reference : pi0;
         auto settings = cfg.size_settings;
         if(settings.empty()) settings = {std::vector< std::size_t >(kk, 50), std::vector< std::size_t >(kk, 500)};
         for(const auto& s : settings)
            if(s.size() != kk) throw ConfigError("size_settings", "each setting needs one size per population");
         if(settings.size() < 2) throw ConfigError("size_settings", "at least two size settings are required");
         const auto rows = deviation_curve(model, sbm, settings, profile, cfg.horizon, cfg.n_seeds, cfg.seed, exec, cfg.deviation_impact, mu0);
         std::ostringstream csv;
         csv << "min_n,mean_max_deviation,std_error\n";
         for(const auto& r : rows) csv << r.min_n << ',' << format_number(r.mean) << ',' << format_number(r.std_error) << '\n';
         out.deviation = csv.str();
         row_for(0, std::nullopt, profile);
         out.profile = profile;
         out.converged = true;
         json dev = json::array();
         for(const auto& r : rows) dev.push_back({{"min_n", r.min_n}, {"mean", r.mean}, {"std_error", r.std_error}, {"per_seed", r.per_seed}});
         extra["deviation"] = dev;
         break;
      }
   }

   out.metrics = detail::report_to_json(evaluate_profile(model, sbm, out.profile, trace_ref, cfg.br_tol, cfg.exploitability, pop));

   json& m = out.manifest;
   m["code_version"] = MPMFG_VERSION;
   m["seed"] = cfg.seed;
   m["config"] = config_to_json(cfg);
   m["resolved"] = {
      {"l_h", std::isfinite(pma.l_h) ? json(pma.l_h) : json("none")},
      {"sizes", sbm.sizes()},
      {"w", sbm.matrix()},
      {"q_bound", model.q_bound()},
      {"reward_range", {model.reward_range().first, model.reward_range().second}}};
   m["labels"] = {{"states", lm.state_labels}, {"actions", lm.action_labels}};
   m["converged"] = out.converged;
   m["population_converged"] = population_ok;
   if(reference) m["reference_converged"] = reference_converged;
   m["result"] = extra;
   json files = {"manifest.json", "trace.csv", "policy.json", "metrics.json"};
   if(out.deviation) files.push_back("deviation.csv");
   m["files"] = files;
   return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
   std::ofstream f(path, std::ios::binary | std::ios::trunc);
   if(! f) throw std::runtime_error("cannot write '" + path.string() + "'");
   f << text;
   if(! f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_run(const RunResult& r, const std::filesystem::path& dir, std::size_t k)
{
   std::filesystem::create_directories(dir);
   write_text(dir / "manifest.json", r.manifest.dump(2) + "\n");
   write_text(dir / "trace.csv", trace_csv(r.trace, k));
   write_text(dir / "policy.json", profile_to_json(r.profile).dump() + "\n");
   write_text(dir / "metrics.json", r.metrics.dump(2) + "\n");
   if(r.deviation) write_text(dir / "deviation.csv", *r.deviation);
}

/// --out, then the config's "output", then $MPMFG_OUT, then ./mpmfg_out.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional< std::string >& cli_out)
{
   if(cli_out && ! cli_out->empty()) return *cli_out;
   if(! cfg.output.empty()) return cfg.output;
   if(const char* env = std::getenv("MPMFG_OUT"); env && *env) return env;
   return "mpmfg_out";
}

inline RunResult run(const ExperimentConfig& cfg, const std::filesystem::path& dir)
{
   RunResult r = execute(cfg);
   write_run(r, dir, r.profile.size());
   return r;
}

}  // namespace mpmfg

#endif  // MPMFG_EXPERIMENT_HPP
