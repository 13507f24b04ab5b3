#ifndef MPMFG_REGULARIZER_HPP
#define MPMFG_REGULARIZER_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpmfg/core.hpp"

namespace mpmfg {

enum class RegularizerKind { entropy, neg_sq_l2, zero };

inline std::string to_string(RegularizerKind k)
{
   switch(k) {
      case RegularizerKind::entropy: return "entropy";
      case RegularizerKind::neg_sq_l2: return "neg_sq_l2";
      case RegularizerKind::zero: return "zero";
   }
   return "unknown";
}

inline RegularizerKind regularizer_kind_from_string(const std::string& s)
{
   if(s == "entropy") return RegularizerKind::entropy;
   if(s == "neg_sq_l2") return RegularizerKind::neg_sq_l2;
   if(s == "zero") return RegularizerKind::zero;
   throw std::invalid_argument("unknown regularizer kind '" + s + "'");
}

/// Strongly concave, nonnegative bonus h on the action simplex.
///
/// entropy:   h(u) = lambda * sum_a -u_a log u_a          (0 log 0 := 0)
/// neg_sq_l2: h(u) = lambda * (1 - ||u||_2^2)             (shifted to stay >= 0)
/// zero:      h(u) = 0
///
/// All kinds are maximized by the uniform distribution.
class Regularizer {
  public:
   static constexpr double kLogFloor = 1e-300;

   Regularizer() = default;
   Regularizer(RegularizerKind kind, double scale) : kind_(kind), scale_(scale)
   {
      if(! (scale >= 0.0) || ! std::isfinite(scale))
         throw std::invalid_argument("Regularizer: scale must be finite and >= 0");
   }
   static Regularizer entropy(double scale) { return {RegularizerKind::entropy, scale}; }
   static Regularizer neg_sq_l2(double scale) { return {RegularizerKind::neg_sq_l2, scale}; }
   static Regularizer none() { return {RegularizerKind::zero, 0.0}; }

   [[nodiscard]] RegularizerKind kind() const noexcept { return kind_; }
   [[nodiscard]] double scale() const noexcept { return scale_; }
   [[nodiscard]] bool is_zero() const noexcept { return kind_ == RegularizerKind::zero || scale_ == 0.0; }

   /// Same kind with the scale multiplied by `factor`.
   [[nodiscard]] Regularizer scaled(double factor) const { return {kind_, scale_ * factor}; }

   [[nodiscard]] double operator()(std::span< const double > u) const
   {
      switch(kind_) {
         case RegularizerKind::entropy: {
            double acc = 0.0;
            for(double x : u)
               if(x > 0.0) acc -= x * std::log(std::max(x, kLogFloor));
            return scale_ * acc;
         }
         case RegularizerKind::neg_sq_l2: {
            double sq = 0.0;
            for(double x : u) sq += x * x;
            return scale_ * (1.0 - sq);
         }
         case RegularizerKind::zero: return 0.0;
      }
      return 0.0;
   }
   [[nodiscard]] double operator()(const Distribution& u) const { return (*this)(u.weights()); }

   /// Gradient of h at u (the simplex-tangential part is what matters to callers).
   void gradient(std::span< const double > u, std::span< double > out) const
   {
      for(std::size_t i = 0; i < u.size(); ++i) {
         switch(kind_) {
            case RegularizerKind::entropy:
               out[i] = -scale_ * (std::log(std::max(u[i], kLogFloor)) + 1.0);
               break;
            case RegularizerKind::neg_sq_l2: out[i] = -2.0 * scale_ * u[i]; break;
            case RegularizerKind::zero: out[i] = 0.0; break;
         }
      }
   }

   /// Strong-concavity modulus w.r.t. the Euclidean norm on the simplex.
   [[nodiscard]] double rho() const noexcept
   {
      switch(kind_) {
         case RegularizerKind::entropy: return scale_;
         case RegularizerKind::neg_sq_l2: return 2.0 * scale_;
         case RegularizerKind::zero: return 0.0;
      }
      return 0.0;
   }

   [[nodiscard]] Distribution u_max(std::size_t n_actions) const { return Distribution::uniform(n_actions); }

   [[nodiscard]] double h_max(std::size_t n_actions) const
   {
      const double n = static_cast< double >(n_actions);
      switch(kind_) {
         case RegularizerKind::entropy: return scale_ * std::log(n);
         case RegularizerKind::neg_sq_l2: return scale_ * (1.0 - 1.0 / n);
         case RegularizerKind::zero: return 0.0;
      }
      return 0.0;
   }

   /// h evaluated on every row of a policy.
   [[nodiscard]] std::vector< double > per_state(const Policy& pi) const
   {
      std::vector< double > out(pi.n_states());
      for(StateIndex s = 0; s < pi.n_states(); ++s) out[s] = (*this)(pi.row(s));
      return out;
   }

  private:
   RegularizerKind kind_ = RegularizerKind::zero;
   double scale_ = 0.0;
};

}  // namespace mpmfg

#endif  // MPMFG_REGULARIZER_HPP
