#pragma once

#include <cstdint>
#include <functional>

#include "sgdeblur/autograd.hpp"
#include "sgdeblur/imaging.hpp"
#include "sgdeblur/networks.hpp"

namespace sgdeblur {

/// Any map from a {3, H, W} image to a score map.
using Critic = std::function<ag::Var(const ag::Var&)>;

Critic as_critic(const ScaleDiscriminator& d);

/// Mean squared error over all samples.
double reconstruction_loss(const Image& gen_out, const Image& x_n);
ag::Var reconstruction_loss(const ag::Var& gen_out, const ag::Var& x_n);

double rmse(const Image& a, const Image& b);

/// Interpolation weight in [0, 1) drawn from `seed`.
float interpolation_weight(std::uint64_t seed);

/// mean over pixels of (||grad_x sum(critic(x))||_2 - 1)^2 at x = eps*real + (1-eps)*fake,
/// the norm taken over channels. Differentiable w.r.t. the critic's parameters.
ag::Var gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, float epsilon);

struct CriticLossTerms {
  ag::Var total;
  double fake_score = 0.0;  // mean(D(fake))
  double real_score = 0.0;  // mean(D(real))
  double penalty = 0.0;     // unweighted
};

/// WGAN-GP critic objective mean(D(fake)) - mean(D(real)) + gp_weight * penalty.
CriticLossTerms critic_loss(const Critic& critic, const Tensor& real, const Tensor& fake, double gp_weight,
                            float epsilon);

double adversarial_d_loss(const ScaleDiscriminator& d, const Image& real, const Image& fake, double gp_weight,
                          std::uint64_t seed);

/// -mean(D(fake)).
ag::Var adversarial_g_loss(const Critic& critic, const ag::Var& fake);
double adversarial_g_loss(const ScaleDiscriminator& d, const Image& fake);

struct GeneratorLossTerms {
  ag::Var total;
  double adversarial = 0.0;
  double reconstruction = 0.0;
  double alpha = 0.0;

  double weighted_reconstruction() const { return alpha * reconstruction; }
  double total_value() const { return adversarial + weighted_reconstruction(); }
};

/// adversarial_g_loss(fake) + alpha * reconstruction_loss(rec_out, x_n).
GeneratorLossTerms generator_loss(const Critic& critic, const ag::Var& fake, const ag::Var& rec_out,
                                  const ag::Var& x_n, double alpha);

}  // namespace sgdeblur
