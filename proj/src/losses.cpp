#include "sgdeblur/losses.hpp"

#include <cmath>
#include <random>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (!a.same_dims(b)) {
    throw InvalidInput(std::string(what) + ": dimension mismatch " + std::to_string(a.height()) + "x" +
                       std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                       std::to_string(b.width()));
  }
}

}  // namespace

Critic as_critic(const ScaleDiscriminator& d) {
  return [&d](const ag::Var& x) { return discriminator_forward(d, x); };
}

double reconstruction_loss(const Image& gen_out, const Image& x_n) {
  require_same_dims(gen_out, x_n, "reconstruction_loss");
  double total = 0.0;
  const auto a = gen_out.samples();
  const auto b = x_n.samples();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

ag::Var reconstruction_loss(const ag::Var& gen_out, const ag::Var& x_n) {
  if (gen_out.shape() != x_n.shape()) throw InvalidInput("reconstruction_loss: dimension mismatch");
  const ag::Var diff = ag::sub(gen_out, x_n);
  return ag::mean_all(ag::mul(diff, diff));
}

double rmse(const Image& a, const Image& b) { return std::sqrt(reconstruction_loss(a, b)); }

float interpolation_weight(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
}

ag::Var gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, float epsilon) {
  if (real.shape() != fake.shape()) throw InvalidInput("gradient_penalty: real/fake dimension mismatch");
  // The input gradient is needed even when the caller is not recording.
  ag::GradMode recording(true);
  Tensor mix(real.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = epsilon * real[i] + (1.0f - epsilon) * fake[i];
  const ag::Var x_hat = ag::Var::parameter(std::move(mix));
  const ag::Var scores = critic(x_hat);
  const ag::Var g = ag::grad(ag::sum_all(scores), {x_hat}, /*create_graph=*/true)[0];
  const ag::Var norms = ag::masked_pow(ag::sum_channels(ag::mul(g, g)), 0.5f);
  const ag::Var dev = ag::add_scalar(norms, -1.0f);
  return ag::mean_all(ag::mul(dev, dev));
}

CriticLossTerms critic_loss(const Critic& critic, const Tensor& real, const Tensor& fake, double gp_weight,
                            float epsilon) {
  if (real.shape() != fake.shape()) throw InvalidInput("adversarial_d_loss: real/fake dimension mismatch");
  const ag::Var fake_mean = ag::mean_all(critic(ag::Var::constant(fake)));
  const ag::Var real_mean = ag::mean_all(critic(ag::Var::constant(real)));
  CriticLossTerms terms;
  terms.fake_score = fake_mean.value().item();
  terms.real_score = real_mean.value().item();
  terms.total = ag::sub(fake_mean, real_mean);
  if (gp_weight != 0.0) {
    const ag::Var gp = gradient_penalty(critic, real, fake, epsilon);
    terms.penalty = gp.value().item();
    terms.total = ag::add(terms.total, ag::scale(gp, static_cast<float>(gp_weight)));
  }
  return terms;
}

double adversarial_d_loss(const ScaleDiscriminator& d, const Image& real, const Image& fake, double gp_weight,
                          std::uint64_t seed) {
  require_same_dims(real, fake, "adversarial_d_loss");
  return critic_loss(as_critic(d), real.tensor(), fake.tensor(), gp_weight, interpolation_weight(seed))
      .total.value()
      .item();
}

ag::Var adversarial_g_loss(const Critic& critic, const ag::Var& fake) {
  return ag::scale(ag::mean_all(critic(fake)), -1.0f);
}

double adversarial_g_loss(const ScaleDiscriminator& d, const Image& fake) {
  ag::NoGrad no_grad;
  return adversarial_g_loss(as_critic(d), ag::Var::constant(fake.tensor())).value().item();
}

GeneratorLossTerms generator_loss(const Critic& critic, const ag::Var& fake, const ag::Var& rec_out,
                                  const ag::Var& x_n, double alpha) {
  const ag::Var adv = adversarial_g_loss(critic, fake);
  const ag::Var rec = reconstruction_loss(rec_out, x_n);
  GeneratorLossTerms terms;
  terms.adversarial = adv.value().item();
  terms.reconstruction = rec.value().item();
  terms.alpha = alpha;
  terms.total = ag::add(adv, ag::scale(rec, static_cast<float>(alpha)));
  return terms;
}

}  // namespace sgdeblur
