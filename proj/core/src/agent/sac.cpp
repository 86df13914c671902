#include "thermotune/agent/sac.hpp"

#include <cmath>
#include <random>

#include "thermotune/nn/checkpoint.hpp"

namespace thermotune::agent {

Agent::Agent(AgentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  rng_.seed(derive_seed(cfg_.seed, 0x6163746fULL));
  dropout_rng_.seed(derive_seed(cfg_.seed, 0x64726f70ULL));
  Rng init(derive_seed(cfg_.seed, 0x696e6974ULL));
  encoder_ = std::make_unique<Encoder>(cfg_, init);
  const int latent = encoder_->latent_size();
  decoder_ = std::make_unique<PolicyDecoder>(cfg_, latent, init);
  q1_ = std::make_unique<QNetwork>(cfg_, latent, init);
  q2_ = std::make_unique<QNetwork>(cfg_, latent, init);
  q1_target_ = std::make_unique<QNetwork>(cfg_, latent, init);
  q2_target_ = std::make_unique<QNetwork>(cfg_, latent, init);
  q1_target_->copy_from(*q1_);
  q2_target_->copy_from(*q2_);

  log_alpha_ = nn::parameter(Tensor({1}, static_cast<Real>(std::log(std::max(cfg_.initial_alpha, 1e-30)))));

  nn::AdamConfig adam{.lr = cfg_.lr};
  actor_opt_ = std::make_unique<nn::Adam<Real>>(decoder_->parameters(), adam);
  auto critic_params = encoder_->parameters();
  for (auto& p : q1_->parameters()) critic_params.push_back(p);
  for (auto& p : q2_->parameters()) critic_params.push_back(p);
  critic_opt_ = std::make_unique<nn::Adam<Real>>(critic_params, adam);
  alpha_opt_ = std::make_unique<nn::Adam<Real>>(std::vector<Var>{log_alpha_}, adam);
}

double Agent::alpha() const {
  return cfg_.initial_alpha == 0.0 && !cfg_.auto_alpha ? 0.0 : std::exp(static_cast<double>(log_alpha_.item()));
}

void Agent::set_alpha(double alpha) {
  cfg_.initial_alpha = alpha;
  log_alpha_.mutable_value()[0] = static_cast<Real>(std::log(std::max(alpha, 1e-30)));
}

void Agent::set_training(bool on) {
  encoder_->train(on);
  decoder_->train(on);
  q1_->train(on);
  q2_->train(on);
  q1_target_->train(on);
  q2_target_->train(on);
}

Tensor Agent::standard_normal(const nn::Shape& shape) {
  Tensor t(shape);
  std::normal_distribution<Real> n(0.0f, 1.0f);
  for (auto& v : t.values()) v = n(rng_);
  return t;
}

PolicyHeads Agent::policy(const ObservationBatch& obs) {
  return decoder_->forward(encoder_->forward(obs, dropout_rng_));
}

env::ActionTensor Agent::act(const PackedObservation& obs, bool stochastic, Rng& rng) const {
  nn::NoGradGuard no_grad;
  const bool was_training = encoder_->training();
  encoder_->train(false);
  decoder_->train(false);
  auto batch = make_batch(std::vector<const PackedObservation*>{&obs});
  auto heads = decoder_->forward(encoder_->forward(batch, dropout_rng_));
  encoder_->train(was_training);
  decoder_->train(was_training);

  Tensor a;
  if (stochastic) {
    Tensor noise(batch.mask.shape());
    std::normal_distribution<Real> n(0.0f, 1.0f);
    for (auto& v : noise.values()) v = n(rng);
    a = masked_sample(heads, batch.mask, noise).action.value();
  } else {
    a = masked_mean_action(heads, batch.mask);
  }
  env::ActionTensor out{};
  constexpr double kBound = 1.0 - 1e-6;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(static_cast<double>(a[k]), -kBound, kBound);
  return out;
}

std::vector<env::ActionTensor> Agent::act(const std::vector<const PackedObservation*>& obs, bool stochastic) {
  nn::NoGradGuard no_grad;
  set_training(false);
  auto batch = make_batch(obs);
  auto heads = decoder_->forward(encoder_->forward(batch, dropout_rng_));
  set_training(true);
  Tensor a = stochastic ? masked_sample(heads, batch.mask, standard_normal(batch.mask.shape())).action.value()
                        : masked_mean_action(heads, batch.mask);
  std::vector<env::ActionTensor> out(obs.size());
  constexpr double kBound = 1.0 - 1e-6;
  for (std::size_t n = 0; n < obs.size(); ++n) {
    for (std::size_t k = 0; k < env::kActionSize; ++k) {
      out[n][k] = std::clamp(static_cast<double>(a[n * env::kActionSize + k]), -kBound, kBound);
    }
  }
  return out;
}

env::ActionTensor Agent::random_action(const GridMask& mask) {
  std::uniform_real_distribution<double> u(-1.0 + 1e-6, 1.0 - 1e-6);
  env::ActionTensor a{};
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double v = u(rng_);
    a[k] = mask[k] ? v : 0.0;
  }
  return a;
}

double Agent::critic_update(const Batch& batch) {
  set_training(true);
  const int n = batch.size();
  const Real gamma = static_cast<Real>(cfg_.gamma);
  const Real alpha = static_cast<Real>(this->alpha());

  Tensor target({n, 1});
  {
    nn::NoGradGuard no_grad;
    Var zeta_next = encoder_->forward(batch.next, dropout_rng_);
    auto heads = decoder_->forward(zeta_next);
    auto next = masked_sample(heads, batch.next.mask, standard_normal(batch.next.mask.shape()));
    Var q1 = q1_target_->forward(zeta_next, next.action, dropout_rng_);
    Var q2 = q2_target_->forward(zeta_next, next.action, dropout_rng_);
    const Real scale = static_cast<Real>(cfg_.reward_scale);
    for (int b = 0; b < n; ++b) {
      const std::size_t k = static_cast<std::size_t>(b);
      const Real q_min = std::min(q1.value()[k], q2.value()[k]);
      target[k] = scale * batch.reward[k] + gamma * (q_min - alpha * next.log_prob.value()[k]);
    }
  }

  critic_opt_->zero_grad();
  Var zeta = encoder_->forward(batch.obs, dropout_rng_);
  Var action = nn::constant(batch.action);
  Var y = nn::constant(target);
  Var l1 = nn::mean(nn::square(nn::sub(q1_->forward(zeta, action, dropout_rng_), y)));
  Var l2 = nn::mean(nn::square(nn::sub(q2_->forward(zeta, action, dropout_rng_), y)));
  Var loss = nn::scale(nn::add(l1, l2), Real(0.5));
  nn::backward(loss);
  critic_opt_->step();

  const Real tau = static_cast<Real>(cfg_.tau);
  q1_target_->polyak_from(*q1_, tau);
  q2_target_->polyak_from(*q2_, tau);
  return static_cast<double>(loss.item());
}

double Agent::actor_update(const Batch& batch, const QFunction& q) {
  set_training(true);
  Var zeta;
  {
    nn::NoGradGuard no_grad;
    zeta = encoder_->forward(batch.obs, dropout_rng_);
  }
  actor_opt_->zero_grad();
  auto heads = decoder_->forward(zeta);
  auto pi = masked_sample(heads, batch.obs.mask, standard_normal(batch.obs.mask.shape()));
  Var q_pi;
  if (q) {
    q_pi = q(zeta, pi.action);
  } else {
    q_pi = nn::minimum(q1_->forward(zeta, pi.action, dropout_rng_), q2_->forward(zeta, pi.action, dropout_rng_));
  }
  const Real alpha = static_cast<Real>(this->alpha());
  Var loss = nn::mean(nn::sub(nn::scale(pi.log_prob, alpha), q_pi));
  nn::backward(loss);
  actor_opt_->step();

  if (cfg_.auto_alpha) {
    // d/d(log alpha) of -log_alpha * (log_pi + target), target = -(live entries)
    double g = 0.0;
    for (int b = 0; b < batch.size(); ++b) {
      double live = 0.0;
      for (int k = 0; k < kAction; ++k) live += batch.obs.mask[static_cast<std::size_t>(b * kAction + k)];
      g += static_cast<double>(pi.log_prob.value()[static_cast<std::size_t>(b)]) - live;
    }
    g = -g / batch.size();
    alpha_opt_->zero_grad();
    log_alpha_.mutable_grad()[0] = static_cast<Real>(g);
    alpha_opt_->step();
  }
  // The critic received gradients through q_pi; they must not leak into its next step.
  q1_->zero_grad();
  q2_->zero_grad();
  return static_cast<double>(loss.item());
}

UpdateStats Agent::update(const ReplayBuffer& buffer) {
  UpdateStats s;
  for (int k = 0; k < cfg_.critic_updates; ++k) {
    s.critic_loss += critic_update(make_batch(buffer.sample(cfg_.batch_size, rng_)));
  }
  for (int k = 0; k < cfg_.actor_updates; ++k) {
    s.actor_loss += actor_update(make_batch(buffer.sample(cfg_.batch_size, rng_)));
  }
  if (cfg_.critic_updates > 0) s.critic_loss /= cfg_.critic_updates;
  if (cfg_.actor_updates > 0) s.actor_loss /= cfg_.actor_updates;
  s.alpha = alpha();
  return s;
}

void Agent::save(const std::filesystem::path& path) const {
  auto all = nn::state_dict(*encoder_, "encoder.");
  for (auto& t : nn::state_dict(*decoder_, "decoder.")) all.push_back(std::move(t));
  for (auto& t : nn::state_dict(*q1_, "q1.")) all.push_back(std::move(t));
  for (auto& t : nn::state_dict(*q2_, "q2.")) all.push_back(std::move(t));
  for (auto& t : nn::state_dict(*q1_target_, "q1_target.")) all.push_back(std::move(t));
  for (auto& t : nn::state_dict(*q2_target_, "q2_target.")) all.push_back(std::move(t));
  all.push_back({"log_alpha", log_alpha_.value()});
  nn::save_checkpoint(path, all);
}

void Agent::load(const std::filesystem::path& path) {
  auto all = nn::load_checkpoint(path);
  nn::load_state_dict(*encoder_, all, "encoder.");
  nn::load_state_dict(*decoder_, all, "decoder.");
  nn::load_state_dict(*q1_, all, "q1.");
  nn::load_state_dict(*q2_, all, "q2.");
  nn::load_state_dict(*q1_target_, all, "q1_target.");
  nn::load_state_dict(*q2_target_, all, "q2_target.");
  for (const auto& t : all) {
    if (t.name == "log_alpha") log_alpha_.mutable_value() = t.value;
  }
}

}  // namespace thermotune::agent
