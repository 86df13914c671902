#include "thermotune/agent/networks.hpp"

#include <cmath>

namespace thermotune::agent {
namespace {

nn::Padding same_padding(int k) {
  const int lead = (k - 1) / 2;
  const int trail = k - 1 - lead;
  return {lead, lead, trail, trail};
}

}  // namespace

void NetworkConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(context_hidden, "context_hidden");
  positive(context_latent, "context_latent");
  positive(lstm_hidden, "lstm_hidden");
  positive(lstm_layers, "lstm_layers");
  positive(critic_hidden, "critic_hidden");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");

  if (encoder_channels.size() != encoder_kernels.size() + 1 || encoder_kernels.empty()) {
    throw ConfigError("encoder_channels must have one more entry than encoder_kernels");
  }
  if (encoder_channels.front() != static_cast<int>(env::kChannels)) {
    throw ConfigError("encoder_channels must start with " + std::to_string(env::kChannels));
  }
  int side = static_cast<int>(env::kImageSize);
  for (int k : encoder_kernels) {
    positive(k, "encoder kernel");
    side -= k - 1;
  }
  if (side != 1) throw ConfigError("encoder kernels must reduce the 8x8 image to 1x1");
  for (int c : encoder_channels) positive(c, "encoder channel");

  if (decoder_channels.size() != decoder_kernels.size() + 1 || decoder_kernels.empty()) {
    throw ConfigError("decoder_channels must have one more entry than decoder_kernels");
  }
  if ((1 << decoder_kernels.size()) != static_cast<int>(env::kImageSize)) {
    throw ConfigError("decoder needs exactly log2(8) = 3 upsampling stages");
  }
  if (decoder_channels.back() != static_cast<int>(env::kChannels)) {
    throw ConfigError("decoder_channels must end with " + std::to_string(env::kChannels));
  }
  for (int k : decoder_kernels) positive(k, "decoder kernel");
  for (int c : decoder_channels) positive(c, "decoder channel");
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (critic_updates < 0 || actor_updates < 0) throw ConfigError("update counts must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
  if (!(initial_alpha >= 0.0)) throw ConfigError("initial_alpha must be >= 0");
  if (auto_alpha && !(initial_alpha > 0.0)) throw ConfigError("auto_alpha needs initial_alpha > 0");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be > 0");
  if (replay_capacity < batch_size) throw ConfigError("replay_capacity must be >= batch_size");
  if (window < 1) throw ConfigError("window must be >= 1");
  net.validate();
}

Encoder::Encoder(const AgentConfig& cfg, Rng& rng) : dropout_(cfg.net.dropout) {
  const auto& n = cfg.net;
  ctx1_ = std::make_unique<nn::Linear<Real>>(static_cast<int>(env::kContextSize), n.context_hidden, rng);
  ctx2_ = std::make_unique<nn::Linear<Real>>(n.context_hidden, n.context_hidden, rng);
  ctx3_ = std::make_unique<nn::Linear<Real>>(n.context_hidden, n.context_latent, rng);
  register_module("ctx1", ctx1_.get());
  register_module("ctx2", ctx2_.get());
  register_module("ctx3", ctx3_.get());
  lstm_ = std::make_unique<nn::LSTM<Real>>(static_cast<int>(env::kSignalChannels), n.lstm_hidden,
                                           n.lstm_layers, rng);
  register_module("lstm", lstm_.get());
  for (std::size_t k = 0; k < n.encoder_kernels.size(); ++k) {
    convs_.push_back(std::make_unique<nn::Conv2d<Real>>(n.encoder_channels[k], n.encoder_channels[k + 1],
                                                        n.encoder_kernels[k], rng));
    register_module("conv" + std::to_string(k), convs_.back().get());
  }
  latent_ = n.context_latent + n.lstm_hidden + n.encoder_channels.back();
}

Var Encoder::forward(const ObservationBatch& obs, Rng& dropout_rng) const {
  const Real p = static_cast<Real>(dropout_);
  const bool train = training();
  Var c = nn::constant(obs.context);
  c = nn::dropout(nn::relu(ctx1_->forward(c)), p, train, dropout_rng);
  c = nn::dropout(nn::relu(ctx2_->forward(c)), p, train, dropout_rng);
  Var z_c = ctx3_->forward(c);

  Var z_s = lstm_->forward(nn::constant(obs.window));

  Var x = nn::constant(obs.image);
  for (const auto& conv : convs_) x = nn::relu(conv->forward(x));
  Var z_phi = nn::reshape(x, {obs.size(), x.value().dim(1)});

  return nn::concat_cols<Real>({z_c, z_s, z_phi});
}

PolicyDecoder::PolicyDecoder(const AgentConfig& cfg, int latent, Rng& rng)
    : seed_channels_(cfg.net.decoder_channels.front()) {
  const auto& ch = cfg.net.decoder_channels;
  const auto& ks = cfg.net.decoder_kernels;
  project_ = std::make_unique<nn::Linear<Real>>(latent, seed_channels_, rng);
  register_module("project", project_.get());
  for (std::size_t s = 0; s + 1 < ks.size(); ++s) {
    stages_.push_back(std::make_unique<nn::Conv2d<Real>>(ch[s], ch[s + 1], ks[s], rng, same_padding(ks[s])));
    register_module("stage" + std::to_string(s), stages_.back().get());
  }
  const int last_in = ch[ch.size() - 2];
  const int k = ks.back();
  mu_head_ = std::make_unique<nn::Conv2d<Real>>(last_in, ch.back(), k, rng, same_padding(k));
  log_std_head_ = std::make_unique<nn::Conv2d<Real>>(last_in, ch.back(), k, rng, same_padding(k));
  register_module("mu", mu_head_.get());
  register_module("log_std", log_std_head_.get());
}

PolicyHeads PolicyDecoder::forward(const Var& zeta) const {
  const int batch = zeta.value().dim(0);
  Var x = nn::reshape(nn::relu(project_->forward(zeta)), {batch, seed_channels_, 1, 1});
  for (const auto& stage : stages_) x = nn::relu(stage->forward(nn::upsample_nearest2x(x)));
  x = nn::upsample_nearest2x(x);
  PolicyHeads h;
  h.mu = nn::reshape(mu_head_->forward(x), {batch, kAction});
  h.log_std = nn::clamp(nn::reshape(log_std_head_->forward(x), {batch, kAction}), kLogStdMin, kLogStdMax);
  return h;
}

PolicySample masked_sample(const PolicyHeads& heads, const Tensor& mask, const Tensor& noise) {
  nn::detail::require_same(heads.mu.shape(), mask.shape(), "masked_sample mask");
  nn::detail::require_same(heads.mu.shape(), noise.shape(), "masked_sample noise");
  constexpr Real kHalfLog2Pi = 0.91893853320467274178f;

  Tensor masked_floor(mask.shape());
  Tensor gauss_const(mask.shape());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    masked_floor[k] = kLogStdMin * (Real(1) - mask[k]);
    gauss_const[k] = -Real(0.5) * noise[k] * noise[k] - kHalfLog2Pi;
  }
  Var m = nn::constant(mask);
  Var log_std = nn::add(nn::mul(heads.log_std, m), nn::constant(masked_floor));
  Var mu = nn::mul(heads.mu, m);
  Var pre = nn::add(mu, nn::mul(nn::exp(log_std), nn::constant(noise)));
  Var squashed = nn::tanh(pre);

  // log N(pre | mu, sigma) - log(1 - tanh^2 + 1e-6), live entries only
  Var log_det = nn::log(nn::add_scalar(nn::scale(nn::square(squashed), Real(-1)), Real(1) + Real(1e-6)));
  Var elem = nn::sub(nn::sub(nn::constant(gauss_const), log_std), log_det);

  PolicySample s;
  s.action = nn::mul(squashed, m);
  s.log_prob = nn::sum_cols(nn::mul(elem, m));
  return s;
}

Tensor masked_mean_action(const PolicyHeads& heads, const Tensor& mask) {
  Tensor a(mask.shape());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = mask[k] > Real(0) ? std::tanh(heads.mu.value()[k]) : Real(0);
  return a;
}

QNetwork::QNetwork(const AgentConfig& cfg, int latent, Rng& rng) : dropout_(cfg.net.dropout) {
  const int h = cfg.net.critic_hidden;
  l1_ = std::make_unique<nn::Linear<Real>>(latent + kAction, h, rng);
  n1_ = std::make_unique<nn::LayerNorm<Real>>(h);
  l2_ = std::make_unique<nn::Linear<Real>>(h, h, rng);
  n2_ = std::make_unique<nn::LayerNorm<Real>>(h);
  out_ = std::make_unique<nn::Linear<Real>>(h, 1, rng);
  register_module("l1", l1_.get());
  register_module("n1", n1_.get());
  register_module("l2", l2_.get());
  register_module("n2", n2_.get());
  register_module("out", out_.get());
}

Var QNetwork::forward(const Var& zeta, const Var& action, Rng& dropout_rng) const {
  const Real p = static_cast<Real>(dropout_);
  const bool train = training();
  Var x = nn::concat_cols<Real>({zeta, action});
  x = nn::relu(n1_->forward(nn::dropout(l1_->forward(x), p, train, dropout_rng)));
  x = nn::relu(n2_->forward(nn::dropout(l2_->forward(x), p, train, dropout_rng)));
  return out_->forward(x);
}

}  // namespace thermotune::agent
