#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ignet/checkpoint.hpp"
#include "ignet/data.hpp"
#include "ignet/metrics.hpp"
#include "ignet/model.hpp"
#include "ignet/ops.hpp"

namespace ignet {

struct TrainConfig {
  double sigma = 25.0;
  double lr_init = 1e-3;
  double lr_min = 1e-6;
  int epochs = 20;
  int batch_size = 16;
  int patch = 128;
  int stride = 0;  // 0 means stride = patch
  double beta1 = 0.9, beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  std::uint64_t seed = 0;
  int eval_every = 5;
  bool augment_enabled = true;
  std::string data_dir;
  std::string out_dir;
  ModelConfig model;

  index_t effective_stride() const { return stride > 0 ? stride : patch; }

  void validate() const {
    model.validate();
    if (sigma < 0) throw ConfigError("sigma must be >= 0");
    if (!(lr_min > 0 && lr_min < lr_init)) throw ConfigError("need 0 < lr_min < lr_init");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch must be >= 1");
    if (patch < (1 << model.stages))
      throw ConfigError("patch must be at least 2^stages");
    if (patch % (1 << model.stages) != 0)
      throw ConfigError("patch must be divisible by 2^stages");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  }
};

// Cosine annealing from lr_init (t = 0) to lr_min (t = T).
inline double cosine_lr(int t, int T, double lr_init, double lr_min) {
  if (t < 0 || t > T) throw ValueError("cosine_lr: t must lie in [0, T]");
  return lr_min + 0.5 * (lr_init - lr_min) *
                      (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(t) /
                                      static_cast<double>(T)));
}

template <class T>
struct AdamState {
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;  // first, second
  std::int64_t t = 0;
};

// One bias-corrected Adam step over every named parameter. All gradients
// are checked finite before anything mutates, so a bad step aborts cleanly.
template <class T>
void adam_step(std::map<std::string, Value<T>>& weights, const GradientRecord<T>& grads,
               AdamState<T>& st, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8) {
  for (const auto& [name, v] : weights) {
    const Tensor<T>& g = grads.at(name);
    if (!g.same_shape(v->value))
      throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
    if (!g.all_finite())
      throw TrainError("adam_step: non-finite gradient in parameter '" + name + "'");
  }
  st.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (auto& [name, v] : weights) {
    const Tensor<T>& g = grads.at(name);
    auto it = st.moments.find(name);
    if (it == st.moments.end())
      it = st.moments
               .emplace(name, std::make_pair(Tensor<T>(v->value.shape()),
                                             Tensor<T>(v->value.shape())))
               .first;
    Tensor<T>& m = it->second.first;
    Tensor<T>& vv = it->second.second;
    Tensor<T>& p = v->value;
    for (index_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
      const double vi = beta2 * static_cast<double>(vv[i]) + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      vv[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(static_cast<double>(p[i]) -
                            lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
  }
}

template <class T>
void adam_step(ModelParams<T>& params, const GradientRecord<T>& grads, AdamState<T>& st,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  adam_step(params.weights, grads, st, lr, beta1, beta2, eps);
}

// Scales gradients so their global L2 norm is at most max_norm.
template <class T>
void clip_grad_norm(GradientRecord<T>& grads, double max_norm) {
  double sq = 0;
  for (const auto& [name, g] : grads.grads) sq += sum_squares(g);
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0) return;
  const T s = static_cast<T>(max_norm / norm);
  for (auto& [name, g] : grads.grads)
    for (index_t i = 0; i < g.numel(); ++i) g[i] = g[i] * s;
}

// ----------------------------------------------------------------- inference

// Eval-mode forward of one [1,H,W] image with pad/crop to handle sizes not
// divisible by 2^stages. Output is clamped to [0,1].
inline TensorF denoise_image(const TensorF& noisy, ModelParams<float>& mp) {
  if (noisy.ndim() != 3 || noisy.dim(0) != 1)
    throw ShapeError("denoise_image expects [1,H,W]");
  NoGradGuard ng;
  auto [padded, info] = pad_to_even(noisy, mp.config.stages);
  auto x = constant(padded.reshaped({1, 1, padded.dim(1), padded.dim(2)}));
  auto y = ignet_forward(x, mp, BnMode::Eval);
  TensorF out = crop_to(y->value.reshaped({1, padded.dim(1), padded.dim(2)}), info);
  for (index_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0f, 1.0f);
  return out;
}

// --------------------------------------------------------------- checkpoints

// Stream-id salts for the independent RNG substreams of one run.
namespace rngstream {
constexpr std::uint64_t kShuffle = 0x53485546;  // sample order per epoch
constexpr std::uint64_t kSample = 0x53414d50;   // augmentation + noise per sample
constexpr std::uint64_t kHeldout = 0x48454c44;  // fixed held-out noise
}  // namespace rngstream

inline Checkpoint snapshot_checkpoint(const ModelParams<float>& params,
                                      const AdamState<float>& adam, std::int64_t epoch,
                                      std::uint64_t seed) {
  Checkpoint c;
  c.config = params.config;
  c.seed = seed;
  c.epoch = epoch;
  c.adam_t = adam.t;
  for (const auto& [name, v] : params.weights) c.entries.emplace(name, v->value);
  bool bn_init = false;
  for (const auto& [block, stats] : params.bn) {
    c.entries.emplace(block + ".bn_mean", stats.mean);
    c.entries.emplace(block + ".bn_var", stats.var);
    bn_init = bn_init || stats.initialized;
  }
  c.bn_initialized = bn_init;
  for (const auto& [name, mv] : adam.moments) {
    c.entries.emplace("adam.m." + name, mv.first);
    c.entries.emplace("adam.v." + name, mv.second);
  }
  return c;
}

// Rebuild model parameters (and optionally optimizer moments) from a loaded
// checkpoint. Shape or name mismatches against the config's parameter set
// raise CheckpointError::Mismatch naming the offending parameter.
inline ModelParams<float> apply_checkpoint(const Checkpoint& c, AdamState<float>* adam) {
  ModelParams<float> mp = ModelParams<float>::init(c.config, c.seed);
  for (auto& [name, v] : mp.weights) {
    auto it = c.entries.find(name);
    if (it == c.entries.end())
      throw CheckpointError(CheckpointError::Kind::Mismatch,
                            "checkpoint is missing parameter '" + name + "'");
    if (!(it->second.shape() == v->value.shape()))
      throw CheckpointError(CheckpointError::Kind::Mismatch,
                            "checkpoint parameter '" + name + "' has shape " +
                                shape_str(it->second.shape()) + ", model expects " +
                                shape_str(v->value.shape()));
    v->value = it->second;
  }
  for (auto& [block, stats] : mp.bn) {
    auto mi = c.entries.find(block + ".bn_mean");
    auto vi = c.entries.find(block + ".bn_var");
    if (mi == c.entries.end() || vi == c.entries.end())
      throw CheckpointError(CheckpointError::Kind::Mismatch,
                            "checkpoint is missing BN stats for '" + block + "'");
    stats.mean = mi->second;
    stats.var = vi->second;
    stats.initialized = c.bn_initialized;
  }
  if (adam) {
    adam->moments.clear();
    adam->t = c.adam_t;
    for (const auto& [name, v] : mp.weights) {
      auto mi = c.entries.find("adam.m." + name);
      auto vi = c.entries.find("adam.v." + name);
      if (mi == c.entries.end() || vi == c.entries.end())
        throw CheckpointError(CheckpointError::Kind::Mismatch,
                              "checkpoint has no optimizer moments for '" + name + "'");
      adam->moments.emplace(name, std::make_pair(mi->second, vi->second));
    }
  }
  return mp;
}

// Model compatibility gate used when a caller supplies both a checkpoint and
// an explicit model config.
inline void require_config_match(const ModelConfig& expect, const ModelConfig& got) {
  if (expect.channels != got.channels || expect.stages != got.stages ||
      expect.fe_blocks != got.fe_blocks || expect.dec_blocks != got.dec_blocks ||
      expect.kernel != got.kernel || expect.guidance != got.guidance)
    throw CheckpointError(CheckpointError::Kind::Mismatch,
                          "checkpoint model config does not match the requested one");
}

// ------------------------------------------------------------- training loop

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double heldout_psnr = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0;
  std::uint64_t data_hash = 0;
};

struct TrainResult {
  ModelParams<float> params;
  AdamState<float> adam;
  std::vector<EpochLog> log;
  double final_heldout_psnr = std::numeric_limits<double>::quiet_NaN();
  double heldout_noisy_psnr = std::numeric_limits<double>::quiet_NaN();
  std::string checkpoint_path;
  std::string log_path;
};

namespace detail {

struct SampleRef {
  index_t image = 0;   // index into the sorted train list
  index_t anchor = 0;  // row-major anchor index of the patch grid
};

// Patch grid per image for the nominal patch size; the per-sample rescale
// window re-derives its own origin from the same anchor.
inline std::vector<SampleRef> build_samples(const std::vector<ImageSample>& images,
                                            index_t patch, index_t stride) {
  std::vector<SampleRef> refs;
  for (index_t i = 0; i < static_cast<index_t>(images.size()); ++i) {
    const auto ys = patch_anchors(images[static_cast<std::size_t>(i)].height(), patch, stride);
    const auto xs = patch_anchors(images[static_cast<std::size_t>(i)].width(), patch, stride);
    for (index_t a = 0; a < static_cast<index_t>(ys.size() * xs.size()); ++a)
      refs.push_back({i, a});
  }
  return refs;
}

// Deterministic per-(epoch, sample) clean/noisy patch pair.
inline std::pair<TensorF, TensorF> make_training_pair(const ImageSample& img, index_t anchor,
                                                      const TrainConfig& cfg, int epoch,
                                                      index_t image_idx,
                                                      std::uint64_t* sample_hash) {
  Rng rng = Rng::stream(cfg.seed, rngstream::kSample,
                        static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(image_idx) * 1000003ULL +
                            static_cast<std::uint64_t>(anchor));
  const index_t patch = cfg.patch;
  const index_t stride = cfg.effective_stride();
  const auto ys = patch_anchors(img.height(), patch, stride);
  const auto xs = patch_anchors(img.width(), patch, stride);
  const index_t ay = ys[static_cast<std::size_t>(anchor) / xs.size()];
  const index_t ax = xs[static_cast<std::size_t>(anchor) % xs.size()];

  double scale = 1.0;
  if (cfg.augment_enabled) scale = draw_rescale(rng);
  index_t window = rescale_window(patch, scale);
  if (window > img.height() || window > img.width()) window = patch;  // rescale does not fit
  const index_t wy = std::min(ay, img.height() - window);
  const index_t wx = std::min(ax, img.width() - window);
  TensorF clean = crop_patch(img.pixels, wy, wx, window, window);
  if (cfg.augment_enabled) {
    clean = augment(clean, rng, patch);
  } else if (window != patch) {
    clean = resize_bicubic(clean, patch, patch);
  }
  TensorF noisy = clean;
  const double s = cfg.sigma / 255.0;
  for (index_t i = 0; i < noisy.numel(); ++i)
    noisy[i] = static_cast<float>(static_cast<double>(noisy[i]) + s * rng.gaussian());

  if (sample_hash) {
    std::uint64_t h = *sample_hash;
    h = fnv1a64(&image_idx, sizeof(image_idx), h);
    h = fnv1a64(&anchor, sizeof(anchor), h);
    h = fnv1a64(&epoch, sizeof(epoch), h);
    h = fnv1a64(&window, sizeof(window), h);
    *sample_hash = h;
  }
  return {std::move(clean), std::move(noisy)};
}

inline double heldout_psnr(const std::vector<ImageSample>& heldout, const TrainConfig& cfg,
                           ModelParams<float>& mp, double* noisy_psnr_out) {
  if (heldout.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0, acc_noisy = 0;
  for (index_t i = 0; i < static_cast<index_t>(heldout.size()); ++i) {
    const auto& img = heldout[static_cast<std::size_t>(i)];
    NoiseSpec spec{cfg.sigma, Rng::stream(cfg.seed, rngstream::kHeldout,
                                          fnv1a64(img.source_path))
                                  .next_u64()};
    TensorF noisy = add_awgn(img, spec);
    TensorF pred = denoise_image(noisy, mp);
    acc += psnr(pred, img.pixels);
    acc_noisy += psnr(noisy, img.pixels);
  }
  if (noisy_psnr_out) *noisy_psnr_out = acc_noisy / static_cast<double>(heldout.size());
  return acc / static_cast<double>(heldout.size());
}

inline void append_log_line(const std::string& path, const EpochLog& el) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot append training log '" + path + "'");
  f << "epoch=" << el.epoch << " lr=" << el.lr << " train_loss=" << el.train_loss
    << " heldout_psnr=" << el.heldout_psnr << " wall_seconds=" << el.wall_seconds
    << " data_hash=" << std::hex << el.data_hash << std::dec << "\n";
}

}  // namespace detail

// Full training run per the configured protocol: per-epoch cosine schedule,
// shuffled patches with fresh AWGN each epoch, MSE on the predicted clean
// image, Adam updates. Deterministic for a fixed seed; resuming from a
// checkpoint reproduces the uninterrupted run bit for bit.
inline TrainResult train(const TrainConfig& cfg, const std::string& resume_from = "",
                         std::ostream* progress = nullptr) {
  cfg.validate();
  if (cfg.data_dir.empty())
    throw ConfigError("config key 'data' (dataset directory) is required");

  const auto paths = list_images(cfg.data_dir);
  if (paths.empty()) throw ConfigError("dataset directory '" + cfg.data_dir + "' has no images");
  const DatasetSplit split = split_dataset(paths);
  if (split.train.empty()) throw ConfigError("training split is empty");

  std::vector<ImageSample> train_images, heldout_images;
  for (const auto& p : split.train) train_images.push_back(load_grayscale(p));
  for (const auto& p : split.heldout) heldout_images.push_back(load_grayscale(p));
  for (const auto& img : train_images)
    if (img.height() < cfg.patch || img.width() < cfg.patch)
      throw ConfigError("image '" + img.source_path + "' is smaller than the patch size");

  ModelParams<float> params = ModelParams<float>::init(cfg.model, cfg.seed);
  AdamState<float> adam;
  int start_epoch = 0;
  if (!resume_from.empty()) {
    Checkpoint c = load_checkpoint(resume_from);
    require_config_match(cfg.model, c.config);
    params = apply_checkpoint(c, &adam);
    start_epoch = static_cast<int>(c.epoch);
  }

  const auto samples = detail::build_samples(train_images, cfg.patch, cfg.effective_stride());
  if (samples.empty()) throw ConfigError("no training patches could be extracted");

  std::string ckpt_path, log_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    ckpt_path = (std::filesystem::path(cfg.out_dir) / "model.ckpt").string();
    log_path = (std::filesystem::path(cfg.out_dir) / "train_log.txt").string();
  }

  TrainResult result;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init, cfg.lr_min);

    std::vector<index_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng =
        Rng::stream(cfg.seed, rngstream::kShuffle, static_cast<std::uint64_t>(epoch));
    for (index_t i = static_cast<index_t>(order.size()) - 1; i > 0; --i) {
      const index_t j = static_cast<index_t>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    double loss_sum = 0;
    index_t batches = 0;
    std::uint64_t data_hash = 0xcbf29ce484222325ULL;
    for (std::size_t base = 0; base < order.size(); base += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size),
                                       order.size() - base);
      TensorF x({static_cast<index_t>(bsz), 1, cfg.patch, cfg.patch});
      TensorF y({static_cast<index_t>(bsz), 1, cfg.patch, cfg.patch});
      const index_t plane = static_cast<index_t>(cfg.patch) * cfg.patch;
      for (std::size_t bi = 0; bi < bsz; ++bi) {
        const auto& ref = samples[static_cast<std::size_t>(order[base + bi])];
        auto [clean, noisy] = detail::make_training_pair(
            train_images[static_cast<std::size_t>(ref.image)], ref.anchor, cfg, epoch,
            ref.image, &data_hash);
        std::copy_n(noisy.data(), plane, x.data() + static_cast<index_t>(bi) * plane);
        std::copy_n(clean.data(), plane, y.data() + static_cast<index_t>(bi) * plane);
      }
      auto input = constant(std::move(x));
      auto target = constant(std::move(y));
      auto pred = ignet_forward(input, params, BnMode::Train);
      auto loss = mse_loss(pred, target);
      const double loss_v = static_cast<double>(loss->value[0]);
      if (!std::isfinite(loss_v))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(batches) + " (lr=" + std::to_string(lr) + ")");
      auto grads = backward(loss, params.learnable());
      if (cfg.grad_clip > 0) clip_grad_norm(grads, cfg.grad_clip);
      adam_step(params, grads, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      loss_sum += loss_v;
      batches += 1;
    }

    EpochLog el;
    el.epoch = epoch;
    el.lr = lr;
    el.train_loss = loss_sum / static_cast<double>(batches);
    el.data_hash = data_hash;
    const bool eval_now = ((epoch + 1) % cfg.eval_every == 0) || (epoch + 1 == cfg.epochs);
    if (eval_now && !heldout_images.empty()) {
      double noisy_psnr = 0;
      el.heldout_psnr = detail::heldout_psnr(heldout_images, cfg, params, &noisy_psnr);
      result.final_heldout_psnr = el.heldout_psnr;
      result.heldout_noisy_psnr = noisy_psnr;
    }
    el.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::append_log_line(log_path, el);
    result.log.push_back(el);
    if (progress)
      (*progress) << "epoch " << epoch << " lr " << el.lr << " loss " << el.train_loss
                  << " heldout_psnr " << el.heldout_psnr << " (" << el.wall_seconds << "s)\n";

    if (!ckpt_path.empty() && (eval_now || epoch + 1 == cfg.epochs)) {
      const Checkpoint snap = snapshot_checkpoint(params, adam, epoch + 1, cfg.seed);
      save_checkpoint(snap, ckpt_path);
      char tagged[32];
      std::snprintf(tagged, sizeof(tagged), "model_epoch%04d.ckpt", epoch + 1);
      save_checkpoint(snap, (std::filesystem::path(cfg.out_dir) / tagged).string());
    }
  }

  result.params = std::move(params);
  result.adam = std::move(adam);
  result.checkpoint_path = ckpt_path;
  result.log_path = log_path;
  return result;
}

}  // namespace ignet
