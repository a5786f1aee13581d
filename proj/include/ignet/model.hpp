#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ignet/ops.hpp"
#include "ignet/rng.hpp"

namespace ignet {

// Guided-refinement wiring. Full is the proposed network; the other two are
// the ablation alternatives (plain residual refinement of the H bands, and
// no low/high band separation with additive merge).
enum class Guidance { Full, NoLgr, NoBandSep };

inline std::string guidance_name(Guidance g) {
  switch (g) {
    case Guidance::Full: return "full";
    case Guidance::NoLgr: return "no-lgr";
    case Guidance::NoBandSep: return "no-band-sep";
  }
  return "?";
}

inline Guidance guidance_from_name(const std::string& s) {
  if (s == "full") return Guidance::Full;
  if (s == "no-lgr") return Guidance::NoLgr;
  if (s == "no-band-sep") return Guidance::NoBandSep;
  throw ConfigError("unknown variant '" + s + "' (expected full, no-lgr or no-band-sep)");
}

struct ModelConfig {
  int channels = 32;   // 64 for the larger variant
  int stages = 3;      // DWT pyramid depth, 1..3
  int fe_blocks = 4;   // feature-extractor [Conv+BN+ReLU] blocks
  int dec_blocks = 4;  // decoder blocks, last one is a plain conv
  int kernel = 3;
  Guidance guidance = Guidance::Full;

  void validate() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (stages < 1 || stages > 3) throw ConfigError("stages must be in {1,2,3}");
    if (fe_blocks < 1) throw ConfigError("fe_blocks must be >= 1");
    if (dec_blocks < 1) throw ConfigError("dec_blocks must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd and >= 1");
  }

  index_t pad() const { return (kernel - 1) / 2; }
};

// (stage, round) pairs of refiner applications, in execution order.
// Stage s features are refined once per pyramid level at or below them.
inline std::vector<std::pair<int, int>> refiner_schedule(int stages) {
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s < stages; ++s) {
    out.emplace_back(s, 0);
    for (int i = s - 1; i >= 0; --i) out.emplace_back(i, s - i);
  }
  return out;
}

namespace detail {

// Enumerates every learnable parameter (and BN block prefix) of a config.
inline void for_each_param(const ModelConfig& cfg,
                           const std::function<void(const std::string&, Shape)>& param,
                           const std::function<void(const std::string&, index_t)>& bn_block) {
  cfg.validate();
  const index_t c = cfg.channels, k = cfg.kernel;
  for (int i = 0; i < cfg.fe_blocks; ++i) {
    const std::string p = "fe.block" + std::to_string(i) + ".";
    param(p + "conv_w", {c, i == 0 ? 1 : c, k, k});
    param(p + "conv_b", {c});
    param(p + "bn_gamma", {c});
    param(p + "bn_beta", {c});
    bn_block("fe.block" + std::to_string(i), c);
  }
  if (cfg.guidance == Guidance::NoBandSep) {
    for (int i = 0; i < cfg.stages; ++i) {
      index_t ch = c;
      for (int j = 0; j <= i; ++j) ch *= 4;
      const std::string p = "nbs.block" + std::to_string(i) + ".";
      param(p + "conv1_w", {ch, ch, k, k});
      param(p + "conv1_b", {ch});
      param(p + "conv2_w", {ch, ch, k, k});
      param(p + "conv2_b", {ch});
    }
  } else {
    for (auto [s, r] : refiner_schedule(cfg.stages)) {
      const std::string p = "lgr" + std::to_string(s) + std::to_string(r) + ".";
      param(p + "conv1_w", {3 * c, 3 * c, k, k});
      param(p + "conv1_b", {3 * c});
      if (cfg.guidance == Guidance::Full) {
        param(p + "conv2_w", {c, c, k, k});
        param(p + "conv2_b", {c});
        param(p + "conv3_w", {3 * c, 4 * c, k, k});
      } else {
        param(p + "conv3_w", {3 * c, 3 * c, k, k});
      }
      param(p + "conv3_b", {3 * c});
    }
    param("lt.conv_w", {c, c, k, k});
    param("lt.conv_b", {c});
  }
  for (int i = 0; i < cfg.dec_blocks; ++i) {
    const std::string p = "dec.block" + std::to_string(i) + ".";
    const bool last = (i == cfg.dec_blocks - 1);
    param(p + "conv_w", {last ? 1 : c, c, k, k});
    param(p + "conv_b", {last ? 1 : c});
    if (!last) {
      param(p + "bn_gamma", {c});
      param(p + "bn_beta", {c});
      bn_block("dec.block" + std::to_string(i), c);
    }
  }
}

}  // namespace detail

// Total learnable scalar count (BN running stats excluded).
inline index_t param_count(const ModelConfig& cfg) {
  index_t total = 0;
  detail::for_each_param(
      cfg, [&total](const std::string&, Shape s) { total += numel_of(s); },
      [](const std::string&, index_t) {});
  return total;
}

// Named learnable tensors plus BN running statistics for one model.
template <class T>
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Value<T>> weights;
  std::map<std::string, BnStats<T>> bn;

  // Kaiming-uniform conv weights (fan-in, ReLU gain), zero biases, unit
  // gamma / zero beta. LT starts as an identity (Dirac) kernel so the
  // deepest band begins as a passthrough. Each tensor gets its own stream
  // keyed by parameter name, so values do not depend on creation order.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams mp;
    mp.config = cfg;
    detail::for_each_param(
        cfg,
        [&](const std::string& name, Shape shape) {
          Tensor<T> t(shape);
          const bool is_weight = name.size() > 2 && name.substr(name.size() - 2) == "_w";
          if (name == "lt.conv_w") {
            const index_t c = shape[0], k = shape[2];
            for (index_t ci = 0; ci < c; ++ci)
              t[((ci * shape[1] + ci) * k + k / 2) * k + k / 2] = T(1);
          } else if (is_weight) {
            const index_t fan_in = shape[1] * shape[2] * shape[3];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            Rng rng = Rng::stream(seed, fnv1a64(name));
            fill_uniform(t, rng, -bound, bound);
          } else if (name.size() > 8 && name.find("bn_gamma") != std::string::npos) {
            for (index_t i = 0; i < t.numel(); ++i) t[i] = T(1);
          }
          mp.weights.emplace(name, make_leaf<T>(std::move(t), true, name));
        },
        [&](const std::string& block, index_t c) { mp.bn.emplace(block, BnStats<T>(c)); });
    return mp;
  }

  Value<T>& at(const std::string& name) {
    auto it = weights.find(name);
    if (it == weights.end()) throw ValueError("no parameter named '" + name + "'");
    return it->second;
  }
  const Value<T>& at(const std::string& name) const {
    auto it = weights.find(name);
    if (it == weights.end()) throw ValueError("no parameter named '" + name + "'");
    return it->second;
  }

  BnStats<T>& bn_at(const std::string& block) {
    auto it = bn.find(block);
    if (it == bn.end()) throw ValueError("no BN block named '" + block + "'");
    return it->second;
  }

  // Name-sorted (std::map order): a stable schedule for optimizers/logs.
  std::vector<Value<T>> learnable() const {
    std::vector<Value<T>> out;
    out.reserve(weights.size());
    for (const auto& [name, v] : weights) out.push_back(v);
    return out;
  }

  index_t param_count() const {
    index_t total = 0;
    for (const auto& [name, v] : weights) total += v->value.numel();
    return total;
  }
};

// Captured FPFR intermediates for feature-map dumps: keys "h{s}" for the
// raw bundle of stage s and "h{s}_{r}" for its r-th refinement.
template <class T>
struct FpfrTrace {
  std::map<std::string, Tensor<T>> taps;
};

namespace detail {

template <class T>
Value<T> conv_bn_relu(const Value<T>& x, ModelParams<T>& mp, const std::string& prefix,
                      BnMode mode) {
  auto y = conv2d(x, mp.at(prefix + ".conv_w"), mp.at(prefix + ".conv_b"), mp.config.pad());
  y = batch_norm(y, mp.at(prefix + ".bn_gamma"), mp.at(prefix + ".bn_beta"), mp.bn_at(prefix),
                 mode);
  return relu(y);
}

// Refiner dispatch: Full fuses the low band in, NoLgr is a plain residual
// block on the H bundle alone.
template <class T>
Value<T> refine_h(const Value<T>& lf, const Value<T>& hf, ModelParams<T>& mp, int stage,
                  int round) {
  const std::string p = "lgr" + std::to_string(stage) + std::to_string(round) + ".";
  const index_t pad = mp.config.pad();
  auto f_hf = relu(conv2d(hf, mp.at(p + "conv1_w"), mp.at(p + "conv1_b"), pad));
  Value<T> res;
  if (mp.config.guidance == Guidance::Full) {
    auto f_lf = relu(conv2d(lf, mp.at(p + "conv2_w"), mp.at(p + "conv2_b"), pad));
    res = conv2d(concat_channels(f_hf, f_lf), mp.at(p + "conv3_w"), mp.at(p + "conv3_b"), pad);
  } else {
    res = conv2d(f_hf, mp.at(p + "conv3_w"), mp.at(p + "conv3_b"), pad);
  }
  return add(hf, res);
}

template <class T>
Value<T> fpfr_no_band_sep(const Value<T>& f, ModelParams<T>& mp) {
  const int stages = mp.config.stages;
  const index_t pad = mp.config.pad();
  std::vector<Value<T>> refined(static_cast<std::size_t>(stages));
  Value<T> cur = f;
  for (int i = 0; i < stages; ++i) {
    auto d = dwt2_g(cur);
    const std::string p = "nbs.block" + std::to_string(i) + ".";
    auto ft = relu(conv2d(d, mp.at(p + "conv1_w"), mp.at(p + "conv1_b"), pad));
    auto res = conv2d(ft, mp.at(p + "conv2_w"), mp.at(p + "conv2_b"), pad);
    refined[static_cast<std::size_t>(i)] = add(d, res);
    cur = refined[static_cast<std::size_t>(i)];
  }
  // Additive top-down merge: upscale each deeper stage with IDWT and add it
  // to the refined stage above.
  Value<T> m = refined[static_cast<std::size_t>(stages - 1)];
  for (int i = stages - 1; i >= 1; --i) {
    const index_t ci = m->value.dim(1) / 4;
    auto up = idwt2_g(slice_channels(m, 0, ci), slice_channels(m, ci, 4 * ci));
    m = add(refined[static_cast<std::size_t>(i - 1)], up);
  }
  const index_t c0 = m->value.dim(1) / 4;
  return idwt2_g(slice_channels(m, 0, c0), slice_channels(m, c0, 4 * c0));
}

}  // namespace detail

// Stack of [Conv+BN+ReLU] blocks mapping the 1-channel image to C feature
// channels.
template <class T>
Value<T> feature_extractor(const Value<T>& x, ModelParams<T>& mp, BnMode mode) {
  if (x->value.ndim() != 4 || x->value.dim(1) != 1)
    throw ShapeError("feature_extractor expects [N,1,H,W], got " + shape_str(x->value.shape()));
  Value<T> y = x;
  for (int i = 0; i < mp.config.fe_blocks; ++i)
    y = detail::conv_bn_relu(y, mp, "fe.block" + std::to_string(i), mode);
  return y;
}

// Low-frequency Guided Refiner: lift both bands, fuse by channel concat,
// emit a signed residual for the H bundle.
//   f_HF = ReLU(Conv1(hf)); f_LF = ReLU(Conv2(lf));
//   res  = Conv3(concat(f_HF, f_LF)); out = hf + res
template <class T>
Value<T> lgr_forward(const Value<T>& lf, const Value<T>& hf, ModelParams<T>& mp, int stage,
                     int round) {
  const Tensor<T>&vl = lf->value, &vh = hf->value;
  if (vl.ndim() != 4 || vh.ndim() != 4) throw ShapeError("lgr_forward expects [N,C,h,w]");
  if (vh.dim(1) != 3 * vl.dim(1))
    throw ShapeError("lgr_forward: hf channels " + std::to_string(vh.dim(1)) + " != 3 * " +
                     std::to_string(vl.dim(1)));
  if (vl.dim(2) != vh.dim(2) || vl.dim(3) != vh.dim(3))
    throw ShapeError("lgr_forward: spatial mismatch");
  return detail::refine_h(lf, hf, mp, stage, round);
}

// Frequency-progressive feature refinement over `stages` DWT levels.
// Per level the band splits, the fresh H bundle is refined by its own low
// band, and every shallower H bundle is re-refined by the reconstructed
// (cleaner) low band below it. The deepest low band passes through LT, and
// an IDWT chain restores full resolution.
template <class T>
Value<T> fpfr_forward(const Value<T>& f, ModelParams<T>& mp, FpfrTrace<T>* trace = nullptr) {
  const ModelConfig& cfg = mp.config;
  const Tensor<T>& v = f->value;
  if (v.ndim() != 4) throw ShapeError("fpfr_forward expects [N,C,H,W]");
  const index_t div = index_t(1) << cfg.stages;
  if (v.dim(2) % div != 0 || v.dim(3) % div != 0)
    throw ShapeError("fpfr_forward: H and W must be divisible by " + std::to_string(div) +
                     ", got " + shape_str(v.shape()));
  if (cfg.guidance == Guidance::NoBandSep) return detail::fpfr_no_band_sep(f, mp);

  const index_t c = v.dim(1);
  const int stages = cfg.stages;
  auto tap = [&](const std::string& key, const Value<T>& val) {
    if (trace) trace->taps[key] = val->value;
  };

  std::vector<Value<T>> l_raw(static_cast<std::size_t>(stages));
  std::vector<Value<T>> l_latest(static_cast<std::size_t>(stages));
  std::vector<Value<T>> h_latest(static_cast<std::size_t>(stages));
  for (int s = 0; s < stages; ++s) {
    auto d = dwt2_g(s == 0 ? f : l_raw[static_cast<std::size_t>(s - 1)]);
    l_raw[static_cast<std::size_t>(s)] = slice_channels(d, 0, c);
    auto h_raw = slice_channels(d, c, 4 * c);
    tap("h" + std::to_string(s), h_raw);
    h_latest[static_cast<std::size_t>(s)] =
        detail::refine_h(l_raw[static_cast<std::size_t>(s)], h_raw, mp, s, 0);
    tap("h" + std::to_string(s) + "_0", h_latest[static_cast<std::size_t>(s)]);
    for (int i = s - 1; i >= 0; --i) {
      const auto& guide_ll = (i + 1 == s) ? l_raw[static_cast<std::size_t>(i + 1)]
                                          : l_latest[static_cast<std::size_t>(i + 1)];
      auto guide = idwt2_g(guide_ll, h_latest[static_cast<std::size_t>(i + 1)]);
      l_latest[static_cast<std::size_t>(i)] = guide;
      h_latest[static_cast<std::size_t>(i)] =
          detail::refine_h(guide, h_latest[static_cast<std::size_t>(i)], mp, i, s - i);
      tap("h" + std::to_string(i) + "_" + std::to_string(s - i),
          h_latest[static_cast<std::size_t>(i)]);
    }
  }
  auto rec = conv2d(l_raw[static_cast<std::size_t>(stages - 1)], mp.at("lt.conv_w"),
                    mp.at("lt.conv_b"), cfg.pad());
  for (int i = stages - 1; i >= 0; --i)
    rec = idwt2_g(rec, h_latest[static_cast<std::size_t>(i)]);
  return rec;
}

// Decoder: (dec_blocks - 1) [Conv+BN+ReLU] blocks, then a plain conv back
// to one channel so signed corrections survive.
template <class T>
Value<T> decoder(const Value<T>& f, ModelParams<T>& mp, BnMode mode) {
  Value<T> y = f;
  for (int i = 0; i < mp.config.dec_blocks - 1; ++i)
    y = detail::conv_bn_relu(y, mp, "dec.block" + std::to_string(i), mode);
  const std::string last = "dec.block" + std::to_string(mp.config.dec_blocks - 1) + ".";
  return conv2d(y, mp.at(last + "conv_w"), mp.at(last + "conv_b"), mp.config.pad());
}

// Full network: clean-image prediction from a noisy input.
template <class T>
Value<T> ignet_forward(const Value<T>& x, ModelParams<T>& mp, BnMode mode,
                       FpfrTrace<T>* trace = nullptr) {
  auto f = feature_extractor(x, mp, mode);
  auto r = fpfr_forward(f, mp, trace);
  return decoder(r, mp, mode);
}

}  // namespace ignet
