#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "ignet/checkpoint.hpp"
#include "ignet/synthetic.hpp"
#include "ignet/train.hpp"

using namespace ignet;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = fs::temp_directory_path() /
           ("ignet_train_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  std::string path(const std::string& name = "") const {
    return name.empty() ? dir_.string() : (dir_ / name).string();
  }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool tensors_bitwise_equal(const TensorF& a, const TensorF& b) {
  if (!(a.shape() == b.shape())) return false;
  return std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.numel()) * sizeof(float)) ==
         0;
}

// Memorize one fixed noisy->clean pair with a small model; returns PSNR of
// the fit against the clean patch after `steps` Adam updates.
double overfit_single_patch(int steps, std::uint64_t seed, double lr,
                            std::vector<double>* loss_curve = nullptr) {
  auto clean = make_scene(48, 48, seed);
  auto noisy = add_awgn(clean, NoiseSpec{25.0, seed + 1});

  ModelConfig mc;
  mc.channels = 8;
  mc.stages = 2;
  mc.fe_blocks = 2;
  mc.dec_blocks = 2;
  auto mp = ModelParams<float>::init(mc, seed);
  AdamState<float> adam;
  auto x = constant(noisy.reshaped({1, 1, 48, 48}));
  auto target = constant(clean.reshaped({1, 1, 48, 48}));
  for (int step = 0; step < steps; ++step) {
    auto loss = mse_loss(ignet_forward(x, mp, BnMode::Train), target);
    if (loss_curve) loss_curve->push_back(loss->value[0]);
    auto grads = backward(loss, mp.learnable());
    adam_step(mp, grads, adam, lr);
  }
  NoGradGuard ng;
  auto pred = ignet_forward(x, mp, BnMode::TrainFrozen);
  TensorF out = pred->value.reshaped({1, 48, 48});
  for (index_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0f, 1.0f);
  return psnr(out, clean);
}

}  // namespace

TEST(MseLoss, SpecExamples) {
  auto a = constant(TensorF::full({2, 3}, 0.7f));
  EXPECT_FLOAT_EQ(mse_loss(a, a)->value[0], 0.0f);

  auto b = constant(TensorF::full({2, 3}, 0.4f));
  EXPECT_NEAR(mse_loss(a, b)->value[0], 0.09f, 1e-6f);  // constant difference d -> d^2

  auto p = make_leaf(TensorF({4}, {0.1f, 0.5f, 0.9f, 0.2f}), true, "p");
  auto t = constant(TensorF({4}, {0.0f, 1.0f, 0.5f, 0.2f}));
  auto rec = backward(mse_loss(p, t), {p});
  for (index_t i = 0; i < 4; ++i)
    EXPECT_NEAR(rec.at("p")[i], 2.0f / 4.0f * (p->value[i] - t->value[i]), 1e-7f);
}

TEST(CosineLr, Schedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 120, 1e-3, 1e-6), 1e-3);
  EXPECT_NEAR(cosine_lr(120, 120, 1e-3, 1e-6), 1e-6, 1e-12);
  EXPECT_NEAR(cosine_lr(60, 120, 1e-3, 1e-6), (1e-3 + 1e-6) / 2, 1e-12);
  double prev = cosine_lr(0, 100, 1e-3, 1e-6);
  for (int t = 1; t <= 100; ++t) {
    const double cur = cosine_lr(t, 100, 1e-3, 1e-6);
    EXPECT_LE(cur, prev);
    EXPECT_LT(prev - cur, 5e-5);  // continuity: no jumps on a unit grid
    prev = cur;
  }
  EXPECT_THROW(cosine_lr(-1, 10, 1e-3, 1e-6), ValueError);
  EXPECT_THROW(cosine_lr(11, 10, 1e-3, 1e-6), ValueError);
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  std::map<std::string, Value<float>> w;
  w.emplace("w", make_leaf(TensorF({3}, {1.0f, -2.0f, 0.5f}), true, "w"));
  AdamState<float> st;
  GradientRecord<float> g0;
  g0.grads.emplace("w", TensorF({3}, {1.0f, 1.0f, 1.0f}));
  adam_step(w, g0, st, 0.1);
  const float m_after_first = st.moments.at("w").first[0];
  TensorF snapshot = w.at("w")->value;

  GradientRecord<float> gz;
  gz.grads.emplace("w", TensorF({3}));
  adam_step(w, gz, st, 0.0);  // lr-0 step with zero grads
  EXPECT_TRUE(tensors_bitwise_equal(w.at("w")->value, snapshot));
  EXPECT_NEAR(st.moments.at("w").first[0], 0.9f * m_after_first, 1e-7f);
}

TEST(Adam, LrZeroLeavesParamsUnchanged) {
  std::map<std::string, Value<float>> w;
  w.emplace("w", make_leaf(TensorF({2}, {0.3f, -0.8f}), true, "w"));
  AdamState<float> st;
  GradientRecord<float> g;
  g.grads.emplace("w", TensorF({2}, {0.5f, -0.2f}));
  TensorF before = w.at("w")->value;
  adam_step(w, g, st, 0.0);
  EXPECT_TRUE(tensors_bitwise_equal(w.at("w")->value, before));
}

TEST(Adam, ScalarQuadraticMatchesRecurrenceOracle) {
  // Minimize w^2 from w0=1 at lr=0.1; gradient 2w.
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double ow = 1.0, om = 0.0, ov = 0.0;  // oracle state in double
  std::map<std::string, Value<double>> w;
  w.emplace("w", make_leaf(Tensor<double>::scalar(1.0), true, "w"));
  AdamState<double> st;
  for (int t = 1; t <= 200; ++t) {
    // independent recurrence
    const double g = 2.0 * ow;
    om = b1 * om + (1 - b1) * g;
    ov = b2 * ov + (1 - b2) * g * g;
    ow -= lr * (om / (1 - std::pow(b1, t))) / (std::sqrt(ov / (1 - std::pow(b2, t))) + eps);
    // library step
    GradientRecord<double> gr;
    gr.grads.emplace("w", Tensor<double>::scalar(2.0 * w.at("w")->value[0]));
    adam_step(w, gr, st, lr, b1, b2, eps);
    EXPECT_NEAR(w.at("w")->value[0], ow, 1e-9) << "step " << t;
  }
  EXPECT_LT(std::abs(w.at("w")->value[0]), 0.01);
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  for (double g : {0.3, -2.0, 1e-3}) {
    std::map<std::string, Value<double>> w;
    w.emplace("w", make_leaf(Tensor<double>::scalar(0.5), true, "w"));
    AdamState<double> st;
    GradientRecord<double> gr;
    gr.grads.emplace("w", Tensor<double>::scalar(g));
    adam_step(w, gr, st, 0.01);
    const double delta = 0.5 - w.at("w")->value[0];
    EXPECT_NEAR(std::abs(delta), 0.01, 0.01 * 0.01);
    EXPECT_EQ(delta > 0, g > 0);
  }
}

TEST(Adam, NonFiniteGradientAbortsNamingParameter) {
  std::map<std::string, Value<float>> w;
  w.emplace("fe.block0.conv_w", make_leaf(TensorF({2}), true, "fe.block0.conv_w"));
  AdamState<float> st;
  GradientRecord<float> g;
  TensorF bad({2});
  bad[0] = std::numeric_limits<float>::quiet_NaN();
  g.grads.emplace("fe.block0.conv_w", bad);
  try {
    adam_step(w, g, st, 0.1);
    FAIL() << "expected TrainError";
  } catch (const TrainError& e) {
    EXPECT_NE(std::string(e.what()).find("fe.block0.conv_w"), std::string::npos);
  }
  EXPECT_EQ(st.t, 0);  // aborted before any mutation
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  TempDir tmp;
  ModelConfig mc;
  mc.channels = 4;
  mc.stages = 2;
  mc.fe_blocks = 1;
  mc.dec_blocks = 2;
  auto mp = ModelParams<float>::init(mc, 11);
  AdamState<float> adam;
  // a couple of real steps so moments and BN stats are nontrivial
  auto x = constant(add_awgn(make_scene(16, 16, 1), NoiseSpec{25, 2}).reshaped({1, 1, 16, 16}));
  auto t = constant(make_scene(16, 16, 1).reshaped({1, 1, 16, 16}));
  for (int i = 0; i < 2; ++i) {
    auto grads = backward(mse_loss(ignet_forward(x, mp, BnMode::Train), t), mp.learnable());
    adam_step(mp, grads, adam, 1e-3);
  }
  auto ck = snapshot_checkpoint(mp, adam, 3, 42);
  save_checkpoint(ck, tmp.path("a.ckpt"));
  auto loaded = load_checkpoint(tmp.path("a.ckpt"));
  save_checkpoint(loaded, tmp.path("b.ckpt"));
  EXPECT_EQ(file_bytes(tmp.path("a.ckpt")), file_bytes(tmp.path("b.ckpt")));
  EXPECT_EQ(loaded.epoch, 3);
  EXPECT_EQ(loaded.seed, 42u);
  EXPECT_EQ(loaded.adam_t, 2);

  AdamState<float> adam2;
  auto mp2 = apply_checkpoint(loaded, &adam2);
  for (const auto& [name, v] : mp.weights)
    EXPECT_TRUE(tensors_bitwise_equal(v->value, mp2.at(name)->value)) << name;
  EXPECT_EQ(adam2.t, adam.t);
  for (const auto& [name, mv] : adam.moments) {
    EXPECT_TRUE(tensors_bitwise_equal(mv.first, adam2.moments.at(name).first));
    EXPECT_TRUE(tensors_bitwise_equal(mv.second, adam2.moments.at(name).second));
  }
}

TEST(Checkpoint, DistinctErrorKinds) {
  TempDir tmp;
  ModelConfig mc;
  mc.channels = 2;
  mc.stages = 1;
  mc.fe_blocks = 1;
  mc.dec_blocks = 1;
  auto mp = ModelParams<float>::init(mc, 3);
  AdamState<float> adam;
  const std::string good = tmp.path("good.ckpt");
  save_checkpoint(snapshot_checkpoint(mp, adam, 0, 0), good);
  const std::string bytes = file_bytes(good);

  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream f(tmp.path(name), std::ios::binary);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    return tmp.path(name);
  };

  try {
    load_checkpoint(write_file("magic.ckpt", "NOPE" + bytes.substr(4)));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::BadMagic);
  }

  std::string vbytes = bytes;
  vbytes[4] = 9;  // version
  try {
    load_checkpoint(write_file("ver.ckpt", vbytes));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::BadVersion);
  }

  try {
    load_checkpoint(write_file("trunc.ckpt", bytes.substr(0, bytes.size() / 2)));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Truncated);
  }

  try {
    load_checkpoint(write_file("trail.ckpt", bytes + "x"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Malformed);
  }

  // shape mismatch: load a C=2 snapshot into a C=4 model
  Checkpoint wrong = load_checkpoint(good);
  wrong.config.channels = 4;
  try {
    apply_checkpoint(wrong, nullptr);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Mismatch);
    EXPECT_NE(std::string(e.what()).find("conv_w"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.lr_min = 2e-3;  // above lr_init
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.patch = 100;  // not divisible by 8
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainSmoke, OverfitSinglePatchGainsTenDb) {
  const double fit_psnr = overfit_single_patch(200, 5, 3e-3);
  // noisy input sits at 20.17 dB for sigma 25
  EXPECT_GE(fit_psnr, 30.17) << "overfit reached only " << fit_psnr << " dB";
}

TEST(TrainSmoke, LossDecreasesOverFirstFiftySteps) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<double> curve;
    overfit_single_patch(50, 100 + seed, 1e-3, &curve);
    if (curve.back() < curve.front()) ++ok;
  }
  EXPECT_GE(ok, 9);
}

TEST(Train, DeskRunLearnsAndLogs) {
  TempDir tmp;
  write_corpus(tmp.path("data"), 8, 96, 96, 555, ".png");
  TrainConfig cfg;
  cfg.data_dir = tmp.path("data");
  cfg.out_dir = tmp.path("out");
  cfg.sigma = 25;
  cfg.epochs = 3;
  cfg.eval_every = 3;
  cfg.batch_size = 8;
  cfg.patch = 32;
  cfg.seed = 9;
  cfg.model.channels = 6;
  cfg.model.stages = 2;
  cfg.model.fe_blocks = 2;
  cfg.model.dec_blocks = 2;
  auto res = train(cfg);
  ASSERT_EQ(res.log.size(), 3u);
  EXPECT_LT(res.log.back().train_loss, res.log.front().train_loss);
  EXPECT_TRUE(fs::exists(res.checkpoint_path));
  EXPECT_TRUE(fs::exists(res.log_path));
  const std::string log = file_bytes(res.log_path);
  EXPECT_NE(log.find("epoch=0"), std::string::npos);
  EXPECT_NE(log.find("data_hash="), std::string::npos);
  EXPECT_NE(log.find("wall_seconds="), std::string::npos);
}

TEST(Train, MissingDataDirIsNamedInError) {
  TrainConfig cfg;
  cfg.model.channels = 2;
  try {
    train(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("data"), std::string::npos);
  }
}

TEST(Train, ResumeEqualsUninterruptedBitForBit) {
  TempDir tmp;
  write_corpus(tmp.path("data"), 6, 64, 64, 777, ".png");
  TrainConfig cfg;
  cfg.data_dir = tmp.path("data");
  cfg.sigma = 25;
  cfg.epochs = 4;
  cfg.eval_every = 2;
  cfg.batch_size = 4;
  cfg.patch = 32;
  cfg.seed = 31;
  cfg.model.channels = 4;
  cfg.model.stages = 2;
  cfg.model.fe_blocks = 1;
  cfg.model.dec_blocks = 2;

  TrainConfig full = cfg;
  full.out_dir = tmp.path("full");
  auto uninterrupted = train(full);
  // the epoch-2 interval snapshot is the "interrupted" state
  const std::string midpoint = tmp.path("full/model_epoch0002.ckpt");
  ASSERT_TRUE(fs::exists(midpoint));

  TrainConfig rest = cfg;
  rest.out_dir = tmp.path("rest");
  auto resumed = train(rest, midpoint);

  for (const auto& [name, v] : uninterrupted.params.weights)
    EXPECT_TRUE(tensors_bitwise_equal(v->value, resumed.params.at(name)->value)) << name;
  for (const auto& [name, mv] : uninterrupted.adam.moments) {
    EXPECT_TRUE(tensors_bitwise_equal(mv.first, resumed.adam.moments.at(name).first)) << name;
    EXPECT_TRUE(tensors_bitwise_equal(mv.second, resumed.adam.moments.at(name).second)) << name;
  }
  for (const auto& [block, stats] : uninterrupted.params.bn) {
    EXPECT_TRUE(tensors_bitwise_equal(stats.mean, resumed.params.bn.at(block).mean));
    EXPECT_TRUE(tensors_bitwise_equal(stats.var, resumed.params.bn.at(block).var));
  }
}

TEST(Train, GradClipBoundsGlobalNorm) {
  GradientRecord<float> g;
  g.grads.emplace("a", TensorF({2}, {3.0f, 4.0f}));  // norm 5
  g.grads.emplace("b", TensorF({1}, {0.0f}));
  clip_grad_norm(g, 1.0);
  double sq = 0;
  for (const auto& [name, t] : g.grads) sq += sum_squares(t);
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
}

TEST(Denoise, HandlesNonMultipleOfEightSizes) {
  ModelConfig mc;
  mc.channels = 4;
  mc.stages = 3;
  mc.fe_blocks = 1;
  mc.dec_blocks = 1;
  auto mp = ModelParams<float>::init(mc, 13);
  for (auto& [block, stats] : mp.bn) stats.initialized = true;  // pretend trained
  auto img = make_scene(61, 45, 3);
  auto out = denoise_image(img, mp);
  EXPECT_EQ(out.shape(), img.shape());
  for (index_t i = 0; i < out.numel(); ++i) {
    EXPECT_GE(out[i], 0.0f);
    EXPECT_LE(out[i], 1.0f);
  }
}
