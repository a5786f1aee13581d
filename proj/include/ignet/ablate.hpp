#pragma once

#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ignet/train.hpp"

namespace ignet {

struct AblateCellResult {
  int stages = 0;
  Guidance guidance = Guidance::Full;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double ssim_v = std::numeric_limits<double>::quiet_NaN();
  double noisy_psnr_db = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t data_hash = 0;  // final epoch's sample-sequence hash
};

// Mean held-out PSNR/SSIM of a trained model under the run's fixed
// held-out noise streams.
inline void heldout_metrics(const TrainConfig& cfg, ModelParams<float>& params,
                            AblateCellResult& out) {
  const auto split = split_dataset(list_images(cfg.data_dir));
  double psnr_acc = 0, ssim_acc = 0, noisy_acc = 0;
  index_t n = 0;
  for (const auto& path : split.heldout) {
    const ImageSample img = load_grayscale(path);
    NoiseSpec spec{cfg.sigma,
                   Rng::stream(cfg.seed, rngstream::kHeldout, fnv1a64(img.source_path))
                       .next_u64()};
    const TensorF noisy = add_awgn(img, spec);
    const TensorF pred = denoise_image(noisy, params);
    psnr_acc += psnr(pred, img.pixels);
    ssim_acc += ssim(pred.reshaped({img.height(), img.width()}),
                     img.pixels.reshaped({img.height(), img.width()}));
    noisy_acc += psnr(noisy, img.pixels);
    ++n;
  }
  if (n == 0) throw ConfigError("ablation needs a non-empty held-out split");
  out.psnr_db = psnr_acc / static_cast<double>(n);
  out.ssim_v = ssim_acc / static_cast<double>(n);
  out.noisy_psnr_db = noisy_acc / static_cast<double>(n);
}

// Trains every (stages x variant x seed) cell on the shared dataset. A
// failing cell records its error and the grid continues.
inline std::vector<AblateCellResult> run_ablation(const TrainConfig& base,
                                                  const std::vector<int>& stages_list,
                                                  const std::vector<Guidance>& variants,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  std::ostream* progress = nullptr) {
  std::vector<AblateCellResult> results;
  for (int stages : stages_list)
    for (Guidance g : variants)
      for (std::uint64_t seed : seeds) {
        AblateCellResult cell;
        cell.stages = stages;
        cell.guidance = g;
        cell.seed = seed;
        TrainConfig cfg = base;
        cfg.model.stages = stages;
        cfg.model.guidance = g;
        cfg.seed = seed;
        if (!base.out_dir.empty()) {
          std::ostringstream dir;
          dir << base.out_dir << "/s" << stages << "_" << guidance_name(g) << "_seed" << seed;
          cfg.out_dir = dir.str();
        }
        if (progress)
          (*progress) << "[ablate] stages=" << stages << " variant=" << guidance_name(g)
                      << " seed=" << seed << "\n";
        try {
          TrainResult r = train(cfg, "", nullptr);
          heldout_metrics(cfg, r.params, cell);
          cell.data_hash = r.log.empty() ? 0 : r.log.back().data_hash;
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
          if (progress) (*progress) << "[ablate] cell failed: " << e.what() << "\n";
        }
        results.push_back(cell);
      }
  return results;
}

// Seed-averaged table, one row per stage count, one column per variant.
inline std::string ablation_table(const std::vector<AblateCellResult>& cells) {
  std::vector<int> stages_list;
  std::vector<Guidance> variants;
  for (const auto& c : cells) {
    if (std::find(stages_list.begin(), stages_list.end(), c.stages) == stages_list.end())
      stages_list.push_back(c.stages);
    if (std::find(variants.begin(), variants.end(), c.guidance) == variants.end())
      variants.push_back(c.guidance);
  }
  std::sort(stages_list.begin(), stages_list.end());

  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(10) << "stages";
  for (Guidance g : variants) os << std::setw(22) << (guidance_name(g) + " (psnr/ssim)");
  os << "\n";
  for (int s : stages_list) {
    os << std::left << std::setw(10) << s;
    for (Guidance g : variants) {
      double psum = 0, ssum = 0;
      int n = 0;
      bool failed = false;
      for (const auto& c : cells)
        if (c.stages == s && c.guidance == g) {
          if (!c.ok) {
            failed = true;
            continue;
          }
          psum += c.psnr_db;
          ssum += c.ssim_v;
          ++n;
        }
      std::ostringstream cellv;
      cellv << std::fixed << std::setprecision(3);
      if (n > 0)
        cellv << psum / n << " / " << ssum / n << (failed ? " (partial)" : "");
      else
        cellv << (failed ? "FAILED" : "-");
      os << std::setw(22) << cellv.str();
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace ignet
