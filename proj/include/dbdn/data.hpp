#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dbdn/image.hpp"
#include "dbdn/metrics.hpp"

namespace dbdn {

inline constexpr int kHrPatch = 96;
inline constexpr const char* kManifestName = "manifest.txt";

/// Aligned LR/HR training patches.
struct SamplePair {
  ImageRGB lr;
  ImageRGB hr;
  int scale = 0;
};

struct DatasetEntry {
  std::filesystem::path hr;              // cropped HR cache
  std::map<int, std::filesystem::path> lr;  // scale -> bicubic LR cache
  int h = 0;
  int w = 0;
};

struct DatasetIndex {
  std::filesystem::path root;  // directory holding the manifest; paths are relative to it
  std::vector<int> scales;
  std::vector<DatasetEntry> entries;
  std::vector<std::string> skipped;  // "source path: reason"

  bool empty() const { return entries.empty(); }
};

/// Crops every decodable image under `hr_dir` (recursively, in path order)
/// to dims divisible by every scale, writes HR and LR PNG caches plus
/// manifest.txt under `out_dir`. Unreadable files are skipped and recorded.
DatasetIndex prepare_dataset(const std::filesystem::path& hr_dir, const std::set<int>& scales,
                             const std::filesystem::path& out_dir);

void write_manifest(const DatasetIndex& index);
/// Accepts the manifest file or the directory containing it.
DatasetIndex read_manifest(const std::filesystem::path& path);

/// Images of one scale held in memory for sampling.
struct TrainingSet {
  int scale = 0;
  std::vector<std::string> names;
  std::vector<ImageRGB> hr;
  std::vector<ImageRGB> lr;
};

TrainingSet load_training_set(const DatasetIndex& index, int scale);

/// Uniformly picks one of the 8 square symmetries and applies it to both
/// patches of the pair.
SamplePair augment(const SamplePair& pair, std::mt19937_64& rng);
SamplePair apply_transform(const SamplePair& pair, int k);

/// Draws `batch` aligned, augmented patch pairs. The HR patch is
/// `hr_patch` pixels square and its origin is scale times the LR origin.
/// Images too small for a patch are left out of the pool; throws if none fit.
std::vector<SamplePair> sample_batch(const TrainingSet& set, int batch, std::mt19937_64& rng,
                                     int hr_patch = kHrPatch);

/// The per-step generator: a pure function of (seed, step).
std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step);

/// Evaluation pairs from a prepared index (HR cache plus the LR cache of `scale`).
std::vector<EvalSample> load_eval_samples(const DatasetIndex& index, int scale);

/// Image files below `dir`, recursively, sorted by path.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace dbdn
