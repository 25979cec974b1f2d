#include "dbdn/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dbdn {

namespace fs = std::filesystem;

namespace {

int lcm_of(const std::set<int>& scales) {
  int l = 1;
  for (int s : scales) l = std::lcm(l, s);
  return l;
}

std::string cache_stem(const fs::path& relative) {
  // nested/dir/img.png -> nested__dir__img
  std::string out;
  for (const auto& part : relative.parent_path()) {
    out += part.string();
    out += "__";
  }
  return out + relative.stem().string();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

DatasetIndex prepare_dataset(const fs::path& hr_dir, const std::set<int>& scales,
                             const fs::path& out_dir) {
  if (scales.empty()) throw std::invalid_argument("prepare_dataset: no scales given");
  for (int s : scales) {
    if (s < 2 || s > 4) throw std::invalid_argument("prepare_dataset: scale must be 2, 3 or 4");
  }
  const int multiple = lcm_of(scales);
  DatasetIndex index;
  index.root = out_dir;
  index.scales.assign(scales.begin(), scales.end());
  fs::create_directories(out_dir);

  for (const fs::path& src : list_images(hr_dir)) {
    ImageRGB hr;
    try {
      hr = load_image(src);
      hr = center_crop_to_multiple(hr, multiple);
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << src.string() << ": " << e.what() << '\n';
      index.skipped.push_back(src.string() + ": " + e.what());
      continue;
    }
    const std::string stem = cache_stem(fs::relative(src, hr_dir));
    DatasetEntry entry;
    entry.h = hr.h;
    entry.w = hr.w;
    entry.hr = fs::path("hr") / (stem + ".png");
    save_png(hr, out_dir / entry.hr);
    for (int s : scales) {
      const ImageRGB lr = bicubic_resize(hr, hr.h / s, hr.w / s);
      entry.lr[s] = fs::path("x" + std::to_string(s)) / (stem + ".png");
      save_png(lr, out_dir / entry.lr[s]);
    }
    index.entries.push_back(std::move(entry));
  }
  write_manifest(index);
  return index;
}

void write_manifest(const DatasetIndex& index) {
  std::ofstream out(index.root / kManifestName, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + index.root.string());
  out << "# dbdn dataset manifest v1\n# scales";
  for (int s : index.scales) out << ' ' << s;
  out << '\n';
  for (const std::string& s : index.skipped) out << "# skipped " << s << '\n';
  for (const DatasetEntry& e : index.entries) {
    out << e.hr.generic_string();
    for (const auto& [scale, path] : e.lr) out << "\tx" << scale << '=' << path.generic_string();
    out << '\t' << e.h << 'x' << e.w << '\n';
  }
}

DatasetIndex read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestName : path;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read manifest " + file.string());
  DatasetIndex index;
  index.root = file.parent_path();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# scales", 0) == 0) {
      std::istringstream is(line.substr(8));
      int s;
      while (is >> s) index.scales.push_back(s);
      continue;
    }
    if (line.rfind("# skipped ", 0) == 0) {
      index.skipped.push_back(line.substr(10));
      continue;
    }
    if (line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2) throw std::runtime_error("malformed manifest line: " + line);
    DatasetEntry e;
    e.hr = fields.front();
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
      const std::string& f = fields[i];
      const auto eq = f.find('=');
      if (f.size() < 4 || f[0] != 'x' || eq == std::string::npos) {
        throw std::runtime_error("malformed manifest field: " + f);
      }
      e.lr[std::stoi(f.substr(1, eq - 1))] = f.substr(eq + 1);
    }
    const std::string& dims = fields.back();
    const auto x = dims.find('x');
    if (x == std::string::npos) throw std::runtime_error("malformed manifest dims: " + dims);
    e.h = std::stoi(dims.substr(0, x));
    e.w = std::stoi(dims.substr(x + 1));
    index.entries.push_back(std::move(e));
  }
  return index;
}

TrainingSet load_training_set(const DatasetIndex& index, int scale) {
  TrainingSet set;
  set.scale = scale;
  for (const DatasetEntry& e : index.entries) {
    const auto it = e.lr.find(scale);
    if (it == e.lr.end()) {
      throw std::runtime_error("index has no x" + std::to_string(scale) + " cache for " +
                               e.hr.string());
    }
    set.names.push_back(e.hr.stem().string());
    set.hr.push_back(load_image(index.root / e.hr));
    set.lr.push_back(load_image(index.root / it->second));
  }
  return set;
}

SamplePair apply_transform(const SamplePair& pair, int k) {
  return {dihedral(pair.lr, k), dihedral(pair.hr, k), pair.scale};
}

SamplePair augment(const SamplePair& pair, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 7);
  return apply_transform(pair, pick(rng));
}

std::vector<SamplePair> sample_batch(const TrainingSet& set, int batch, std::mt19937_64& rng,
                                     int hr_patch) {
  if (hr_patch % set.scale != 0) {
    throw std::invalid_argument("HR patch size must be divisible by the scale");
  }
  const int lr_patch = hr_patch / set.scale;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < set.lr.size(); ++i) {
    if (set.lr[i].h >= lr_patch && set.lr[i].w >= lr_patch) pool.push_back(i);
  }
  if (pool.empty()) {
    throw std::runtime_error("no image large enough for a " + std::to_string(hr_patch) +
                             "px HR patch");
  }
  std::vector<SamplePair> out;
  out.reserve(static_cast<std::size_t>(batch));
  std::uniform_int_distribution<std::size_t> pick_image(0, pool.size() - 1);
  for (int b = 0; b < batch; ++b) {
    const std::size_t i = pool[pick_image(rng)];
    const ImageRGB& lr = set.lr[i];
    std::uniform_int_distribution<int> pick_y(0, lr.h - lr_patch);
    std::uniform_int_distribution<int> pick_x(0, lr.w - lr_patch);
    const int y = pick_y(rng);
    const int x = pick_x(rng);
    SamplePair pair{crop(lr, y, x, lr_patch, lr_patch),
                    crop(set.hr[i], y * set.scale, x * set.scale, hr_patch, hr_patch),
                    set.scale};
    out.push_back(augment(pair, rng));
  }
  return out;
}

std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return std::mt19937_64(seq);
}

std::vector<EvalSample> load_eval_samples(const DatasetIndex& index, int scale) {
  std::vector<EvalSample> out;
  for (const DatasetEntry& e : index.entries) {
    const auto it = e.lr.find(scale);
    if (it == e.lr.end()) continue;
    out.push_back({e.hr.stem().string(), load_image(index.root / it->second),
                   load_image(index.root / e.hr)});
  }
  return out;
}

std::vector<EvalSample> load_eval_samples(const fs::path& hr_dir, int scale,
                                          std::vector<std::string>* skipped) {
  std::vector<EvalSample> out;
  for (const fs::path& src : list_images(hr_dir)) {
    try {
      const ImageRGB hr = modcrop(load_image(src), scale);
      // The LR input is what an 8-bit bicubic-degraded file would hold.
      ImageRGB lr = quantize(bicubic_resize(hr, hr.h / scale, hr.w / scale));
      out.push_back({src.stem().string(), std::move(lr), hr});
    } catch (const std::exception& e) {
      if (skipped) skipped->push_back(src.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dbdn
