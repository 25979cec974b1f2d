// Acceptance runner. Prints one PASS/FAIL/SKIP line per check.
//
//   acceptance            every check
//   acceptance 3 5b 7     selected criteria (all their checks) or single checks
//
// Exit status: 0 when nothing failed and something ran, 1 on any failure,
// 77 when every selected check was skipped. With DBDN_ACCEPTANCE_LOG set, the
// lines are also appended to that file.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dbdn/checkpoint.hpp"
#include "dbdn/gradcheck.hpp"
#include "dbdn/metrics.hpp"
#include "dbdn/model.hpp"
#include "dbdn/train.hpp"
#include "synthetic.hpp"

using namespace dbdn;
namespace fs = std::filesystem;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Line {
  std::string id;
  Status status;
  std::string text;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Line check(std::string id, bool ok, std::string text) {
  return {std::move(id), ok ? Status::kPass : Status::kFail, std::move(text)};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(DBDN_ACCEPTANCE_SCRATCH) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. bicubic baseline on Set5

std::vector<Line> bicubic_set5() {
  const char* env = std::getenv("DBDN_SET5_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(DBDN_SOURCE_DIR) / "data" / "Set5";
  if (!fs::is_directory(dir)) {
    return {{"1", Status::kSkip,
             "bicubic Set5 baseline: no Set5 images at " + dir.string() +
                 " (set DBDN_SET5_DIR to the HR folder)"}};
  }
  struct Row {
    int scale;
    double psnr;
  };
  std::vector<Line> out;
  for (Row row : {Row{2, 33.66}, Row{3, 30.39}, Row{4, 28.42}}) {
    const auto samples = load_eval_samples(dir, row.scale);
    const EvalReport r = evaluate_with(
        [s = row.scale](const ImageRGB& lr) { return bicubic_upscale(lr, s); }, samples, row.scale);
    out.push_back(check(fmt("1x%d", row.scale), std::fabs(r.mean_psnr - row.psnr) <= 0.15,
                        fmt("bicubic Set5 x%d: PSNR %.3f dB, expected %.2f +- 0.15 (%zu images)",
                            row.scale, r.mean_psnr, row.psnr, samples.size())));
    if (row.scale == 4) {
      out.push_back(check("1ssim", std::fabs(r.mean_ssim - 0.8104) <= 0.01,
                          fmt("bicubic Set5 x4: SSIM %.4f, expected 0.8104 +- 0.01", r.mean_ssim)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2. substitution statement

std::vector<Line> substitution() {
  return {{"2", Status::kPass,
           "substituted: trained-model benchmark PSNR/SSIM scores need 1e6-step training on a "
           "large corpus and are not reproduced here; criteria 3-10 are the stand-in "
           "property checks"}};
}

// ---------------------------------------------------------------------------
// 3. gradient suite

std::vector<Line> gradients() {
  std::vector<Line> out;
  double worst = 0;
  std::string worst_op;
  bool ok = true;
  for (const std::string& op : gradcheck_op_names()) {
    const GradCheckResult r = check_op(op, 1);
    ok = ok && r.passed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_op = op;
    }
  }
  out.push_back(check("3a", ok,
                      fmt("gradient check, %zu ops: max rel error %.2e (%s), limit 1e-3",
                          gradcheck_op_names().size(), worst, worst_op.c_str())));
  const ModelConfig cfg = gradcheck_network_config();
  const GradCheckResult net = check_network(cfg, 1);
  out.push_back(check("3b", net.passed,
                      fmt("gradient check, DBDN B=%d L=%d n_r=n_g=%d x%d: max rel error %.2e over "
                          "%zu elements, limit 1e-3",
                          cfg.blocks, cfg.layers, cfg.n_r, cfg.scale, net.max_rel_error,
                          net.checked)));
  return out;
}

// ---------------------------------------------------------------------------
// 4. shape bookkeeping

std::string shape_problems(const Network& net) {
  const ModelConfig& c = net.config;
  std::vector<ShapeRecord> log;
  try {
    log = propagate_shapes(net, 12, 10);
  } catch (const std::exception& e) {
    return e.what();
  }
  std::string problems;
  auto expect = [&](const std::string& layer, int want) {
    for (const ShapeRecord& r : log) {
      if (r.layer != layer) continue;
      if (r.arriving_in != want || r.expected_in != want) {
        problems += fmt(" %s:%d/%d!=%d", layer.c_str(), r.arriving_in, r.expected_in, want);
      }
      return;
    }
    problems += " missing " + layer;
  };
  for (int b = 1; b <= c.blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b);
    const int in = c.variant == Variant::kWithoutInter ? c.n_r : c.n_r * std::max(1, b - 1);
    expect(p + ".input_compression", in);
    for (int i = 1; i <= c.layers; ++i) expect(p + ".dense." + std::to_string(i), c.n_r + (i - 1) * c.n_g);
    expect(p + ".output_compression", c.n_r + c.layers * c.n_g);
  }
  expect("global_compression", c.n_r * c.blocks);
  const ShapeRecord& last = log.back();
  if (last.output.c != 3 || last.output.h != 12 * c.scale || last.output.w != 10 * c.scale) {
    problems += " output shape";
  }
  return problems;
}

std::vector<Line> shapes() {
  std::vector<Line> out;
  int configs = 0;
  std::string problems;
  auto run = [&](const Network& net) {
    ++configs;
    const std::string p = shape_problems(net);
    if (!p.empty()) {
      problems += fmt(" [%s x%d]", std::string(variant_name(net.config.variant)).c_str(),
                      net.config.scale) + p;
    }
  };
  for (Variant v : {Variant::kDbdn, Variant::kDbdnPlus}) {
    for (int s : {2, 3, 4}) run(build_network(ModelConfig::base(v, s), 0));
  }
  run(build_ablation(ModelConfig::base(Variant::kWithoutInter, 2), 0));
  run(build_ablation(ModelConfig::base(Variant::kWithoutComp, 2), 0));
  out.push_back(check("4", problems.empty(),
                      fmt("shape pass on %d configs (DBDN, DBDN+ at x2/x3/x4, both ablations)",
                          configs) +
                          (problems.empty() ? std::string(": all channel counts agree")
                                            : ": " + problems)));
  return out;
}

// ---------------------------------------------------------------------------
// 5. parameter accounting

// Closed form written from the layer list: conv k*k*in*out + out.
std::size_t closed_form(const ModelConfig& c) {
  auto conv = [](std::size_t k, std::size_t in, std::size_t o) { return k * k * in * o + o; };
  std::size_t n = conv(3, 3, c.n_r);
  for (int b = 1; b <= c.blocks; ++b) {
    const std::size_t in = c.variant == Variant::kWithoutInter ? c.n_r : c.n_r * std::max(1, b - 1);
    n += conv(1, in, c.n_r);
    for (int i = 1; i <= c.layers; ++i) n += conv(3, c.n_r + (i - 1) * c.n_g, c.n_g);
    n += conv(1, c.n_r + c.layers * c.n_g, c.n_r);
  }
  n += conv(1, static_cast<std::size_t>(c.n_r) * c.blocks, c.n_r);
  if (c.variant == Variant::kDbdnPlus) {
    n += conv(3, c.n_r, c.n_r * c.scale * c.scale);
  } else if (c.scale == 3) {
    n += conv(9, c.n_r, c.n_r);
  } else {
    n += conv(6, c.n_r, c.n_r) * (c.scale == 4 ? 2 : 1);
  }
  return n + conv(3, c.n_r, 3);
}

std::vector<Line> parameters() {
  std::vector<Line> out;
  ModelConfig toy;
  toy.blocks = 1;
  toy.layers = 1;
  toy.n_r = 2;
  toy.n_g = 2;
  toy.scale = 2;
  const std::size_t toy_count = count_params(build_network(toy, 0));
  out.push_back(check(
      "5a", toy_count == 463,
      fmt("toy count (B=1 L=1 n_r=n_g=2 x2) vs stated hand count 463: got %zu. The stated "
          "figure sums 56+6+38+10+6+290+57 with the 6x6 deconv taken as 6*6*2*2=288, but that "
          "product is 144, giving 146 for the upsampler and 319 in total",
          toy_count)));
  out.push_back(check("5b", toy_count == 319 && toy_count == closed_form(toy),
                      fmt("toy count re-derived by hand: 56+6+38+10+6+146+57 = 319, "
                          "count_params %zu, closed form %zu",
                          toy_count, closed_form(toy))));
  bool in_range = true, close = true, formula = true;
  std::string detail;
  for (int s : {2, 3, 4}) {
    const std::size_t a = count_params(build_network(ModelConfig::base(Variant::kDbdn, s), 0));
    const std::size_t p = count_params(build_network(ModelConfig::base(Variant::kDbdnPlus, s), 0));
    const double gap = std::fabs(double(a) - double(p)) / double(a);
    in_range = in_range && a >= 21000000 && a <= 23000000;
    close = close && gap < 0.02;
    formula = formula && a == closed_form(ModelConfig::base(Variant::kDbdn, s)) &&
              p == closed_form(ModelConfig::base(Variant::kDbdnPlus, s));
    detail += fmt(" x%d: DBDN %zu DBDN+ %zu gap %.2f%%;", s, a, p, 100 * gap);
  }
  out.push_back(check("5c", in_range && formula,
                      "base DBDN in [21M, 23M] and equal to the closed form:" + detail));
  out.push_back(check("5d", close, "DBDN vs DBDN+ totals differ by < 2% at every scale"));
  return out;
}

// ---------------------------------------------------------------------------
// 6. overfit a single image

std::vector<Line> overfit() {
  ModelConfig c;
  c.blocks = 2;
  c.layers = 2;
  c.n_r = 16;
  c.n_g = 16;
  c.scale = 2;
  const int size = 48;
  const ImageRGB hr = quantize(dbdn::testing::wave_image(size, size, 7, 0.1, 0.2));
  TrainingSet set;
  set.scale = 2;
  set.names = {"waves"};
  set.hr = {hr};
  set.lr = {quantize(bicubic_resize(hr, size / 2, size / 2))};
  TrainSchedule sched;
  sched.total = 2000;
  sched.batch = 4;
  sched.hr_patch = size;  // the patch is the whole image
  const TrainResult r = train(c, set, sched, 1);
  const std::vector<EvalSample> sample{{"waves", set.lr[0], hr}};
  const EvalReport net = evaluate(r.net, sample, 2);
  const EvalReport bic =
      evaluate_with([](const ImageRGB& lr) { return bicubic_upscale(lr, 2); }, sample, 2);
  std::vector<Line> out;
  out.push_back(check("6a", net.mean_psnr > 40.0,
                      fmt("overfit DBDN B=2 L=2 n_r=n_g=16 x2, 2000 steps on one 48x48 patch: "
                          "PSNR %.2f dB (> 40 required; bicubic %.2f dB), final loss %.4f",
                          net.mean_psnr, bic.mean_psnr, r.losses.back())));
  // Mean loss per 100-step window must never go up.
  std::vector<double> windows;
  for (std::size_t i = 0; i + 100 <= r.losses.size(); i += 100) {
    double sum = 0;
    for (std::size_t j = i; j < i + 100; ++j) sum += r.losses[j];
    windows.push_back(sum / 100);
  }
  std::size_t rises = 0;
  for (std::size_t i = 1; i < windows.size(); ++i) rises += windows[i] > windows[i - 1];
  bool non_negative = true;
  for (double l : r.losses) non_negative = non_negative && l >= 0;
  out.push_back(check("6b", rises == 0 && non_negative,
                      fmt("overfit loss: %zu 100-step window means, %zu rises, first %.4f last "
                          "%.4f, all losses >= 0: %s",
                          windows.size(), rises, windows.front(), windows.back(),
                          non_negative ? "yes" : "no")));
  return out;
}

// ---------------------------------------------------------------------------
// 7. ablation structure

std::vector<Line> ablation_structure() {
  std::vector<Line> out;
  const std::size_t full = count_params(build_network(ModelConfig::base(Variant::kDbdn, 2), 0));
  const std::size_t chain =
      count_params(build_ablation(ModelConfig::base(Variant::kWithoutInter, 2), 0));
  out.push_back(check("7a", chain < full,
                      fmt("WO_INTER %zu < DBDN %zu parameters at B=16", chain, full)));

  ModelConfig one;
  one.blocks = 1;
  one.layers = 3;
  one.n_r = 8;
  one.n_g = 6;
  one.scale = 2;
  const Network dbdn = build_network(one, 5);
  ModelConfig chain_cfg = one;
  chain_cfg.variant = Variant::kWithoutInter;
  Network line = build_ablation(chain_cfg, 99);
  const auto src = dbdn.parameters();
  auto dst = line.parameters();
  bool same_layout = src.size() == dst.size();
  for (std::size_t i = 0; same_layout && i < src.size(); ++i) {
    same_layout = src[i].tensor.shape() == dst[i].tensor.shape();
    if (same_layout) {
      auto d = dst[i].tensor.data_mut();
      auto s = src[i].tensor.data();
      std::copy(s.begin(), s.end(), d.begin());
    }
  }
  const Tensor x = to_tensor(quantize(dbdn::testing::textured_image(14, 12, 3)));
  const Tensor ya = forward(dbdn, x), yb = forward(line, x);
  const bool equal = same_layout && ya.shape() == yb.shape() &&
                     std::memcmp(ya.data().data(), yb.data().data(), ya.numel() * sizeof(float)) == 0;
  out.push_back(check("7b", equal, "WO_INTER output equals DBDN bit for bit at B=1 with copied weights"));

  const Network wide = build_ablation(ModelConfig::base(Variant::kWithoutComp, 2), 0);
  int arriving = -1;
  for (const ShapeRecord& r : propagate_shapes(wide, 8, 8)) {
    if (r.layer == "blocks.1.dense.128") arriving = r.arriving_in;
  }
  out.push_back(check("7c", arriving == 2096,
                      fmt("WO_COMP dense layer 128 consumes %d channels (2096 expected)", arriving)));
  return out;
}

// ---------------------------------------------------------------------------
// 8. ablation training smoke

std::vector<Line> ablation_training() {
  const int steps = 5000, seeds = 5;
  TrainingSet set;
  set.scale = 2;
  for (int i = 0; i < 10; ++i) {
    const ImageRGB hr = quantize(dbdn::testing::mixed_image(64, 64, i));
    set.names.push_back("train" + std::to_string(i));
    set.lr.push_back(quantize(bicubic_resize(hr, 32, 32)));
    set.hr.push_back(hr);
  }
  std::vector<EvalSample> val;
  for (int i = 0; i < 4; ++i) {
    const ImageRGB hr = quantize(dbdn::testing::mixed_image(64, 64, 50 + i));
    val.push_back({"val" + std::to_string(i), quantize(bicubic_resize(hr, 32, 32)), hr});
  }
  TrainSchedule sched;
  sched.total = steps;
  sched.batch = 4;
  sched.hr_patch = 32;
  sched.lr0 = 1e-3;
  sched.halve_every = steps;
  int wins = 0;
  std::string detail;
  for (int seed = 1; seed <= seeds; ++seed) {
    double psnr[2];
    int k = 0;
    for (Variant v : {Variant::kDbdn, Variant::kWithoutInter}) {
      ModelConfig c;
      c.variant = v;
      c.blocks = 4;
      c.layers = 4;
      c.n_r = 16;
      c.n_g = 16;
      c.scale = 2;
      psnr[k++] = evaluate(train(c, set, sched, seed).net, val, 2).mean_psnr;
    }
    if (psnr[0] >= psnr[1]) ++wins;
    detail += fmt(" seed %d: %.3f vs %.3f;", seed, psnr[0], psnr[1]);
  }
  return {check("8", wins >= 4,
                fmt("DBDN >= WO_INTER validation PSNR in %d of %d seeds (B=4 L=4 n_r=n_g=16, "
                    "%d steps, 10 training images):",
                    wins, seeds, steps) +
                    detail)};
}

// ---------------------------------------------------------------------------
// 9. determinism

std::vector<Line> determinism() {
  std::vector<Line> out;
  ModelConfig c;
  c.blocks = 2;
  c.layers = 2;
  c.n_r = 8;
  c.n_g = 8;
  c.scale = 2;
  TrainingSet set;
  set.scale = 2;
  for (int i = 0; i < 3; ++i) {
    const ImageRGB hr = quantize(dbdn::testing::textured_image(40, 40, 30 + i));
    set.names.push_back(std::to_string(i));
    set.lr.push_back(quantize(bicubic_resize(hr, 20, 20)));
    set.hr.push_back(hr);
  }
  TrainSchedule sched;
  sched.total = 20;
  sched.batch = 4;
  sched.hr_patch = 24;
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    TrainOptions opts;
    opts.output_dir = scratch("determinism_" + std::to_string(run));
    opts.checkpoint_every = 0;
    train(c, set, sched, 42, opts);
    logs[run] = slurp(opts.output_dir / "loss.csv");
  }
  out.push_back(check("9a", !logs[0].empty() && logs[0] == logs[1],
                      fmt("two seeded single-threaded runs: loss logs byte-identical (%zu bytes)",
                          logs[0].size())));

  bool exact = true;
  int networks = 0;
  for (Variant v : {Variant::kDbdn, Variant::kDbdnPlus}) {
    for (int s : {2, 3, 4}) {
      ModelConfig m = c;
      m.variant = v;
      m.scale = s;
      const Network net = train(m, [&] {
        TrainingSet t;
        t.scale = s;
        const ImageRGB hr = quantize(dbdn::testing::textured_image(12 * s, 12 * s, 9));
        t.names = {"a"};
        t.hr = {hr};
        t.lr = {quantize(bicubic_resize(hr, 12, 12))};
        return t;
      }(), [&] {
        TrainSchedule q;
        q.total = 2;
        q.batch = 1;
        q.hr_patch = 6 * s;
        return q;
      }(), 3).net;
      const fs::path path = scratch("roundtrip") / "net.dbdn";
      save_checkpoint(net, path);
      const Network back = load_checkpoint(path);
      const auto a = net.parameters(), b = back.parameters();
      exact = exact && back.config == net.config && a.size() == b.size();
      for (std::size_t i = 0; exact && i < a.size(); ++i) {
        exact = a[i].tensor.shape() == b[i].tensor.shape() &&
                std::memcmp(a[i].tensor.data().data(), b[i].tensor.data().data(),
                            a[i].tensor.numel() * sizeof(float)) == 0;
      }
      exact = exact && serialize_network(back) == serialize_network(net);
      ++networks;
    }
  }
  out.push_back(check("9b", exact,
                      fmt("checkpoint save/load bit-exact for %d trained networks", networks)));
  return out;
}

// ---------------------------------------------------------------------------
// 10. skip paths

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

std::vector<Line> skip_paths() {
  std::vector<Line> out;
  ModelConfig c;
  c.blocks = 3;
  c.layers = 3;
  c.n_r = 8;
  c.n_g = 4;
  c.scale = 2;
  Network net = build_network(c, 17);
  for (float& v : net.global_compression.weight.data_mut()) v = 0.0f;
  for (float& v : net.global_compression.bias.data_mut()) v = 0.0f;
  const Tensor x = to_tensor(quantize(dbdn::testing::textured_image(10, 11, 1)));
  const Tensor l0 = conv2d(x, net.extraction);
  out.push_back(check("10a", bit_equal(inter_forward(net, l0), l0),
                      "zeroed global compression: inter-block output equals extraction features exactly"));

  IntraDenseBlock block = net.blocks[1];
  for (float& v : block.output_compression.weight.data_mut()) v = 0.0f;
  for (float& v : block.output_compression.bias.data_mut()) v = 0.0f;
  // Block 2 receives H_1, which has the same width as L0.
  const Tensor& in = l0;
  const Tensor compressed = conv2d(in, block.input_compression);
  out.push_back(check("10b", bit_equal(intra_block_forward(block, in), compressed),
                      "zeroed block output compression: block output equals its compressed "
                      "input exactly"));
  return out;
}

struct Criterion {
  int number;
  std::function<std::vector<Line>()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, bicubic_set5},   {2, substitution},      {3, gradients},
      {4, shapes},         {5, parameters},        {6, overfit},
      {7, ablation_structure}, {8, ablation_training}, {9, determinism},
      {10, skip_paths},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  // "5b" selects criterion 5 and keeps only that line; "5" keeps all of it.
  auto selects = [&](int number, const std::string& id) {
    if (wanted.empty()) return true;
    for (const std::string& w : wanted) {
      if (w == std::to_string(number) || w == id) return true;
    }
    return false;
  };
  auto needed = [&](int number) {
    if (wanted.empty()) return true;
    for (const std::string& w : wanted) {
      if (std::atoi(w.c_str()) == number) return true;
    }
    return false;
  };

  // Optional append-only copy of every printed line.
  std::FILE* log = nullptr;
  if (const char* path = std::getenv("DBDN_ACCEPTANCE_LOG")) log = std::fopen(path, "a");

  int failed = 0, ran = 0;
  for (const Criterion& c : all) {
    if (!needed(c.number)) continue;
    std::vector<Line> lines;
    try {
      lines = c.run();
    } catch (const std::exception& e) {
      lines = {{std::to_string(c.number), Status::kFail, std::string("threw: ") + e.what()}};
    }
    for (const Line& l : lines) {
      if (!selects(c.number, l.id)) continue;
      const char* tag = l.status == Status::kPass ? "PASS" : l.status == Status::kFail ? "FAIL" : "SKIP";
      std::printf("[%s] %-5s %s\n", tag, l.id.c_str(), l.text.c_str());
      std::fflush(stdout);
      if (log) {
        std::fprintf(log, "[%s] %-5s %s\n", tag, l.id.c_str(), l.text.c_str());
        std::fflush(log);
      }
      if (l.status == Status::kFail) ++failed;
      if (l.status != Status::kSkip) ++ran;
    }
  }
  if (log) std::fclose(log);
  if (failed > 0) return 1;
  return ran == 0 ? 77 : 0;
}
