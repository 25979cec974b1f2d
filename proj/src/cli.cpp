#include "dbdn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "dbdn/checkpoint.hpp"
#include "dbdn/data.hpp"
#include "dbdn/gradcheck.hpp"
#include "dbdn/image.hpp"
#include "dbdn/metrics.hpp"

namespace dbdn {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_int(const std::string& key, const std::string& value) {
  T v{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join_scales(const std::vector<int>& scales) {
  std::string s;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(scales[i]);
  }
  return s;
}

const std::vector<std::string> kCommands{"train", "eval", "sr", "count-params", "grad-check",
                                         "prepare-data"};

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "command", "variant", "scale",   "blocks",  "layers",           "nr",
      "ng",      "prepend_extraction", "data",    "checkpoint",       "input",
      "output",  "resume",  "val_data", "seed",   "steps",            "lr",
      "halve_every", "batch", "patch", "checkpoint_every", "deterministic", "workers",
      "baseline", "triptych", "op",    "scales"};
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "command") {
    if (std::find(kCommands.begin(), kCommands.end(), value) == kCommands.end()) {
      throw ConfigError("command: unknown command '" + value + "'");
    }
    command = value;
  } else if (key == "variant") {
    try {
      model.variant = parse_variant(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "scale") {
    model.scale = parse_int<int>(key, value);
  } else if (key == "blocks") {
    model.blocks = parse_int<int>(key, value);
  } else if (key == "layers") {
    model.layers = parse_int<int>(key, value);
  } else if (key == "nr") {
    model.n_r = parse_int<int>(key, value);
  } else if (key == "ng") {
    model.n_g = parse_int<int>(key, value);
  } else if (key == "prepend_extraction") {
    model.prepend_extraction = parse_bool(key, value);
  } else if (key == "data") {
    data = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "input") {
    input = value;
  } else if (key == "output") {
    output = value;
  } else if (key == "resume") {
    resume = value;
  } else if (key == "val_data") {
    val_data = value;
  } else if (key == "seed") {
    seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "steps") {
    schedule.total = parse_int<std::uint64_t>(key, value);
  } else if (key == "lr") {
    schedule.lr0 = parse_double(key, value);
    if (!(schedule.lr0 > 0.0)) throw ConfigError("lr must be positive");
  } else if (key == "halve_every") {
    schedule.halve_every = parse_int<std::uint64_t>(key, value);
    if (schedule.halve_every == 0) throw ConfigError("halve_every must be positive");
  } else if (key == "batch") {
    schedule.batch = parse_int<int>(key, value);
    if (schedule.batch < 1) throw ConfigError("batch must be positive");
  } else if (key == "patch") {
    schedule.hr_patch = parse_int<int>(key, value);
    if (schedule.hr_patch < 1) throw ConfigError("patch must be positive");
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_int<std::uint64_t>(key, value);
  } else if (key == "deterministic") {
    deterministic = parse_bool(key, value);
  } else if (key == "workers") {
    workers = parse_int<int>(key, value);
    if (workers < 1) throw ConfigError("workers must be >= 1");
  } else if (key == "baseline") {
    if (!value.empty() && value != "bicubic") {
      throw ConfigError("baseline: only 'bicubic' is supported, got '" + value + "'");
    }
    baseline = value;
  } else if (key == "triptych") {
    triptych = parse_bool(key, value);
  } else if (key == "op") {
    const auto& ops = gradcheck_op_names();
    if (value != "all" && value != "network" &&
        std::find(ops.begin(), ops.end(), value) == ops.end()) {
      throw ConfigError("op: unknown op '" + value + "'");
    }
    op = value;
  } else if (key == "scales") {
    std::vector<int> parsed;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) parsed.push_back(parse_int<int>(key, trim(item)));
    if (parsed.empty()) throw ConfigError("scales: empty list");
    for (int s : parsed) {
      if (s < 2 || s > 4) throw ConfigError("scales: each scale must be 2, 3 or 4");
    }
    scales = parsed;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {{"command", command},
          {"variant", std::string(variant_name(model.variant))},
          {"scale", std::to_string(model.scale)},
          {"blocks", std::to_string(model.blocks)},
          {"layers", std::to_string(model.layers)},
          {"nr", std::to_string(model.n_r)},
          {"ng", std::to_string(model.n_g)},
          {"prepend_extraction", b(model.prepend_extraction)},
          {"data", data.string()},
          {"checkpoint", checkpoint.string()},
          {"input", input.string()},
          {"output", output.string()},
          {"resume", resume.string()},
          {"val_data", val_data.string()},
          {"seed", std::to_string(seed)},
          {"steps", std::to_string(schedule.total)},
          {"lr", format_double(schedule.lr0)},
          {"halve_every", std::to_string(schedule.halve_every)},
          {"batch", std::to_string(schedule.batch)},
          {"patch", std::to_string(schedule.hr_patch)},
          {"checkpoint_every", std::to_string(checkpoint_every)},
          {"deterministic", b(deterministic)},
          {"workers", std::to_string(workers)},
          {"baseline", baseline},
          {"triptych", b(triptych)},
          {"op", op},
          {"scales", join_scales(scales)}};
}

std::string RunConfig::echo() const {
  std::string s;
  for (const auto& [k, v] : entries()) s += k + "=" + v + "\n";
  return s;
}

RunConfig apply_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    base.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

namespace {

class CommandFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_echo(const RunConfig& cfg, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  f << cfg.echo();
  if (!f) throw CommandFailure("cannot write " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw CommandFailure("cannot write " + path.string());
}

void require_path(const fs::path& p, const std::string& flag) {
  if (p.empty()) throw ConfigError(flag + " is required");
}

ImageRGB side_by_side(const std::vector<ImageRGB>& images) {
  int h = 0, w = 0;
  for (const ImageRGB& im : images) {
    h = std::max(h, im.h);
    w += im.w;
  }
  ImageRGB out(h, w);
  int x0 = 0;
  for (const ImageRGB& im : images) {
    for (int y = 0; y < im.h; ++y)
      for (int x = 0; x < im.w; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x0 + x, c) = im.at(y, x, c);
    x0 += im.w;
  }
  return out;
}

std::vector<EvalSample> eval_samples_from(const fs::path& dir, int scale,
                                          std::vector<std::string>* skipped) {
  if (!fs::exists(dir)) throw CommandFailure("data directory " + dir.string() + " not found");
  if (fs::exists(dir / kManifestName)) {
    const DatasetIndex index = read_manifest(dir);
    if (std::find(index.scales.begin(), index.scales.end(), scale) == index.scales.end()) {
      throw CommandFailure("prepared dataset " + dir.string() + " has no x" +
                           std::to_string(scale) + " cache");
    }
    return load_eval_samples(index, scale);
  }
  return load_eval_samples(dir, scale, skipped);
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.data, "--data");
  require_path(cfg.output, "--output");
  if (!fs::exists(cfg.data / kManifestName)) {
    throw CommandFailure("no prepared dataset at " + cfg.data.string() +
                         " (expected " + kManifestName + "; run prepare-data first)");
  }
  const DatasetIndex index = read_manifest(cfg.data);
  if (std::find(index.scales.begin(), index.scales.end(), cfg.model.scale) ==
      index.scales.end()) {
    throw CommandFailure("prepared dataset has no x" + std::to_string(cfg.model.scale) + " cache");
  }
  const TrainingSet set = load_training_set(index, cfg.model.scale);
  if (set.hr.empty()) throw CommandFailure("prepared dataset is empty");
  fs::create_directories(cfg.output);
  write_echo(cfg, cfg.output / "config.txt");

  TrainOptions opts;
  opts.output_dir = cfg.output;
  opts.checkpoint_every = cfg.checkpoint_every;
  if (!cfg.resume.empty()) opts.resume = cfg.resume;
  const std::uint64_t report = std::max<std::uint64_t>(1, cfg.schedule.total / 20);
  opts.on_step = [&out, report](std::uint64_t step, double lr, double loss) {
    if ((step + 1) % report == 0) {
      out << "step " << step + 1 << " lr " << lr << " loss " << loss << "\n";
    }
  };
  const TrainResult result = train(cfg.model, set, cfg.schedule, cfg.seed, opts);
  out << "trained " << result.steps_done << " steps; wrote " << result.checkpoints.size()
      << " checkpoint(s) to " << cfg.output.string() << "\n";

  if (!cfg.val_data.empty()) {
    const auto samples = eval_samples_from(cfg.val_data, cfg.model.scale, nullptr);
    const EvalReport report_v =
        evaluate(result.net, samples, cfg.model.scale, cfg.deterministic ? 1 : cfg.workers);
    write_text(cfg.output / "validation.csv", report_v.csv());
    out << "validation: " << report_v.summary() << "\n";
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, bool scale_given, std::ostream& out, std::ostream& err) {
  require_path(cfg.data, "--data");
  const bool bicubic = cfg.baseline == "bicubic";
  if (!bicubic && cfg.checkpoint.empty()) {
    throw ConfigError("eval needs --checkpoint or --baseline bicubic");
  }
  if (cfg.triptych && cfg.output.empty()) throw ConfigError("--triptych needs --output");
  std::optional<Network> net;
  int scale = cfg.model.scale;
  if (!bicubic) {
    net = load_checkpoint(cfg.checkpoint);
    if (scale_given && net->config.scale != cfg.model.scale) {
      throw CommandFailure("scale mismatch: checkpoint is x" + std::to_string(net->config.scale) +
                           ", --scale asks for x" + std::to_string(cfg.model.scale));
    }
    scale = net->config.scale;
  }
  std::vector<std::string> skipped;
  const auto samples = eval_samples_from(cfg.data, scale, &skipped);
  for (const std::string& s : skipped) err << "warning: skipped " << s << "\n";
  if (samples.empty()) throw CommandFailure("no evaluable images in " + cfg.data.string());

  const int workers = cfg.deterministic ? 1 : cfg.workers;
  const Upscaler upscale = bicubic ? Upscaler([scale](const ImageRGB& lr) {
    return bicubic_upscale(lr, scale);
  })
                                   : Upscaler([&net](const ImageRGB& lr) {
                                       return network_upscale(*net, lr);
                                     });
  EvalReport report = evaluate_with(upscale, samples, scale, workers);
  report.skipped.insert(report.skipped.end(), skipped.begin(), skipped.end());
  out << report.csv();
  out << report.summary() << "\n";

  if (!cfg.output.empty()) {
    RunConfig resolved = cfg;
    resolved.model.scale = scale;
    fs::create_directories(cfg.output);
    write_echo(resolved, cfg.output / "config.txt");
    const std::string tag = (bicubic ? "bicubic" : "model") + std::string("_x") +
                            std::to_string(scale);
    write_text(cfg.output / ("eval_" + tag + ".csv"), report.csv());
    if (cfg.triptych) {
      for (const EvalSample& s : samples) {
        const ImageRGB sr = quantize(upscale(s.lr));
        const ImageRGB bic = quantize(bicubic_upscale(s.lr, scale));
        save_png(side_by_side({bic, sr, s.hr}), cfg.output / "triptych" / (s.name + ".png"));
      }
    }
  }
  return kExitOk;
}

int cmd_sr(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.checkpoint, "--checkpoint");
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  const Network net = load_checkpoint(cfg.checkpoint);
  const ImageRGB lr = load_image(cfg.input);
  const ImageRGB sr = quantize(network_upscale(net, lr));
  save_png(sr, cfg.output);
  RunConfig resolved = cfg;
  resolved.model = net.config;
  fs::path echo_path = cfg.output;
  echo_path += ".config.txt";
  write_echo(resolved, echo_path);
  out << "wrote " << cfg.output.string() << " (" << sr.w << "x" << sr.h << ")\n";
  return kExitOk;
}

int cmd_count_params(const RunConfig& cfg, std::ostream& out) {
  const Network net = build_network(cfg.model, 0);
  const ParamBreakdown pb = param_breakdown(net);
  out << "variant " << variant_name(cfg.model.variant) << " x" << cfg.model.scale << "\n";
  out << "extraction " << pb.extraction << "\n";
  for (std::size_t b = 0; b < pb.blocks.size(); ++b) {
    out << "block " << b + 1 << " " << pb.blocks[b] << "\n";
  }
  out << "global_compression " << pb.global_compression << "\n";
  out << "upsampler " << pb.upsampler << "\n";
  out << "reconstruction " << pb.reconstruction << "\n";
  out << "total " << pb.total() << "\n";
  if (!cfg.output.empty()) write_echo(cfg, cfg.output / "config.txt");
  return kExitOk;
}

int cmd_grad_check(const RunConfig& cfg, std::ostream& out) {
  std::vector<GradCheckResult> results;
  if (cfg.op == "all") {
    for (const std::string& op : gradcheck_op_names()) results.push_back(check_op(op, cfg.seed));
  } else if (cfg.op != "network") {
    results.push_back(check_op(cfg.op, cfg.seed));
  }
  if (cfg.op == "all" || cfg.op == "network") {
    results.push_back(check_network(gradcheck_network_config(), cfg.seed));
  }
  bool ok = true;
  for (const GradCheckResult& r : results) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-18s max_rel_error %.3e  checked %zu  %s", r.name.c_str(),
                  r.max_rel_error, r.checked, r.passed ? "PASS" : "FAIL");
    out << buf << "\n";
    if (!r.passed) out << "  worst: " << r.worst << "\n";
    ok = ok && r.passed;
  }
  if (!cfg.output.empty()) write_echo(cfg, cfg.output / "config.txt");
  return ok ? kExitOk : kExitFailure;
}

int cmd_prepare_data(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_path(cfg.data, "--data");
  require_path(cfg.output, "--output");
  if (!fs::is_directory(cfg.data)) {
    throw CommandFailure("input directory " + cfg.data.string() + " not found");
  }
  const std::set<int> scales(cfg.scales.begin(), cfg.scales.end());
  const DatasetIndex index = prepare_dataset(cfg.data, scales, cfg.output);
  for (const std::string& s : index.skipped) err << "warning: skipped " << s << "\n";
  write_echo(cfg, cfg.output / "config.txt");
  out << "prepared " << index.entries.size() << " image(s) into " << cfg.output.string() << "\n";
  return index.entries.empty() ? kExitFailure : kExitOk;
}

struct Binding {
  std::string key;
  std::string value;
  bool flag = false;
  bool flag_value = false;
  CLI::Option* option = nullptr;
};

class Bindings {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& key,
              const std::string& help) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.option = app->add_option(name, b.value, help);
  }
  void flag(CLI::App* app, const std::string& name, const std::string& key,
            const std::string& help) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.flag = true;
    b.option = app->add_flag(name, b.flag_value, help);
  }
  void model(CLI::App* app) {
    option(app, "--variant", "variant", "dbdn, dbdn+, wo_inter or wo_comp");
    option(app, "--scale", "scale", "upscaling factor (2, 3 or 4)");
    option(app, "--blocks", "blocks", "intra-dense blocks");
    option(app, "--layers", "layers", "dense layers per block");
    option(app, "--nr", "nr", "feature channels");
    option(app, "--ng", "ng", "growth rate (defaults to --nr)");
    flag(app, "--prepend-extraction", "prepend_extraction",
         "feed extraction features into every block");
  }
  /// Applies the flags given on the command line in registration order.
  void apply(RunConfig& cfg, bool* ng_given) const {
    for (const Binding& b : items_) {
      if (b.option->count() == 0) continue;
      if (b.key == "ng" && ng_given) *ng_given = true;
      cfg.set(b.key, b.flag ? (b.flag_value ? "true" : "false") : b.value);
    }
  }
  bool given(const std::string& key) const {
    for (const Binding& b : items_) {
      if (b.key == key && b.option->count() > 0) return true;
    }
    return false;
  }

 private:
  std::list<Binding> items_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dense bi-directional super-resolution engine", "dbdn"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::map<std::string, std::pair<CLI::App*, Bindings>> subs;
  std::map<std::string, std::string> config_files;
  auto add = [&](const std::string& name, const std::string& help) -> Bindings& {
    auto& entry = subs[name];
    entry.first = app.add_subcommand(name, help);
    entry.first->add_option("--config", config_files[name],
                            "key=value file (e.g. an echoed config.txt)");
    return entry.second;
  };

  {
    Bindings& b = add("train", "train a network on a prepared dataset");
    CLI::App* s = subs["train"].first;
    b.model(s);
    b.option(s, "--data", "data", "prepared dataset directory");
    b.option(s, "--output", "output", "run directory for logs and checkpoints");
    b.option(s, "--resume", "resume", "checkpoint to continue from");
    b.option(s, "--val-data", "val_data", "HR directory evaluated after training");
    b.option(s, "--seed", "seed", "random seed");
    b.option(s, "--steps", "steps", "total training steps");
    b.option(s, "--lr", "lr", "initial learning rate");
    b.option(s, "--halve-every", "halve_every", "steps between learning-rate halvings");
    b.option(s, "--batch", "batch", "patches per step");
    b.option(s, "--patch", "patch", "HR patch size");
    b.option(s, "--checkpoint-every", "checkpoint_every", "steps between checkpoints (0: none)");
    b.option(s, "--workers", "workers", "worker threads for validation");
    b.flag(s, "--deterministic", "deterministic", "single-threaded, reproducible run");
  }
  {
    Bindings& b = add("eval", "score a checkpoint or the bicubic baseline");
    CLI::App* s = subs["eval"].first;
    b.option(s, "--data", "data", "HR directory or prepared dataset");
    b.option(s, "--checkpoint", "checkpoint", "network checkpoint");
    b.option(s, "--baseline", "baseline", "'bicubic' to score bicubic upscaling");
    b.option(s, "--scale", "scale", "upscaling factor");
    b.option(s, "--output", "output", "directory for the report");
    b.option(s, "--workers", "workers", "images scored in parallel");
    b.flag(s, "--triptych", "triptych", "write bicubic | SR | HR comparison images");
    b.flag(s, "--deterministic", "deterministic", "single-threaded evaluation");
  }
  {
    Bindings& b = add("sr", "upscale one image");
    CLI::App* s = subs["sr"].first;
    b.option(s, "--checkpoint", "checkpoint", "network checkpoint");
    b.option(s, "--input", "input", "LR image (PNG or BMP)");
    b.option(s, "--output", "output", "output PNG path");
    b.flag(s, "--deterministic", "deterministic", "no effect; inference is deterministic");
  }
  {
    Bindings& b = add("count-params", "print parameter totals");
    CLI::App* s = subs["count-params"].first;
    b.model(s);
    b.option(s, "--output", "output", "directory for the config echo");
  }
  {
    Bindings& b = add("grad-check", "finite-difference gradient suite");
    CLI::App* s = subs["grad-check"].first;
    b.option(s, "--op", "op", "single op, 'network' or 'all'");
    b.option(s, "--seed", "seed", "random seed");
    b.option(s, "--output", "output", "directory for the config echo");
  }
  {
    Bindings& b = add("prepare-data", "crop and downscale an HR image folder");
    CLI::App* s = subs["prepare-data"].first;
    b.option(s, "--data", "data", "directory of HR images");
    b.option(s, "--output", "output", "prepared dataset directory");
    b.option(s, "--scales", "scales", "comma-separated scales, e.g. 2,3,4");
  }

  std::vector<std::string> argv_store{"dbdn"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Bindings& bindings = subs[command].second;
  RunConfig cfg;
  cfg.command = command;
  bool ng_given = false;
  try {
    const std::string& config_path = config_files[command];
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config file " + config_path);
      std::stringstream ss;
      ss << f.rdbuf();
      RunConfig from_file = apply_config_text(ss.str(), cfg);
      if (from_file.command != command) {
        throw ConfigError("config file is for '" + from_file.command + "', not '" + command + "'");
      }
      std::istringstream lines(ss.str());
      for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && trim(line.substr(0, eq)) == "ng") ng_given = true;
      }
      cfg = from_file;
    }
    bindings.apply(cfg, &ng_given);
    if (!ng_given) cfg.model.n_g = cfg.model.n_r;
    if (cfg.model.variant == Variant::kWithoutComp) cfg.model = ablation_config(cfg.model);
    cfg.model.validate();
    if (cfg.deterministic) cfg.workers = 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (command == "train") return cmd_train(cfg, out);
    if (command == "eval") return cmd_eval(cfg, bindings.given("scale"), out, err);
    if (command == "sr") return cmd_sr(cfg, out);
    if (command == "count-params") return cmd_count_params(cfg, out);
    if (command == "grad-check") return cmd_grad_check(cfg, out);
    if (command == "prepare-data") return cmd_prepare_data(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dbdn
