#include "lowlight/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "lowlight/lighting.hpp"
#include "lowlight/nonlocal.hpp"
#include "lowlight/png_io.hpp"

namespace lowlight::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::synthesize, "synthesize"}, {Command::degrade, "degrade"},     {Command::enhance, "enhance"},
    {Command::evaluate, "evaluate"},     {Command::pr_export, "pr-export"}, {Command::gradcheck, "gradcheck"},
    {Command::consensus, "consensus"},   {Command::split, "split"},
};

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string("missing required option ") + flag);
}

/// Refuse to overwrite any input of the command.
void require_distinct(const fs::path& output, std::initializer_list<fs::path> inputs) {
  if (output.empty()) return;
  for (const auto& in : inputs) {
    if (in.empty()) continue;
    std::error_code ec;
    if (in == output || fs::equivalent(in, output, ec))
      throw UsageError("output " + output.string() + " would overwrite input " + in.string());
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out.flush()) throw IoError("failed writing " + p.string());
}

json parse_json(const std::string& text, const fs::path& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError("invalid JSON in " + origin.string() + ": " + e.what());
  }
}

fs::path default_sidecar(const RunConfig& cfg) {
  if (!cfg.sidecar.empty()) return cfg.sidecar;
  fs::path p = cfg.output;
  p.replace_extension(".scatter.json");
  return p;
}

void write_sidecar(const fs::path& path, const RunConfig& cfg) {
  const json doc = {{"alpha", cfg.alpha}, {"t_min", cfg.t_min}, {"seed", cfg.seed}, {"t_radius", cfg.t_radius}};
  write_text(path, doc.dump(2) + "\n");
}

/// t_min from the sidecar if one is given, else the configured value.
double sidecar_t_min(const RunConfig& cfg) {
  if (cfg.sidecar.empty()) return cfg.t_min;
  const json doc = parse_json(read_text(cfg.sidecar), cfg.sidecar);
  if (!doc.is_object() || !doc.contains("t_min") || !doc["t_min"].is_number())
    throw DomainError("sidecar " + cfg.sidecar.string() + " lacks numeric t_min");
  return doc["t_min"].get<double>();
}

AtmosphericLightMap<double> load_light(const fs::path& p) { return AtmosphericLightMap<double>(read_png_plane(p)); }

TransmissionMap<double> load_transmission(const fs::path& p, double t_min) {
  return TransmissionMap<double>::clamped(read_png_plane(p), t_min);
}

// Round-trip fields through their 8-bit encoding so that what is written is
// exactly what a later command reads back.
Plane<double> quantized(const Plane<double>& p) {
  const auto bytes = plane_to_bytes(p);
  return from_bytes<double>(bytes, p.rows(), p.cols(), 1).plane();
}

int cmd_synthesize(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  require_path(cfg.light_out, "--a-out");
  require_path(cfg.transmission_out, "--t-out");
  const fs::path side = default_sidecar(cfg);
  for (const auto& o : {cfg.output, cfg.light_out, cfg.transmission_out, side}) require_distinct(o, {cfg.input});

  const auto bright = read_png(cfg.input);
  const auto pair = synthesize_pair(bright, ScatterParams{cfg.alpha, cfg.seed}, cfg.t_radius, cfg.seed, cfg.t_min);
  const AtmosphericLightMap<double> a(quantized(pair.light.values()));
  const auto t = TransmissionMap<double>::clamped(quantized(pair.transmission.values()), cfg.t_min);
  write_png(cfg.output, degrade(bright, t, a));
  write_png_plane(cfg.light_out, a.values());
  write_png_plane(cfg.transmission_out, t.values());
  write_sidecar(side, cfg);
  out << "wrote " << cfg.output.string() << ", " << cfg.light_out.string() << ", " << cfg.transmission_out.string()
      << ", " << side.string() << "\n";
  return kOk;
}

int cmd_degrade(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  require_path(cfg.light, "--a");
  require_path(cfg.transmission, "--t");
  require_distinct(cfg.output, {cfg.input, cfg.light, cfg.transmission, cfg.sidecar});

  const auto clean = read_png(cfg.input);
  const auto a = load_light(cfg.light);
  const auto t = load_transmission(cfg.transmission, sidecar_t_min(cfg));
  write_png(cfg.output, degrade(clean, t, a));
  out << "wrote " << cfg.output.string() << "\n";
  return kOk;
}

int cmd_enhance(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  if (cfg.light.empty() != cfg.transmission.empty()) throw UsageError("--a and --t must be given together");
  for (const auto& o : {cfg.output, cfg.light_out, cfg.transmission_out})
    require_distinct(o, {cfg.input, cfg.light, cfg.transmission, cfg.sidecar});

  const auto observed = read_png(cfg.input);
  if (!cfg.light.empty()) {
    const auto a = load_light(cfg.light);
    const auto t = load_transmission(cfg.transmission, sidecar_t_min(cfg));
    write_png(cfg.output, enhance(observed, t, a));
    out << "wrote " << cfg.output.string() << "\n";
    return kOk;
  }

  const auto dc = dark_channel(observed, cfg.radius);
  const auto a = estimate_atmospheric_light(observed, dc, cfg.top_fraction);
  auto t = init_transmission(observed, a, cfg.omega, cfg.radius, cfg.t_min);
  if (cfg.refine) t = refine_transmission(t, cfg.refine_cfg).transmission;
  write_png(cfg.output, enhance(observed, t, a));
  if (!cfg.light_out.empty()) write_png_plane(cfg.light_out, a.values());
  if (!cfg.transmission_out.empty()) write_png_plane(cfg.transmission_out, t.values());
  out << "wrote " << cfg.output.string() << " (A=" << a(0, 0) << ")\n";
  return kOk;
}

std::vector<EvalPair> load_pairs(const RunConfig& cfg) {
  std::vector<std::pair<fs::path, fs::path>> paths;
  if (!cfg.list.empty()) {
    if (!cfg.saliency.empty() || !cfg.gt.empty()) throw UsageError("use either --list or --saliency/--gt");
    std::istringstream lines(read_text(cfg.list));
    const fs::path base = cfg.list.parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      std::istringstream fields(line);
      std::string sal, gt, extra;
      if (!(fields >> sal)) continue;
      if (sal.front() == '#') continue;
      if (!(fields >> gt) || (fields >> extra))
        throw DomainError(cfg.list.string() + ":" + std::to_string(lineno) + ": expected '<saliency> <gt>'");
      const auto resolve = [&base](const std::string& s) { return fs::path(s).is_absolute() ? fs::path(s) : base / s; };
      paths.emplace_back(resolve(sal), resolve(gt));
    }
  } else {
    require_path(cfg.saliency, "--saliency or --list");
    require_path(cfg.gt, "--gt");
    paths.emplace_back(cfg.saliency, cfg.gt);
  }

  std::vector<EvalPair> pairs;
  for (const auto& [sal, gt] : paths) {
    auto s = read_png(sal);
    const auto g = read_png(gt);
    if (s.channels() != 1 || g.channels() != 1)
      throw DimensionError("saliency map and ground truth must be grayscale: " + sal.string());
    pairs.push_back({sal.filename().string(), std::move(s), mask_from_image(g)});
  }
  return pairs;
}

EvalOptions eval_options(const RunConfig& cfg) { return {cfg.n_thresholds, cfg.beta_sq, cfg.jobs}; }

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.report, "--report");
  require_distinct(cfg.report, {cfg.list, cfg.saliency, cfg.gt});
  require_distinct(cfg.csv, {cfg.list, cfg.saliency, cfg.gt, cfg.report});
  const auto pairs = load_pairs(cfg);
  const EvalReport report = evaluate_dataset(pairs, eval_options(cfg));
  write_text(cfg.report, report_to_json(report));
  if (!cfg.csv.empty()) write_text(cfg.csv, curve_to_csv(report.curve));
  out << "images=" << report.n_images << " mae=" << report.mae << " max_f_beta=" << report.max_f_beta << "\n";
  return kOk;
}

int cmd_pr_export(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.csv, "--csv");
  require_distinct(cfg.csv, {cfg.list, cfg.saliency, cfg.gt});
  const auto pairs = load_pairs(cfg);
  const EvalReport report = evaluate_dataset(pairs, eval_options(cfg));
  write_text(cfg.csv, curve_to_csv(report.curve));
  out << "wrote " << report.curve.points.size() << " points to " << cfg.csv.string() << "\n";
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  double worst = 0.0;
  std::size_t entries = 0;
  for (int i = 0; i < cfg.instances; ++i) {
    const auto r = nl_gradcheck(cfg.size, cfg.channels, cfg.seed + static_cast<std::uint64_t>(i));
    worst = std::max(worst, r.max_relative_error);
    entries += r.entries_checked;
  }
  const bool ok = worst < kGradcheckTolerance;
  out << "max_relative_error=" << std::scientific << std::setprecision(3) << worst << std::defaultfloat
      << " entries=" << entries << " tolerance=" << kGradcheckTolerance << (ok ? " PASS" : " FAIL") << "\n";
  return ok ? kOk : kGradcheckFailed;
}

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4 || !std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number_integer(); }))
    throw DomainError("annotation boxes must be [x, y, w, h] integer arrays");
  BoundingBox b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  b.validate();
  return b;
}

int cmd_consensus(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  require_distinct(cfg.output, {cfg.input});
  const json doc = parse_json(read_text(cfg.input), cfg.input);
  if (!doc.is_array()) throw DomainError("annotations: top level must be an array");
  if (!cfg.mask_dir.empty()) fs::create_directories(cfg.mask_dir);

  json result = json::array();
  std::size_t kept = 0;
  std::size_t dropped = 0;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("image_id") || !item.contains("height") || !item.contains("width") ||
        !item.contains("annotators"))
      throw DomainError("annotations: each record needs image_id, height, width, annotators");
    AnnotationRecord record;
    record.image_id = item["image_id"].get<std::string>();
    const auto height = item["height"].get<Index>();
    const auto width = item["width"].get<Index>();
    for (const auto& a : item["annotators"]) {
      AnnotatorBoxes boxes;
      boxes.annotator_id = a.at("id").get<std::string>();
      for (const auto& b : a.at("boxes")) boxes.boxes.push_back(box_from_json(b));
      record.annotator_boxes.push_back(std::move(boxes));
    }
    const auto outcomes = apply_consensus(record, height, width, cfg.consensus_threshold);
    json objects = json::array();
    for (const auto& o : outcomes) {
      json entry = {{"accepted", o.accepted()}, {"min_pairwise_iou", o.min_pairwise_iou}};
      entry["region"] = o.region ? json::array({o.region->x, o.region->y, o.region->w, o.region->h}) : json();
      objects.push_back(std::move(entry));
      ++(o.accepted() ? kept : dropped);
    }
    result.push_back({{"image_id", record.image_id}, {"objects", std::move(objects)}});
    if (!cfg.mask_dir.empty() && record.consensus)
      write_png(cfg.mask_dir / (record.image_id + ".png"), image_from_mask(*record.consensus));
  }
  write_text(cfg.output, result.dump(2) + "\n");
  out << "objects kept=" << kept << " dropped=" << dropped << "\n";
  return kOk;
}

int cmd_split(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.input, "--input");
  require_path(cfg.output, "--output");
  require_distinct(cfg.output, {cfg.input});
  const Manifest m = load_manifest(cfg.input);
  const SplitResult r = split_manifest(m, cfg.train_fraction, cfg.seed);
  save_manifest(r.manifest, cfg.output);
  out << "train=" << r.summary.total.train << " test=" << r.summary.total.test << "\n";
  for (const auto& [stage, c] : r.summary.by_stage)
    out << "  " << to_string(stage) << ": train=" << c.train << " test=" << c.test << "\n";
  for (const auto& [type, c] : r.summary.by_object_type)
    out << "  " << to_string(type) << ": train=" << c.train << " test=" << c.test << "\n";
  return kOk;
}

}  // namespace

void RunConfig::validate() const {
  detail::require_domain(alpha >= 0.0 && alpha <= 1.0, "--alpha must lie in [0, 1]");
  detail::require_domain(t_min > 0.0 && t_min < 1.0, "--t-min must lie in (0, 1)");
  detail::require_domain(omega > 0.0 && omega <= 1.0, "--omega must lie in (0, 1]");
  detail::require_domain(radius >= 0, "--radius must be nonnegative");
  detail::require_domain(t_radius >= 0, "--t-radius must be nonnegative");
  detail::require_domain(n_thresholds >= 2, "--n-thresholds must be at least 2");
  detail::require_domain(beta_sq > 0.0, "--beta-sq must be positive");
  detail::require_domain(top_fraction > 0.0 && top_fraction <= 1.0, "--top-fraction must lie in (0, 1]");
  refine_cfg.validate();
  detail::require_domain(train_fraction > 0.0 && train_fraction < 1.0, "--train-fraction must lie in (0, 1)");
  detail::require_domain(consensus_threshold >= 0.0 && consensus_threshold <= 1.0, "--threshold must lie in [0, 1]");
  detail::require_domain(channels >= 2 && channels % 2 == 0, "--channels must be even and at least 2");
  detail::require_domain(size >= 1, "--size must be positive");
  detail::require_domain(instances >= 1, "--instances must be positive");
  detail::require_domain(jobs >= 1, "--jobs must be positive");
}

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [c, n] : kCommands)
    if (n == name) return c;
  return std::nullopt;
}

std::string_view command_name(Command c) {
  for (const auto& [cmd, n] : kCommands)
    if (cmd == c) return n;
  return "";
}

std::string report_to_json(const EvalReport& report) {
  json curve = json::array();
  for (const auto& p : report.curve.points) curve.push_back({p.threshold, p.precision, p.recall});
  json per_image = json::array();
  for (const auto& r : report.per_image) per_image.push_back({{"id", r.id}, {"mae", r.mae}, {"best_f", r.best_f}});
  const json doc = {{"mae", report.mae},           {"max_f_beta", report.max_f_beta},
                    {"beta_sq", report.beta_sq},   {"n_images", report.n_images},
                    {"curve", std::move(curve)},   {"per_image", std::move(per_image)}};
  return doc.dump(2) + "\n";
}

std::string curve_to_csv(const PRCurve& curve) {
  std::string out = "threshold,precision,recall\n";
  char line[96];
  for (const auto& p : curve.points) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f\n", p.threshold, p.precision, p.recall);
    out += line;
  }
  return out;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    switch (config.command) {
      case Command::synthesize:
        return cmd_synthesize(config, out);
      case Command::degrade:
        return cmd_degrade(config, out);
      case Command::enhance:
        return cmd_enhance(config, out);
      case Command::evaluate:
        return cmd_evaluate(config, out);
      case Command::pr_export:
        return cmd_pr_export(config, out);
      case Command::gradcheck:
        return cmd_gradcheck(config, out);
      case Command::consensus:
        return cmd_consensus(config, out);
      case Command::split:
        return cmd_split(config, out);
    }
    throw UsageError("unknown command");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const json::exception& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace lowlight::cli
