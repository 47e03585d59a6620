#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lowlight/cli.hpp"
#include "lowlight/png_io.hpp"

using namespace lowlight;
using namespace lowlight::cli;
namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(fs::temp_directory_path() / ("lowlight_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_quiet(const RunConfig& cfg) {
  std::ostringstream out, err;
  return run(cfg, out, err);
}

int shell(const std::string& args) {
  const std::string cmd = std::string(LOWLIGHT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ImageGrid<double> random_rgb(std::uint64_t seed, Index h, Index w) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h * w * 3));
  for (auto& b : raw) b = static_cast<std::uint8_t>(byte(rng));
  return from_bytes<double>(raw, h, w, 3);
}

void write_gray(const fs::path& p, const std::vector<std::uint8_t>& v, Index h, Index w) {
  write_png_bytes(p, ByteImage{h, w, 1, v});
}

}  // namespace

TEST_CASE("command names round trip") {
  for (auto c : {Command::synthesize, Command::degrade, Command::enhance, Command::evaluate, Command::pr_export,
                 Command::gradcheck, Command::consensus, Command::split})
    CHECK(parse_command(command_name(c)) == c);
  CHECK(!parse_command("bogus"));
  CHECK(command_name(Command::pr_export) == "pr-export");
}

TEST_CASE("binary exit codes") {
  Workdir dir("exit");
  CHECK(shell("gradcheck --channels 4 --size 4 --seed 7") == kOk);
  CHECK(shell("") == kUsage);
  CHECK(shell("nonsense") == kUsage);
  CHECK(shell("enhance --input only.png") == kUsage);
  CHECK(shell("enhance --input " + (dir / "missing.png").string() + " --output " + (dir / "o.png").string()) == kIo);
  CHECK(shell("gradcheck --channels 3") == kValidation);
  CHECK(shell("evaluate --report r.json --saliency a.png --gt b.png --beta-sq -1") == kValidation);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(shell("split --input " + (dir / "bad.json").string() + " --output " + (dir / "out.json").string()) == kValidation);
  CHECK(shell("--help") == kOk);
}

TEST_CASE("gradcheck summary line") {
  RunConfig cfg;
  cfg.command = Command::gradcheck;
  cfg.instances = 3;
  cfg.seed = 7;
  std::ostringstream out, err;
  CHECK(run(cfg, out, err) == kOk);
  CHECK(out.str().find("PASS") != std::string::npos);
  CHECK(out.str().find("entries=" + std::to_string(3 * (16 * 4 + 32))) != std::string::npos);
}

TEST_CASE("synthesize writes a consistent triple and is bit-reproducible") {
  Workdir dir("synth");
  write_png(dir / "bright.png", random_rgb(1, 24, 32));
  RunConfig cfg;
  cfg.command = Command::synthesize;
  cfg.input = dir / "bright.png";
  cfg.output = dir / "low.png";
  cfg.light_out = dir / "a.png";
  cfg.transmission_out = dir / "t.png";
  cfg.seed = 5;
  REQUIRE(run_quiet(cfg) == kOk);
  const auto first = slurp(dir / "low.png");
  const auto first_t = slurp(dir / "t.png");
  const auto side = nlohmann::json::parse(slurp(dir / "low.scatter.json"));
  CHECK(side["alpha"] == 0.5);
  CHECK(side["t_min"] == 0.1);
  CHECK(side["seed"] == 5);
  const auto input_before = slurp(dir / "bright.png");
  REQUIRE(run_quiet(cfg) == kOk);
  CHECK(slurp(dir / "low.png") == first);
  CHECK(slurp(dir / "t.png") == first_t);
  CHECK(slurp(dir / "bright.png") == input_before);

  // Re-degrading from the saved maps reproduces the saved observation.
  RunConfig d;
  d.command = Command::degrade;
  d.input = dir / "bright.png";
  d.output = dir / "low2.png";
  d.light = dir / "a.png";
  d.transmission = dir / "t.png";
  d.sidecar = dir / "low.scatter.json";
  REQUIRE(run_quiet(d) == kOk);
  CHECK(slurp(dir / "low2.png") == first);

  cfg.seed = 6;
  REQUIRE(run_quiet(cfg) == kOk);
  CHECK(slurp(dir / "t.png") != first_t);
}

TEST_CASE("degrade then enhance with stored maps is within one grey level") {
  Workdir dir("roundtrip");
  const auto j = random_rgb(2, 20, 20);
  write_png(dir / "j.png", j);
  // The 8-bit error of I is amplified by 1/t on inversion, so t >= 0.5 keeps
  // the round trip within one level.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> tb(128, 255), ab(128, 255);
  std::vector<std::uint8_t> t(400), a(400);
  for (auto& v : t) v = static_cast<std::uint8_t>(tb(rng));
  for (auto& v : a) v = static_cast<std::uint8_t>(ab(rng));
  write_gray(dir / "t.png", t, 20, 20);
  write_gray(dir / "a.png", a, 20, 20);

  RunConfig d;
  d.command = Command::degrade;
  d.input = dir / "j.png";
  d.output = dir / "i.png";
  d.light = dir / "a.png";
  d.transmission = dir / "t.png";
  REQUIRE(run_quiet(d) == kOk);
  RunConfig e = d;
  e.command = Command::enhance;
  e.input = dir / "i.png";
  e.output = dir / "j2.png";
  REQUIRE(run_quiet(e) == kOk);
  const auto back = read_png_bytes(dir / "j2.png");
  const auto orig = to_bytes(j);
  int worst = 0;
  for (std::size_t i = 0; i < orig.size(); ++i) worst = std::max(worst, std::abs(int(back.data[i]) - int(orig[i])));
  CHECK(worst <= 1);
}

TEST_CASE("blind enhance is deterministic and writes estimates") {
  Workdir dir("enhance");
  write_png(dir / "in.png", random_rgb(4, 40, 30));
  RunConfig cfg;
  cfg.command = Command::enhance;
  cfg.input = dir / "in.png";
  cfg.output = dir / "out.png";
  cfg.light_out = dir / "a.png";
  cfg.transmission_out = dir / "t.png";
  REQUIRE(run_quiet(cfg) == kOk);
  const auto first = slurp(dir / "out.png");
  REQUIRE(run_quiet(cfg) == kOk);
  CHECK(slurp(dir / "out.png") == first);
  const auto t = read_png_bytes(dir / "t.png");
  CHECK(t.channels == 1);
  CHECK(t.height == 40);
  cfg.refine = false;
  REQUIRE(run_quiet(cfg) == kOk);

  RunConfig clash = cfg;
  clash.output = clash.input;
  CHECK(run_quiet(clash) == kUsage);
  RunConfig half = cfg;
  half.light = dir / "a.png";
  CHECK(run_quiet(half) == kUsage);
}

TEST_CASE("evaluate on the ground truth itself") {
  Workdir dir("eval");
  std::vector<std::uint8_t> gt(64, 0);
  for (int i = 10; i < 30; ++i) gt[static_cast<std::size_t>(i)] = 255;
  write_gray(dir / "gt.png", gt, 8, 8);
  RunConfig cfg;
  cfg.command = Command::evaluate;
  cfg.saliency = dir / "gt.png";
  cfg.gt = dir / "gt.png";
  cfg.report = dir / "report.json";
  cfg.csv = dir / "pr.csv";
  REQUIRE(run_quiet(cfg) == kOk);
  const auto doc = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(doc["mae"] == 0.0);
  CHECK(doc["max_f_beta"] == 1.0);
  CHECK(doc["beta_sq"] == 0.3);
  CHECK(doc["n_images"] == 1);
  CHECK(doc["curve"].size() == 256);
  CHECK(doc["curve"][255].size() == 3);

  std::istringstream csv(slurp(dir / "pr.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "threshold,precision,recall");
  std::getline(csv, line);
  CHECK(line == "0.000000,0.312500,1.000000");
  int rows = 1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 256);
}

TEST_CASE("evaluate with a list file matches pr-export and is job independent") {
  Workdir dir("evallist");
  fs::create_directories(dir / "maps");
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> byte(0, 255);
  std::ofstream list(dir / "pairs.txt");
  list << "# saliency gt\n";
  for (int k = 0; k < 5; ++k) {
    std::vector<std::uint8_t> s(100), g(100);
    for (auto& v : s) v = static_cast<std::uint8_t>(byte(rng));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (i + static_cast<std::size_t>(k)) % 3 == 0 ? 255 : 0;
    write_gray(dir / ("maps/s" + std::to_string(k) + ".png"), s, 10, 10);
    write_gray(dir / ("maps/g" + std::to_string(k) + ".png"), g, 10, 10);
    list << "maps/s" << k << ".png maps/g" << k << ".png\n";
  }
  list.close();

  RunConfig cfg;
  cfg.command = Command::evaluate;
  cfg.list = dir / "pairs.txt";
  cfg.report = dir / "r1.json";
  cfg.csv = dir / "c1.csv";
  REQUIRE(run_quiet(cfg) == kOk);
  cfg.jobs = 4;
  cfg.report = dir / "r4.json";
  cfg.csv = dir / "c4.csv";
  REQUIRE(run_quiet(cfg) == kOk);
  CHECK(slurp(dir / "r1.json") == slurp(dir / "r4.json"));
  CHECK(slurp(dir / "c1.csv") == slurp(dir / "c4.csv"));

  RunConfig pr;
  pr.command = Command::pr_export;
  pr.list = dir / "pairs.txt";
  pr.csv = dir / "pr.csv";
  REQUIRE(run_quiet(pr) == kOk);
  CHECK(slurp(dir / "pr.csv") == slurp(dir / "c1.csv"));

  const auto doc = nlohmann::json::parse(slurp(dir / "r1.json"));
  CHECK(doc["n_images"] == 5);
  CHECK(doc["per_image"][0]["id"] == "s0.png");

  std::ofstream(dir / "broken.txt") << "maps/s0.png\n";
  pr.list = dir / "broken.txt";
  CHECK(run_quiet(pr) == kValidation);
  RunConfig both = cfg;
  both.saliency = dir / "maps/s0.png";
  CHECK(run_quiet(both) == kUsage);
}

TEST_CASE("split command writes tags and leaves the input alone") {
  Workdir dir("split");
  nlohmann::json doc = nlohmann::json::array();
  for (int i = 0; i < 577; ++i)
    doc.push_back({{"image", "i" + std::to_string(i)}, {"gt", "g" + std::to_string(i)}, {"split", "test"},
                   {"stage", i % 2 ? "stage1_7to9pm" : "stage2_9to11pm"}, {"object_type", "vehicle"}});
  std::ofstream(dir / "m.json") << doc.dump();
  const auto before = slurp(dir / "m.json");
  RunConfig cfg;
  cfg.command = Command::split;
  cfg.input = dir / "m.json";
  cfg.output = dir / "tagged.json";
  cfg.seed = 11;
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == kOk);
  CHECK(out.str().rfind("train=457 test=120", 0) == 0);
  CHECK(slurp(dir / "m.json") == before);
  const auto first = slurp(dir / "tagged.json");
  REQUIRE(run_quiet(cfg) == kOk);
  CHECK(slurp(dir / "tagged.json") == first);
  const auto m = load_manifest(dir / "tagged.json");
  std::size_t train = 0;
  for (const auto& e : m.entries) train += e.split == Split::train;
  CHECK(train == 457);
}

TEST_CASE("consensus command") {
  Workdir dir("consensus");
  const auto doc = nlohmann::json::parse(R"([
    {"image_id": "a", "height": 40, "width": 40, "annotators": [
      {"id": "u1", "boxes": [[0, 0, 20, 20], [30, 30, 5, 5]]},
      {"id": "u2", "boxes": [[1, 0, 20, 20], [0, 0, 5, 5]]},
      {"id": "u3", "boxes": [[0, 1, 20, 20], [30, 30, 5, 5]]}]},
    {"image_id": "b", "height": 10, "width": 10, "annotators": [
      {"id": "u1", "boxes": [[0, 0, 4, 4]]},
      {"id": "u2", "boxes": [[6, 6, 4, 4]]}]}
  ])");
  std::ofstream(dir / "ann.json") << doc.dump();
  RunConfig cfg;
  cfg.command = Command::consensus;
  cfg.input = dir / "ann.json";
  cfg.output = dir / "out.json";
  cfg.mask_dir = dir / "masks";
  REQUIRE(run_quiet(cfg) == kOk);
  const auto res = nlohmann::json::parse(slurp(dir / "out.json"));
  REQUIRE(res.size() == 2);
  CHECK(res[0]["objects"][0]["accepted"] == true);
  CHECK(res[0]["objects"][0]["region"] == nlohmann::json::array({1, 1, 19, 19}));
  CHECK(res[0]["objects"][1]["accepted"] == false);
  CHECK(res[0]["objects"][1]["region"].is_null());
  CHECK(res[1]["objects"][0]["accepted"] == false);
  CHECK(fs::exists(dir / "masks/a.png"));
  CHECK(!fs::exists(dir / "masks/b.png"));
  const auto mask = read_png_bytes(dir / "masks/a.png");
  CHECK(std::count(mask.data.begin(), mask.data.end(), 255) == 19 * 19);

  std::ofstream(dir / "bad.json") << R"([{"image_id": "x", "height": 4, "width": 4, "annotators": [{"id": "u", "boxes": [[0, 0, 1, 1]]}]}])";
  cfg.input = dir / "bad.json";
  CHECK(run_quiet(cfg) == kValidation);
}
