// Smoke tests for the installed command-line binary. The binary path comes
// in through IDVEIL_CLI_PATH at compile time; each case drives a real
// subprocess and checks the exit-code contract.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "idveil/io/image_io.hpp"
#include "idveil/pipeline/run_config.hpp"
#include "idveil/version.hpp"

using namespace idveil;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("idveil-cli-" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Runs the CLI with the given arguments, stdout and stderr captured into
// log files under the temp dir. Returns the process exit code.
int run_cli(const TempDir& tmp, const std::string& args) {
  const std::string cmd = std::string(IDVEIL_CLI_PATH) + " " + args + " > " +
                          tmp.file("stdout.log") + " 2> " + tmp.file("stderr.log");
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

// Writes the synthetic world, a run config and `count` images; returns the
// config file path.
std::string setup_run(const TempDir& tmp, int count) {
  write_text(tmp.path / "world.kv",
             "synthetic.seed = 23\n"
             "synthetic.layers = 10\n"
             "synthetic.channels = 16\n"
             "synthetic.identity = 5:0-15;6:0-15;7:0-15\n"
             "synthetic.attributes = auto:4x4\n");
  const std::string spec = "synthetic:" + tmp.file("world.kv");
  write_text(tmp.path / "run.kv", "backend = " + spec +
                                      "\n"
                                      "data_dir = " +
                                      tmp.file("data") +
                                      "\n"
                                      "mode = layers\n"
                                      "anon.layers = 5,6,7\n"
                                      "seed = 7\n");
  fs::create_directories(tmp.path / "data");
  const auto backend = make_backend(spec);
  for (int k = 0; k < count; ++k) {
    write_pfm(tmp.file("data/img" + std::to_string(k) + ".pfm"),
              backend->generate(backend->sample_random_latent(1000 + k)));
  }
  return tmp.file("run.kv");
}

}  // namespace

TEST_CASE("cli anonymize runs end to end") {
  TempDir tmp("anon");
  const std::string cfg = setup_run(tmp, 2);
  const int code =
      run_cli(tmp, "anonymize --config " + cfg + " --out " + tmp.file("out"));
  CHECK(code == 0);
  CHECK(fs::exists(tmp.path / "out/run_metadata.json"));
  CHECK(fs::exists(tmp.path / "out/anon/img0.pfm"));
  CHECK(fs::exists(tmp.path / "out/anon/img1.pfm"));
  CHECK(fs::exists(tmp.path / "out/privacy_report.csv"));
  CHECK(read_text(tmp.path / "stdout.log").find("anonymize-layers: 2 images") !=
        std::string::npos);
}

TEST_CASE("cli flags override config file values") {
  TempDir tmp("override");
  const std::string cfg = setup_run(tmp, 1);
  const int code = run_cli(tmp, "anonymize --config " + cfg + " --seed 99 --out " +
                                    tmp.file("out") + " --set anon.layers=5");
  CHECK(code == 0);
  const std::string meta = read_text(tmp.path / "out/run_metadata.json");
  CHECK(meta.find("\"seed\": 99") != std::string::npos);
  CHECK(meta.find("\"anon.layers\": \"5\"") != std::string::npos);
}

TEST_CASE("cli maps error categories to exit codes") {
  TempDir tmp("codes");
  const std::string cfg = setup_run(tmp, 1);

  // Validation problems are exit 2.
  CHECK(run_cli(tmp, "anonymize --config " + cfg + " --set mode=sideways --out " +
                         tmp.file("x1")) == 2);
  CHECK(run_cli(tmp, "anonymize --config " + cfg + " --backend onnx:" +
                         tmp.file("missing.json") + " --out " + tmp.file("x2")) == 2);
  CHECK_FALSE(fs::exists(tmp.path / "x1"));
  CHECK_FALSE(fs::exists(tmp.path / "x2"));

  // A present but unreadable backend descriptor is an io failure, exit 3.
  write_text(tmp.path / "broken.json", "{ not json");
  CHECK(run_cli(tmp, "anonymize --config " + cfg + " --backend onnx:" +
                         tmp.file("broken.json") + " --out " + tmp.file("x3")) == 3);

  // Usage errors (unknown flag, missing subcommand) count as config, exit 2.
  CHECK(run_cli(tmp, "anonymize --frobnicate") == 2);
  CHECK(run_cli(tmp, "") == 2);
}

TEST_CASE("cli treats an empty dataset as a warning") {
  TempDir tmp("empty");
  setup_run(tmp, 0);
  const int code = run_cli(tmp, "anonymize --config " + tmp.file("run.kv") + " --out " +
                                    tmp.file("out"));
  CHECK(code == 0);
  CHECK(read_text(tmp.path / "stderr.log").find("warning") != std::string::npos);
}

TEST_CASE("cli reports its version and help") {
  TempDir tmp("version");
  CHECK(run_cli(tmp, "--version") == 0);
  CHECK(read_text(tmp.path / "stdout.log").find(kVersion) != std::string::npos);
  CHECK(run_cli(tmp, "--help") == 0);
  const std::string help = read_text(tmp.path / "stdout.log");
  for (const char* sub :
       {"search-layers", "search-channels", "anonymize", "train-swapper", "evaluate"}) {
    INFO(sub);
    CHECK(help.find(sub) != std::string::npos);
  }
}

TEST_CASE("cli search and evaluate chain") {
  TempDir tmp("chain");
  const std::string cfg = setup_run(tmp, 3);
  write_text(tmp.path / "labels.kv",
             "img0.identity = a\nimg1.identity = b\nimg2.identity = c\n");

  CHECK(run_cli(tmp, "search-layers --config " + cfg + " --out " + tmp.file("search")) == 0);
  CHECK(fs::exists(tmp.path / "search/layer_scores.csv"));

  CHECK(run_cli(tmp, "anonymize --config " + cfg + " --out " + tmp.file("run")) == 0);
  CHECK(run_cli(tmp, "evaluate --config " + cfg + " --labels " + tmp.file("labels.kv") +
                         " --out " + tmp.file("eval") + " --set eval.anon_dir=" +
                         tmp.file("run/anon") + " --set eval.k_grid=2") == 0);
  CHECK(fs::exists(tmp.path / "eval/evaluation.json"));
  CHECK(fs::exists(tmp.path / "eval/roc.csv"));
}
