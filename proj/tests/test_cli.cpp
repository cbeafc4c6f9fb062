#include <doctest.h>

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "helpers.hpp"

using namespace testing;

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(EVOPRUNE_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// key=value lines printed by the CLI.
std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line.find(' ') == std::string::npos)
      kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_split(const std::filesystem::path& dir, const std::string& prefix, std::uint32_t count,
                 std::uint64_t seed) {
  const auto data = blob_dataset(count, 28, seed);
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto img = data.raw_image(i);
    pixels.insert(pixels.end(), img.begin(), img.end());
    labels.push_back(static_cast<std::uint8_t>(data.label(i)));
  }
  write_bytes(dir / (prefix + "-images-idx3-ubyte"), idx_images(count, 28, 28, pixels));
  write_bytes(dir / (prefix + "-labels-idx1-ubyte"), idx_labels(labels));
}

// MNIST-shaped stand-in: 160 training and 40 test blob images.
void write_fake_mnist(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_split(dir, "train", 160, 1);
  write_split(dir, "t10k", 40, 2);
}

const std::string small_run =
    " --set validation_size=40 --set batch_size=16 --set population=4 --set selected=2"
    " --set retrain_interval=2 --set retrain_samples=60 --set final_epochs=1";

}  // namespace

TEST_CASE("missing inputs fail with exit code 2 before any compute") {
  TempDir dir("cli_missing");
  const auto r = run_cli("pretrain --data " + (dir / "nowhere").string() + " --out " +
                         (dir / "out").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("nowhere") != std::string::npos);
  CHECK(r.output.find("train-images-idx3-ubyte") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "baseline.ckpt"));
}

TEST_CASE("invalid lambdas are rejected with exit code 2") {
  TempDir dir("cli_lambda");
  write_fake_mnist(dir / "data");
  const auto r = run_cli("prune --data " + (dir / "data").string() + " --out " +
                         (dir / "out").string() + " --lambda1 0.4 --lambda2 0.3 --lambda3 0.2");
  CHECK(r.code == 2);
  CHECK(r.output.find("sum") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "curves.csv"));

  CHECK(run_cli("prune --preset fastest").code == 2);
  CHECK(run_cli("prune --set colour=red").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("pretrain, prune, eval and report on a small dataset") {
  TempDir dir("cli_flow");
  const std::string data = (dir / "data").string();
  write_fake_mnist(data);
  const std::string out = (dir / "run").string();

  const auto pre = run_cli("pretrain --data " + data + " --out " + out + " --epochs 1" + small_run);
  REQUIRE_MESSAGE(pre.code == 0, pre.output);
  CHECK(std::filesystem::exists(dir / "run" / "baseline.ckpt"));
  CHECK(read_text(dir / "run" / "baseline_metrics.txt").starts_with("test_error="));

  auto prune_into = [&](const std::string& target) {
    return run_cli("prune --data " + data + " --out " + target + " --baseline " + out +
                   "/baseline.ckpt --seed 5 --generations 3 --preset storage" + small_run);
  };
  const auto a = prune_into(out);
  REQUIRE_MESSAGE(a.code == 0, a.output);
  const auto b = prune_into((dir / "again").string());
  REQUIRE_MESSAGE(b.code == 0, b.output);

  SUBCASE("same seed, identical outputs") {
    CHECK(read_text(dir / "run" / "curves.csv") == read_text(dir / "again" / "curves.csv"));
    CHECK(read_text(dir / "run" / "summary.csv") == read_text(dir / "again" / "summary.csv"));
    CHECK(read_bytes(dir / "run" / "pruned.ckpt") == read_bytes(dir / "again" / "pruned.ckpt"));
  }

  SUBCASE("curves and summary layout") {
    const auto curves = read_text(dir / "run" / "curves.csv");
    CHECK(curves.starts_with("generation,elite_f,elite_e,elite_c,elite_s,mean_f\n1,"));
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 4);
    const auto summary = read_text(dir / "run" / "summary.csv");
    CHECK(summary.starts_with(
        "lambda1,lambda2,lambda3,error,computation,sparsity,accuracy_change\n"
        "0.500000,0.000000,0.500000,"));
  }

  SUBCASE("eval reproduces the summary metrics") {
    const auto ev = run_cli("eval --data " + data + " --checkpoint " + out +
                            "/pruned.ckpt --preset storage");
    REQUIRE_MESSAGE(ev.code == 0, ev.output);
    const auto m = key_values(ev.output);
    const auto p = key_values(a.output);
    CHECK(m.at("error") == p.at("error"));
    CHECK(m.at("computation") == p.at("computation"));
    CHECK(m.at("sparsity") == p.at("sparsity"));
    CHECK(m.at("fitness") == p.at("fitness"));
    const auto plain = key_values(run_cli("eval --data " + data + " --checkpoint " + out +
                                          "/pruned.ckpt").output);
    CHECK(plain.count("fitness") == 0);
  }

  SUBCASE("report") {
    const auto r = run_cli("report " + out + "/curves.csv " + (dir / "again").string() +
                           "/curves.csv --out " + (dir / "figs").string());
    REQUIRE_MESSAGE(r.code == 0, r.output);
    CHECK(std::filesystem::exists(dir / "figs" / "run_curves.svg"));
    CHECK(std::filesystem::exists(dir / "figs" / "again_curves.svg"));
    CHECK(read_text(dir / "figs" / "run_curves.svg").starts_with("<svg"));
  }

  SUBCASE("a corrupt checkpoint is an input error") {
    write_bytes(dir / "bad.ckpt", {1, 2, 3});
    const auto r = run_cli("eval --data " + data + " --checkpoint " + (dir / "bad.ckpt").string());
    CHECK(r.code == 2);
  }
}

TEST_CASE("report input handling") {
  TempDir dir("cli_report");
  const std::string header = "generation,elite_f,elite_e,elite_c,elite_s,mean_f\n";

  SUBCASE("header-only CSV") {
    std::ofstream(dir / "empty.csv") << header;
    const auto r = run_cli("report " + (dir / "empty.csv").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("no data") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir / "empty.svg"));
  }
  SUBCASE("single generation") {
    std::ofstream(dir / "one.csv") << header << "1,0.2,0.01,0.5,0.4,0.3\n";
    const auto r = run_cli("report " + (dir / "one.csv").string());
    REQUIRE_MESSAGE(r.code == 0, r.output);
    CHECK(read_text(dir / "one.svg").find("<circle") != std::string::npos);
  }
  SUBCASE("four runs, four images") {
    std::string args = "report";
    for (const char* name : {"balanced", "speed", "storage", "accuracy"}) {
      std::filesystem::create_directories(dir / name);
      std::ofstream(dir / name / "curves.csv")
          << header << "1,0.5,0.02,0.9,0.1,0.6\n2,0.4,0.02,0.7,0.3,0.5\n";
      args += " " + (dir / name / "curves.csv").string();
    }
    const auto r = run_cli(args);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    for (const char* name : {"balanced", "speed", "storage", "accuracy"})
      CHECK(std::filesystem::exists(dir / name / "curves.svg"));
  }
  SUBCASE("missing CSV") {
    CHECK(run_cli("report " + (dir / "absent.csv").string()).code == 2);
  }
}
