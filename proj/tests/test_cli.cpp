// End-to-end checks of the choquet-fuse binary: exit codes, determinism,
// file outputs and input immutability.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = CHOFUSE_CLI;

struct RunResult {
  int exit_code = -1;
  std::string stderr_text;
};

fs::path work_dir() {
  static const fs::path root = [] {
    const fs::path path = fs::temp_directory_path() / "chofuse_cli_tests";
    fs::remove_all(path);
    fs::create_directories(path);
    return path;
  }();
  return root;
}

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path err_file =
      work_dir() / ("stderr_" + std::to_string(++counter) + ".txt");
  const std::string command =
      kCli + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(err_file);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.stderr_text = buffer.str();
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

const std::string kFastFlags =
    " --gb-rounds 15 --ada-rounds 15 --logistic-max-iter 80";

fs::path shared_dataset() {
  static const fs::path data = [] {
    const fs::path path = work_dir() / "data.csv";
    const auto result = run("synth --n 400 --d 5 --views 2 --seed 3 --out " +
                            path.string() + " --out-dir " +
                            (work_dir() / "synth_out").string());
    REQUIRE(result.exit_code == 0);
    return path;
  }();
  return data;
}

}  // namespace

TEST_CASE("synth is deterministic per seed and writes a snapshot") {
  const fs::path a = work_dir() / "synth_a.csv";
  const fs::path b = work_dir() / "synth_b.csv";
  CHECK(run("synth --n 200 --d 4 --seed 9 --out " + a.string() +
            " --out-dir " + (work_dir() / "sa").string())
            .exit_code == 0);
  CHECK(run("synth --n 200 --d 4 --seed 9 --out " + b.string() +
            " --out-dir " + (work_dir() / "sb").string())
            .exit_code == 0);
  CHECK(read_file(a) == read_file(b));

  const json snapshot = json::parse(read_file(work_dir() / "sa" / "run_config.json"));
  CHECK(snapshot["command"] == "synth");
  CHECK(snapshot["config"]["seed"] == 9);
}

TEST_CASE("evaluate twice produces byte-identical reports and keeps inputs") {
  const fs::path data = shared_dataset();
  const std::string before = read_file(data);

  const std::string base = "evaluate --input " + data.string() +
                           " --folds 3 --seed 7" + kFastFlags + " --out-dir ";
  CHECK(run(base + (work_dir() / "ev_a").string()).exit_code == 0);
  CHECK(run(base + (work_dir() / "ev_b").string()).exit_code == 0);
  CHECK(read_file(work_dir() / "ev_a" / "report.json") ==
        read_file(work_dir() / "ev_b" / "report.json"));
  CHECK(read_file(data) == before);  // inputs never mutated

  const json report = json::parse(read_file(work_dir() / "ev_a" / "report.json"));
  CHECK(report["methods"].size() == 7);
  CHECK(report["seed"] == 7);
  CHECK(fs::exists(work_dir() / "ev_a" / "table.txt"));
  CHECK(fs::exists(work_dir() / "ev_a" / "table.csv"));
  CHECK(fs::exists(work_dir() / "ev_a" / "folds.csv"));
  CHECK(fs::exists(work_dir() / "ev_a" / "run_config.json"));
}

TEST_CASE("a different seed changes the report") {
  const fs::path data = shared_dataset();
  const std::string base = "evaluate --input " + data.string() +
                           " --folds 3" + kFastFlags;
  CHECK(run(base + " --seed 7 --out-dir " + (work_dir() / "seed7").string())
            .exit_code == 0);
  CHECK(run(base + " --seed 8 --out-dir " + (work_dir() / "seed8").string())
            .exit_code == 0);
  CHECK(read_file(work_dir() / "seed7" / "report.json") !=
        read_file(work_dir() / "seed8" / "report.json"));
}

TEST_CASE("train then fuse scores a dataset") {
  const fs::path data = shared_dataset();
  const fs::path train_dir = work_dir() / "train_out";
  CHECK(run("train --input " + data.string() + " --seed 5" + kFastFlags +
            " --out-dir " + train_dir.string())
            .exit_code == 0);
  const fs::path bundle = train_dir / "bundle.json";
  CHECK(fs::exists(bundle));

  const fs::path fuse_dir = work_dir() / "fuse_out";
  CHECK(run("fuse --input " + data.string() + " --bundle " + bundle.string() +
            " --out-dir " + fuse_dir.string())
            .exit_code == 0);
  const std::string outcomes = read_file(fuse_dir / "outcomes.csv");
  CHECK(outcomes.find("sample_id,predicted_class,score") == 0);
  // header + one row per sample
  CHECK(std::count(outcomes.begin(), outcomes.end(), '\n') == 401);
}

TEST_CASE("fuse on external predictions works and flags malformed rows") {
  const fs::path good = work_dir() / "ext_good.csv";
  write_file(good,
             "sample_id,classifier_id,class_0,class_1,label\n"
             "s1,a,0.7,0.3,0\n"
             "s1,b,0.6,0.4,0\n"
             "s2,a,0.2,0.8,1\n"
             "s2,b,0.3,0.7,1\n"
             "s3,a,0.4,0.6,0\n"
             "s3,b,0.55,0.45,0\n");
  const fs::path out = work_dir() / "ext_out";
  CHECK(run("fuse --predictions " + good.string() + " --out-dir " +
            out.string())
            .exit_code == 0);
  CHECK(read_file(out / "outcomes.csv").find("s1") != std::string::npos);

  const fs::path bad = work_dir() / "ext_bad.csv";
  write_file(bad,
             "sample_id,classifier_id,class_0,class_1,label\n"
             "s1,a,0.7,0.3,0\n"
             "s9,b,0.5,0.3,0\n");
  const auto result = run("fuse --predictions " + bad.string() + " --out-dir " +
                          (work_dir() / "ext_bad_out").string());
  CHECK(result.exit_code == 2);
  CHECK(result.stderr_text.find("s9") != std::string::npos);
}

TEST_CASE("gridsearch with a singleton grid returns that pair") {
  const fs::path data = shared_dataset();
  const fs::path out = work_dir() / "grid_out";
  CHECK(run("gridsearch --input " + data.string() +
            " --w1 0.9 --w2 0.6 --folds 3 --seed 2" + kFastFlags +
            " --out-dir " + out.string())
            .exit_code == 0);
  const json grid = json::parse(read_file(out / "grid.json"));
  CHECK(grid["best_w1"] == 0.9);
  CHECK(grid["best_w2"] == 0.6);
  CHECK(fs::exists(out / "grid.csv"));
}

TEST_CASE("prep writes a cleaned csv and a report") {
  const fs::path raw = work_dir() / "raw.csv";
  write_file(raw,
             "id,x,grade,label\n"
             "1,0.5,A,0\n"
             "2,,B,1\n"
             "3,1.5,A,0\n"
             "4,2.5,B,1\n"
             "5,3.1,C,0\n");
  const fs::path out = work_dir() / "prep_out";
  CHECK(run("prep --input " + raw.string() + " --leakage id --out-dir " +
            out.string())
            .exit_code == 0);
  const json report = json::parse(read_file(out / "prep_report.json"));
  CHECK(report["dropped_leakage"][0] == "id");
  CHECK(report["rows_dropped"] == 1);
  const std::string cleaned = read_file(out / "cleaned.csv");
  CHECK(cleaned.find("x,grade,label") == 0);
}

TEST_CASE("config file drives a run, flags override, unknown keys rejected") {
  const fs::path data = shared_dataset();
  const fs::path config = work_dir() / "config.json";
  write_file(config, R"({
  "seed": 11,
  "folds": 3,
  "adaptive": {"w1": 0.9, "w2": 0.6},
  "gradient_boosting": {"rounds": 15},
  "adaboost": {"rounds": 15},
  "logistic": {"max_iter": 80}
})");
  const fs::path out_a = work_dir() / "cfg_a";
  CHECK(run("evaluate --input " + data.string() + " --config " +
            config.string() + " --out-dir " + out_a.string())
            .exit_code == 0);
  const json report = json::parse(read_file(out_a / "report.json"));
  CHECK(report["seed"] == 11);
  CHECK(report["folds"] == 3);

  // explicit flag beats the file
  const fs::path out_b = work_dir() / "cfg_b";
  CHECK(run("evaluate --input " + data.string() + " --config " +
            config.string() + " --seed 12 --out-dir " + out_b.string())
            .exit_code == 0);
  CHECK(json::parse(read_file(out_b / "report.json"))["seed"] == 12);

  const fs::path broken = work_dir() / "broken.json";
  write_file(broken, R"({"seed": 1, "surprise": true})");
  const auto result = run("evaluate --input " + data.string() + " --config " +
                          broken.string() + " --out-dir " +
                          (work_dir() / "cfg_c").string());
  CHECK(result.exit_code == 1);
  CHECK(result.stderr_text.find("surprise") != std::string::npos);
}

TEST_CASE("environment seed is the fallback") {
  const fs::path data = shared_dataset();
  const std::string base = "evaluate --input " + data.string() + " --folds 3" +
                           kFastFlags + " --out-dir ";
  setenv("CHOQUET_FUSE_SEED", "7", 1);
  CHECK(run(base + (work_dir() / "env_a").string()).exit_code == 0);
  unsetenv("CHOQUET_FUSE_SEED");
  CHECK(run(base + (work_dir() / "env_b").string() + " --seed 7").exit_code == 0);
  CHECK(read_file(work_dir() / "env_a" / "report.json") ==
        read_file(work_dir() / "env_b" / "report.json"));
}

TEST_CASE("usage and data errors use the documented exit codes") {
  CHECK(run("no-such-command").exit_code == 1);
  CHECK(run("evaluate").exit_code == 1);  // missing --input
  CHECK(run("evaluate --input /nonexistent.csv --out-dir " +
            (work_dir() / "err").string())
            .exit_code == 2);
  const auto bad_folds =
      run("evaluate --input " + shared_dataset().string() +
          " --folds 1 --out-dir " + (work_dir() / "err2").string());
  CHECK(bad_folds.exit_code == 1);
  CHECK(run("--help").exit_code == 0);
}
