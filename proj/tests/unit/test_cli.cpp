// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgtd/cli.hpp"
#include "mgtd/container.hpp"

namespace fs = std::filesystem;
using mgtd::cli::dispatch;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "mgtd_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

const std::string& toy_corpus() {
  static const std::string p = [] {
    const std::string out = path("toy.jsonl");
    REQUIRE(run({"synth", "--kind", "detection", "--count", "200", "--out", out}).code == 0);
    return out;
  }();
  return p;
}

std::string slurp(const std::string& p) { return mgtd::read_file(p); }

// Runs the installed binary; stdout and stderr go to files.
Run run_binary(const std::string& args, const std::string& env = "") {
  const std::string out = path("bin.out"), err = path("bin.err");
  const std::string cmd = env + " \"" MGTD_CLI_BINARY "\" " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

}  // namespace

TEST_CASE("params reproduces the reference counts") {
  const auto r = run({"params", "--variant", "bilstm_frozen", "--preset", "base"});
  CHECK(r.code == 0);
  CHECK(r.out.find("3,675,138") != std::string::npos);
  CHECK(r.out.find("\xe2\x89\x88" "4M") != std::string::npos);

  const auto j = run({"params", "--preset", "base", "--format", "json"});
  REQUIRE(j.code == 0);
  const auto parsed = nlohmann::json::parse(j.out);
  REQUIRE(parsed.is_array());
  CHECK(parsed.size() == 6);
}

TEST_CASE("stats on the fixture") {
  const auto a = run({"stats", "--input", MGTD_FIXTURE});
  const auto b = run({"stats", "--input", MGTD_FIXTURE});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("wikihow") != std::string::npos);
  const auto j = run({"stats", "--input", MGTD_FIXTURE, "--format", "json"});
  CHECK(nlohmann::json::parse(j.out)["total"] == 40);
}

TEST_CASE("usage and data errors") {
  CHECK(run({}).code == mgtd::cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == mgtd::cli::kExitUsage);
  CHECK(run({"predict"}).code == mgtd::cli::kExitUsage);
  CHECK(run({"stats", "--bogus"}).code == mgtd::cli::kExitUsage);
  CHECK(run({"params", "--variant", "nope"}).code == mgtd::cli::kExitUsage);
  CHECK(run({"stats", "--input", path("missing.jsonl")}).code == mgtd::cli::kExitData);

  const std::string bad = path("bad.jsonl");
  std::ofstream(bad) << "{\"text\":\"x\",\"label\":7,\"model\":\"a\",\"source\":\"b\"}\n";
  const auto r = run({"stats", "--input", bad});
  CHECK(r.code == mgtd::cli::kExitData);
  CHECK(r.err.find(":1") != std::string::npos);
}

TEST_CASE("binary: usage text on stderr and exit codes") {
  const auto r = run_binary("predict");
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  CHECK(r.err.find("checkpoint") != std::string::npos);
  CHECK(run_binary("params --variant gru_frozen --preset base").out.find("2,756,610") != std::string::npos);
  CHECK(run_binary("stats --input /nonexistent/x.jsonl").code == 2);
}

TEST_CASE("seed comes from the flag, then MGT_SEED") {
  const auto a = run_binary("synth --kind detection --count 20");
  const auto b = run_binary("synth --kind detection --count 20", "MGT_SEED=42");
  const auto c = run_binary("synth --kind detection --count 20", "MGT_SEED=7");
  const auto d = run_binary("synth --kind detection --count 20 --seed 7", "MGT_SEED=42");
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(c.out == d.out);
}

TEST_CASE("train, eval and predict") {
  const std::string corpus = toy_corpus();
  const std::vector<std::string> train_args{"train", "--train", corpus, "--variant", "bilstm_frozen", "--epochs", "3"};
  auto with_out = [&](const std::string& ckpt, const std::string& hist) {
    auto args = train_args;
    args.insert(args.end(), {"--out", ckpt, "--history", hist});
    return run(args);
  };
  const auto a = with_out(path("a.ckpt"), path("a.json"));
  const auto b = with_out(path("b.ckpt"), path("b.json"));
  REQUIRE(a.code == 0);
  CHECK(slurp(path("a.ckpt")) == slurp(path("b.ckpt")));
  CHECK(slurp(path("a.json")) == slurp(path("b.json")));
  CHECK(a.out == b.out);
  const auto hist = nlohmann::json::parse(slurp(path("a.json")));
  CHECK(hist["epochs"].size() >= 1);

  const auto e1 = run({"eval", "--checkpoint", path("a.ckpt"), "--input", corpus, "--out", path("e1.txt")});
  const auto e2 = run({"eval", "--checkpoint", path("a.ckpt"), "--input", corpus, "--out", path("e2.txt")});
  REQUIRE(e1.code == 0);
  CHECK(slurp(path("e1.txt")) == slurp(path("e2.txt")));
  CHECK(e1.out.find("bilstm_frozen") != std::string::npos);
  CHECK(e1.out.find("Params*") != std::string::npos);

  const auto ej = run({"eval", "--checkpoint", path("a.ckpt"), "--name", "mine", "--input", corpus, "--format", "json"});
  const auto report = nlohmann::json::parse(ej.out);
  CHECK(report[0]["model"] == "mine");
  CHECK(report[0]["accuracy"].get<double>() > 0.6);

  const std::string texts = path("texts.txt");
  std::ofstream(texts) << "m01 m02 m03\nh01 h02 h03 h04\n";
  const auto p = run({"predict", "--checkpoint", path("a.ckpt"), "--input", texts, "--format", "json"});
  REQUIRE(p.code == 0);
  const auto preds = nlohmann::json::parse(p.out);
  CHECK(preds.size() == 2);

  CHECK(run({"eval", "--checkpoint", path("missing.ckpt"), "--input", corpus}).code == mgtd::cli::kExitData);
}

TEST_CASE("embeddings path") {
  const std::string corpus = toy_corpus();
  REQUIRE(run({"train", "--train", corpus, "--epochs", "1", "--out", path("enc.ckpt")}).code == 0);
  REQUIRE(run({"embed", "--checkpoint", path("enc.ckpt"), "--input", corpus, "--out", path("emb.bin")}).code == 0);
  const auto r = run({"train", "--train", corpus, "--embeddings", path("emb.bin"), "--variant", "gru_frozen",
                      "--epochs", "2", "--out", path("ext.ckpt")});
  CHECK(r.code == 0);
  const auto e = run({"eval", "--checkpoint", path("ext.ckpt"), "--input", corpus, "--embeddings", path("emb.bin")});
  CHECK(e.code == 0);
  CHECK(run({"train", "--train", corpus, "--embeddings", path("emb.bin"), "--variant", "lora_frozen"}).code ==
        mgtd::cli::kExitUsage);
}

TEST_CASE("search is deterministic") {
  const std::string corpus = toy_corpus();
  const std::string space = path("space.json");
  std::ofstream(space) << R"({"hidden_size": [4, 8], "dropout": [0.0, 0.2]})";
  const std::vector<std::string> base{"search", "--train", corpus, "--space", space, "--epochs", "2"};
  auto a_args = base, b_args = base;
  a_args.insert(a_args.end(), {"--out", path("s1.json")});
  b_args.insert(b_args.end(), {"--out", path("s2.json")});
  const auto a = run(a_args);
  REQUIRE(a.code == 0);
  run(b_args);
  CHECK(slurp(path("s1.json")) == slurp(path("s2.json")));
  const auto log = nlohmann::json::parse(slurp(path("s1.json")));
  CHECK(log["trials"].size() == 4);
}

TEST_CASE("probe is deterministic") {
  const std::vector<std::string> base{"probe", "--synthetic", "40", "--epochs", "2"};
  auto a_args = base, b_args = base;
  a_args.insert(a_args.end(), {"--out", path("p1.json"), "--csv-dir", path("csv")});
  b_args.insert(b_args.end(), {"--out", path("p2.json")});
  const auto a = run(a_args);
  REQUIRE(a.code == 0);
  run(b_args);
  CHECK(slurp(path("p1.json")) == slurp(path("p2.json")));
  const auto j = nlohmann::json::parse(slurp(path("p1.json")));
  CHECK(j["runs"].size() == 2);
  CHECK(fs::exists(path("csv")));
  CHECK(!fs::is_empty(path("csv")));
  CHECK(run({"probe"}).code == mgtd::cli::kExitUsage);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = run({"gradcheck", "--format", "json"});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["passed"] == true);
}
