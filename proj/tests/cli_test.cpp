#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "avtenet/checkpoint.hpp"
#include "avtenet/synthdata.hpp"
#include "doctest.h"

using namespace avtenet;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

// Runs the binary through the shell with stderr folded into stdout.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  std::string cmd = env_prefix + AVTENET_BIN " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const char* leaf) {
  auto p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kToyDims = "--dim 8 --heads 2 --layers 1 --ffn 16";

}  // namespace

TEST_CASE("bare invocation and unknown commands exit 2 with usage") {
  auto r = run_cli("");
  CHECK(r.code == 2);
  CHECK(r.out.find("usage: avtenet") != std::string::npos);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("train --bogus-flag 1").code == 2);
  auto help = run_cli("gen-data --help");
  CHECK(help.code == 0);
  CHECK(help.out.find("usage: avtenet gen-data") != std::string::npos);
}

TEST_CASE("gen-data writes the requested corpus and protects existing output") {
  auto dir = fresh_dir("avtenet_cli_gen");
  auto out = (dir / "data").string();
  auto r = run_cli("gen-data --out " + out +
                   " --counts RvRa=10,RvFa=10,FvRa=10,FvFa=10 --seed 5 --jobs 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("digest ") != std::string::npos);
  auto m = load_manifest(fs::path(out) / "manifest.ndjson");
  CHECK(m.records.size() == 40);
  for (auto& rec : m.records) CHECK(rec.split == "train");

  // Occupied directory refuses to overwrite without --force.
  auto again = run_cli("gen-data --out " + out + " --counts RvRa=1,RvFa=1,FvRa=1,FvFa=1");
  CHECK(again.code == 3);
  CHECK(again.out.find("--force") != std::string::npos);
  auto forced =
      run_cli("gen-data --out " + out + " --counts RvRa=1,RvFa=1,FvRa=1,FvFa=1 --force --seed 5");
  CHECK(forced.code == 0);

  CHECK(run_cli("gen-data --out " + (dir / "x").string() + " --counts RvRa=bad").code == 2);
  CHECK(run_cli("gen-data --out " + (dir / "x").string() + " --counts RvXx=3").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("seed precedence is flag over config over environment") {
  auto dir = fresh_dir("avtenet_cli_seed");
  auto cfgfile = dir / "run.cfg";
  std::ofstream(cfgfile) << "# overlay\nseed=99\n";

  GenConfig expect;
  expect.train_counts = {2, 2, 2, 2};
  expect.balance_factor = 0;
  expect.test_reals = 0;
  expect.test_fakes_per_subset = 0;

  auto digest_for = [&](std::uint64_t seed) {
    GenConfig c = expect;
    c.seed = seed;
    return gen_config_digest(c);
  };
  const std::string counts = " --counts RvRa=2,RvFa=2,FvRa=2,FvFa=2";

  auto env_only = run_cli("gen-data --out " + (dir / "a").string() + counts,
                          "AVTENET_SEED=123 ");
  CHECK(env_only.code == 0);
  CHECK(env_only.out.find("digest " + digest_for(123)) != std::string::npos);

  auto with_config = run_cli(
      "gen-data --out " + (dir / "b").string() + counts + " --config " + cfgfile.string(),
      "AVTENET_SEED=123 ");
  CHECK(with_config.code == 0);
  CHECK(with_config.out.find("digest " + digest_for(99)) != std::string::npos);

  auto with_flag = run_cli("gen-data --out " + (dir / "c").string() + counts + " --config " +
                               cfgfile.string() + " --seed 7",
                           "AVTENET_SEED=123 ");
  CHECK(with_flag.code == 0);
  CHECK(with_flag.out.find("digest " + digest_for(7)) != std::string::npos);

  // Default when nothing is set anywhere.
  auto plain = run_cli("gen-data --out " + (dir / "d").string() + counts);
  CHECK(plain.out.find("digest " + digest_for(42)) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train, describe, and eval drive the library end to end") {
  auto dir = fresh_dir("avtenet_cli_train");
  auto data = (dir / "data").string();
  auto gen = run_cli("gen-data --out " + data +
                     " --counts RvRa=3,RvFa=3,FvRa=3,FvFa=3 --test-reals 4 --test-fakes 4"
                     " --seed 6 --jobs 2");
  REQUIRE(gen.code == 0);

  auto ckpt = (dir / "an.ckpt").string();
  auto tr = run_cli("train --network an --data " + data + " --out " + ckpt + " --epochs 1" +
                    " --batch 6 --seed 3 " + kToyDims);
  CHECK(tr.code == 0);
  CHECK(tr.out.find("epoch 1 loss") != std::string::npos);
  CHECK(tr.out.find("wrote " + ckpt) != std::string::npos);

  auto desc = run_cli("describe --ckpt " + ckpt);
  CHECK(desc.code == 0);
  CHECK(desc.out.find("an ") != std::string::npos);
  auto params = load_checkpoint(ckpt);
  CHECK(desc.out.find("total " + std::to_string(parameter_count(params))) != std::string::npos);

  auto ev = run_cli("eval --model an --ckpt " + ckpt + " --data " + data +
                    " --subset audio-only --json " + (dir / "r.json").string() + " --md " +
                    (dir / "r.md").string() + " " + kToyDims);
  CHECK(ev.code == 0);
  CHECK(ev.out.find("| Class | Precision | Recall | F1-Score | Accuracy |") != std::string::npos);
  CHECK(fs::exists(dir / "r.json"));
  CHECK(fs::exists(dir / "r.md"));
  std::ifstream js(dir / "r.json");
  std::string jtext((std::istreambuf_iterator<char>(js)), std::istreambuf_iterator<char>());
  CHECK(jtext.find("\"model\": \"an\"") != std::string::npos);
  CHECK(jtext.find("\"subset\": \"audio-only\"") != std::string::npos);

  // Subsets are matched case-insensitively.
  CHECK(run_cli("eval --model an --ckpt " + ckpt + " --data " + data + " --subset Audio-Only " +
                kToyDims)
            .code == 0);
  // Unknown subset is a usage problem; a wrong network kind is a checkpoint
  // mismatch; a missing dataset is I/O.
  CHECK(run_cli("eval --model an --ckpt " + ckpt + " --data " + data + " --subset nope " +
                kToyDims)
            .code == 2);
  CHECK(run_cli("eval --model vn --ckpt " + ckpt + " --data " + data + " --subset full " +
                kToyDims)
            .code == 6);
  CHECK(run_cli("eval --model an --ckpt " + ckpt + " --data " + (dir / "void").string() +
                " --subset full " + kToyDims)
            .code == 3);
  CHECK(run_cli("train --network an --data " + (dir / "void").string() + " --out " +
                (dir / "x.ckpt").string() + " " + kToyDims)
            .code == 3);
  fs::remove_all(dir);
}

TEST_CASE("describe rejects damaged checkpoints") {
  auto dir = fresh_dir("avtenet_cli_describe");
  auto path = dir / "bad.ckpt";
  {
    ParameterSet ps;
    ps["x.w"] = Tensor({2, 2}, {1, 2, 3, 4});
    save_checkpoint(path, ps);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  auto r = run_cli("describe --ckpt " + path.string());
  CHECK(r.code == 3);
  CHECK(r.out.find("bad magic") != std::string::npos);
  CHECK(run_cli("describe --ckpt " + (dir / "missing.ckpt").string()).code == 3);
  fs::remove_all(dir);
}

TEST_CASE("train-ensemble rejects strategies with nothing to train") {
  auto r = run_cli("train-ensemble --strategy mv --components a b c --data d --out o");
  CHECK(r.code == 2);
  CHECK(r.out.find("mv") != std::string::npos);
}

TEST_CASE("gradcheck passes on the audio classifier") {
  auto r = run_cli("gradcheck --network an --seed 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("max_rel_err") != std::string::npos);
  CHECK(run_cli("gradcheck --network hmm").code == 2);
}
