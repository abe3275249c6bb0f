#include <doctest.h>

#include <algorithm>

#include "cli_support.hpp"
#include "sgldreg/eval.hpp"
#include "sgldreg/formats.hpp"
#include "sgldreg/unet.hpp"
#include "test_support.hpp"

using namespace sgldreg;
namespace fs = std::filesystem;
using testing::run_cli;
using testing::shell_quote;

namespace {

const char* kTinyConfig =
    "channel_scale = 0.25\n"
    "iterations = 50\n"
    "burn_in = 40\n"
    "batch_size = 4\n"
    "val_every = 25\n"
    "alpha = 100\n"
    "synth_count = 12\n"
    "val_pairs = 2\n"
    "test_pairs = 5\n"
    "sigmas = 0,0.05,0.1,0.18\n";

// Synth data and one trained checkpoint, shared by the cases below.
struct Workspace {
  fs::path root, cfg, data, run;

  Workspace() {
    root = testing::scratch_dir("cli");
    cfg = root / "tiny.cfg";
    data = root / "data";
    run = root / "run";
    write_text(cfg.string(), kTinyConfig);
    REQUIRE(run_cli("synth --config " + shell_quote(cfg.string()) + " --out " + shell_quote(data.string()),
                    root / "synth.log")
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + shell_quote(cfg.string()) + " --data " + shell_quote(data.string()) +
                        " --out " + shell_quote(run.string()),
                    root / "train.log")
                .exit_code == 0);
  }

  std::string checkpoint() const { return shell_quote((run / "checkpoint.asgl").string()); }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

void write_test_pgms(const fs::path& dir, std::size_t index) {
  const auto w = workspace();
  const auto test = load_pairs((w.data / "test.pairs").string());
  write_pgm((dir / "m.pgm").string(), test[index].moving);
  write_pgm((dir / "f.pgm").string(), test[index].fixed);
}

}  // namespace

TEST_CASE("synth writes the three pair files and a run config") {
  const auto& w = workspace();
  CHECK(load_pairs((w.data / "train.pairs").string()).size() == 12);
  CHECK(load_pairs((w.data / "val.pairs").string()).size() == 2);
  CHECK(load_pairs((w.data / "test.pairs").string()).size() == 5);
  CHECK(fs::exists(w.data / "run.cfg"));
}

TEST_CASE("train keeps the post burn-in snapshots and the loss curve") {
  const auto& w = workspace();
  const auto snaps = checkpoint_load((w.run / "checkpoint.asgl").string());
  REQUIRE(snaps.size() == 10);
  CHECK(snaps.front().iteration == 41);
  CHECK(snaps.back().iteration == 50);
  const auto csv = testing::file_text((w.run / "loss.csv").string());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
  CHECK(csv.find("\n25,") != std::string::npos);
  CHECK(fs::exists(w.run / "run.cfg"));
}

TEST_CASE("train reruns are byte-identical") {
  const auto& w = workspace();
  const auto again = w.root / "again";
  REQUIRE(run_cli("train --config " + shell_quote(w.cfg.string()) + " --data " + shell_quote(w.data.string()) +
                      " --out " + shell_quote(again.string()),
                  w.root / "again.log")
              .exit_code == 0);
  for (const char* name : {"checkpoint.asgl", "loss.csv", "run.cfg"}) {
    CAPTURE(name);
    CHECK(testing::file_bytes(again / name) == testing::file_bytes(w.run / name));
  }
  const auto seeded = w.root / "seeded";
  REQUIRE(run_cli("train --config " + shell_quote(w.cfg.string()) + " --data " + shell_quote(w.data.string()) +
                      " --seed 9 --out " + shell_quote(seeded.string()),
                  w.root / "seeded.log")
              .exit_code == 0);
  CHECK(testing::file_bytes(seeded / "checkpoint.asgl") != testing::file_bytes(w.run / "checkpoint.asgl"));
}

TEST_CASE("a missing data path exits 2 and writes nothing") {
  const auto& w = workspace();
  const auto out = w.root / "nodata";
  const auto r = run_cli("train --config " + shell_quote(w.cfg.string()) + " --data /nonexistent/path --out " +
                             shell_quote(out.string()),
                         w.root / "nodata.log");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("does not exist") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("usage and configuration errors exit 2") {
  const auto& w = workspace();
  CHECK(run_cli("frobnicate", w.root / "u1.log").exit_code == 2);
  CHECK(run_cli("train --bogus-flag", w.root / "u2.log").exit_code == 2);
  write_text((w.root / "bad.cfg").string(), "learning_rate = 3\n");
  const auto r = run_cli("train --config " + shell_quote((w.root / "bad.cfg").string()), w.root / "u3.log");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("line 1") != std::string::npos);
  CHECK(run_cli("sweep --checkpoint " + shell_quote((w.root / "missing.asgl").string()) + " --baseline x",
                w.root / "u4.log")
            .exit_code == 2);
}

TEST_CASE("register writes images, field and variance maps") {
  const auto& w = workspace();
  const auto dir = w.root / "reg";
  fs::create_directories(dir);
  write_test_pgms(dir, 0);
  const auto out = dir / "out";
  const auto r = run_cli("register --checkpoint " + w.checkpoint() + " --moving " + shell_quote((dir / "m.pgm").string()) +
                             " --fixed " + shell_quote((dir / "f.pgm").string()) + " --out " + shell_quote(out.string()),
                         dir / "reg.log");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("10 snapshot") != std::string::npos);
  for (const char* name : {"moving.pgm", "fixed.pgm", "registered.pgm", "mean_dx.pgm", "mean_dy.pgm", "var_dx.pgm",
                           "var_dy.pgm", "field.bin", "run.cfg"}) {
    CAPTURE(name);
    CHECK(fs::exists(out / name));
  }
  CHECK(read_raw_f32((out / "field.bin").string()).size() == 2 * 32 * 32);
  CHECK(read_pgm((out / "registered.pgm").string()).shape() == Shape{1, 1, 32, 32});

  const auto again = dir / "again";
  REQUIRE(run_cli("register --checkpoint " + w.checkpoint() + " --moving " + shell_quote((dir / "m.pgm").string()) +
                      " --fixed " + shell_quote((dir / "f.pgm").string()) + " --out " + shell_quote(again.string()),
                  dir / "again.log")
              .exit_code == 0);
  for (const char* name : {"registered.pgm", "field.bin", "var_dx.pgm"})
    CHECK(testing::file_bytes(again / name) == testing::file_bytes(out / name));

  write_pgm((dir / "small.pgm").string(), Tensor({1, 1, 16, 16}, 0.5f));
  CHECK(run_cli("register --checkpoint " + w.checkpoint() + " --moving " + shell_quote((dir / "small.pgm").string()) +
                    " --fixed " + shell_quote((dir / "small.pgm").string()) + " --out " + shell_quote((dir / "x").string()),
                dir / "small.log")
            .exit_code == 2);
  CHECK(run_cli("register --checkpoint " + w.checkpoint() + " --mode single --moving " +
                    shell_quote((dir / "m.pgm").string()) + " --fixed " + shell_quote((dir / "f.pgm").string()) +
                    " --out " + shell_quote((dir / "y").string()),
                dir / "single.log")
            .exit_code == 2);
}

TEST_CASE("register with a zero-field checkpoint returns the moving image and zero variance") {
  const auto& w = workspace();
  const auto dir = w.root / "zero";
  fs::create_directories(dir);
  write_test_pgms(dir, 1);
  UNetConfig c;
  c.channel_scale = 0.25;
  c.final_layer_init_scale = 0.0;
  checkpoint_save({{1, build_unet<float>(c, 1)}, {2, build_unet<float>(c, 2)}}, (dir / "zero.asgl").string());
  const auto out = dir / "out";
  REQUIRE(run_cli("register --checkpoint " + shell_quote((dir / "zero.asgl").string()) + " --moving " +
                      shell_quote((dir / "m.pgm").string()) + " --fixed " + shell_quote((dir / "f.pgm").string()) +
                      " --out " + shell_quote(out.string()),
                  dir / "zero.log")
              .exit_code == 0);
  CHECK(testing::file_bytes(out / "registered.pgm") == testing::file_bytes(dir / "m.pgm"));
  for (float v : read_raw_f32((out / "field.bin").string())) CHECK(v == 0.0f);
  const auto var_dx = read_pgm((out / "var_dx.pgm").string());
  for (float v : var_dx.values()) CHECK(v == 0.0f);
}

TEST_CASE("a single-snapshot checkpoint gives a zero variance map") {
  const auto& w = workspace();
  const auto dir = w.root / "one";
  fs::create_directories(dir);
  write_test_pgms(dir, 2);
  auto snaps = checkpoint_load((w.run / "checkpoint.asgl").string());
  checkpoint_save({snaps.back()}, (dir / "one.asgl").string());
  const auto out = dir / "out";
  REQUIRE(run_cli("register --checkpoint " + shell_quote((dir / "one.asgl").string()) + " --config " +
                      shell_quote(w.cfg.string()) + " --moving " + shell_quote((dir / "m.pgm").string()) + " --fixed " +
                      shell_quote((dir / "f.pgm").string()) + " --out " + shell_quote(out.string()),
                  dir / "one.log")
              .exit_code == 0);
  for (const char* name : {"var_dx.pgm", "var_dy.pgm"}) {
    const auto var = read_pgm((out / name).string());
    for (float v : var.values()) CHECK(v == 0.0f);
  }

  // --mode last on the full checkpoint matches the one-snapshot checkpoint.
  const auto last = dir / "last";
  REQUIRE(run_cli("register --checkpoint " + w.checkpoint() + " --mode last --moving " +
                      shell_quote((dir / "m.pgm").string()) + " --fixed " + shell_quote((dir / "f.pgm").string()) +
                      " --out " + shell_quote(last.string()),
                  dir / "last.log")
              .exit_code == 0);
  CHECK(testing::file_bytes(last / "field.bin") == testing::file_bytes(out / "field.bin"));
}

TEST_CASE("sweep prints method by sigma grids") {
  const auto& w = workspace();
  const auto out = w.root / "sweep";
  const auto r = run_cli("sweep --checkpoint " + w.checkpoint() + " --baseline " + w.checkpoint() + " --data " +
                             shell_quote(w.data.string()) + " --out " + shell_quote(out.string()),
                         w.root / "sweep.log");
  REQUIRE(r.exit_code == 0);
  const auto csv = parse_sweep_csv(testing::file_text((out / "sweep.csv").string()));
  CHECK(csv.sigmas == std::vector<double>{0.0, 0.05, 0.1, 0.18});
  REQUIRE(csv.rows.size() == 6);
  CHECK(csv.rows[0].method == "averaged");
  CHECK(csv.rows[2].method == "single");
  CHECK(csv.rows[3].metric == "dice");
  const auto pairs_csv = testing::file_text((out / "sweep_pairs.csv").string());
  CHECK(std::count(pairs_csv.begin(), pairs_csv.end(), '\n') == 1 + 3 * 4 * 5);
  CHECK(r.output.find("sigma=0.18") != std::string::npos);

  const auto zero = w.root / "sweep0";
  REQUIRE(run_cli("sweep --checkpoint " + w.checkpoint() + " --baseline " + w.checkpoint() + " --data " +
                      shell_quote(w.data.string()) + " --sigma 0 --out " + shell_quote(zero.string()),
                  w.root / "sweep0.log")
              .exit_code == 0);
  const auto csv0 = parse_sweep_csv(testing::file_text((zero / "sweep.csv").string()));
  CHECK(csv0.sigmas == std::vector<double>{0.0});
  CHECK(csv0.rows.size() == 6);
  CHECK(csv0.rows[0].means[0] == csv.rows[0].means[0]);

  CHECK(run_cli("sweep --checkpoint " + w.checkpoint() + " --baseline " + w.checkpoint() + " --data " +
                    shell_quote(w.data.string()) + " --sigma 0.1 --out " + shell_quote((w.root / "nz").string()),
                w.root / "nz.log")
            .exit_code == 2);
}

TEST_CASE("eval compares against the baseline with a paired t-test") {
  const auto& w = workspace();
  const auto out = w.root / "eval";
  const auto r = run_cli("eval --checkpoint " + w.checkpoint() + " --baseline " + w.checkpoint() + " --data " +
                             shell_quote(w.data.string()) + " --sigma 0.18 --mode last --out " + shell_quote(out.string()),
                         w.root / "eval.log");
  REQUIRE(r.exit_code == 0);
  const auto csv = testing::file_text((out / "eval.csv").string());
  CHECK(csv.rfind("method,sigma,pairs,mse_mean", 0) == 0);
  CHECK(csv.find("t_test,t,") != std::string::npos);
  // Last snapshot against itself: every difference is zero.
  CHECK(r.output.find("degenerate") != std::string::npos);
}

TEST_CASE("selftest passes and fails under an injected fault") {
  const auto& w = workspace();
  const auto ok = run_cli("selftest", w.root / "self.log");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("FAIL") == std::string::npos);
  const auto bad = run_cli("selftest --inject-fault", w.root / "fault.log");
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}
