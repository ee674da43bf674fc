#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "neunet/preprocess.hpp"
#include "neunet/train.hpp"
#include "neunet/vol_io.hpp"
#include "oracles.hpp"

using namespace neunet;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(NEUNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("neunet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(is, line)) n += !line.empty();
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("dwt and idwt round trip through files") {
  const auto dir = scratch("dwt");
  std::mt19937_64 rng(81);
  auto v = oracle::random_volume<float>({8, 12, 16, 1}, rng, -50.0, 50.0);
  v.set_spacing({1.0, 0.5, 2.0});
  save_vol(dir / "in.vol", v);
  REQUIRE(run("dwt --in " + (dir / "in.vol").string() + " --out " + (dir / "b").string() + " --axes 1,1,1 --levels 2") == 0);
  auto ca = load_image(dir / "b.l2.band0.vol");
  CHECK(ca.spatial() == Index3{2, 3, 4});
  CHECK(fs::exists(dir / "b.l1.band7.vol"));
  REQUIRE(run("idwt --in " + (dir / "b").string() + " --out " + (dir / "out.vol").string()) == 0);
  auto back = load_image(dir / "out.vol");
  REQUIRE(back.shape() == v.shape());
  CHECK((back.data() - v.data()).abs().maxCoeff() < 1e-4f * 50.0f);
  CHECK(back.spacing() == v.spacing());

  auto c = Volume4<float>::constant({8, 8, 8, 1}, 7.0f);
  save_vol(dir / "const.vol", c);
  REQUIRE(run("dwt --in " + (dir / "const.vol").string() + " --out " + (dir / "c").string() + " --axes 0,1,1") == 0);
  for (int k = 1; k < 4; ++k) {
    auto band = load_image(dir / ("c.l1.band" + std::to_string(k) + ".vol"));
    CHECK(band.data().abs().maxCoeff() < 1e-5f);
  }
  REQUIRE(run("idwt --in " + (dir / "c").string() + " --out " + (dir / "c_out.vol").string()) == 0);
  CHECK((load_image(dir / "c_out.vol").data() - 7.0f).abs().maxCoeff() < 1e-5f);

  save_vol(dir / "odd.vol", Volume4<float>(Shape4{5, 4, 4, 1}));
  CHECK(run("dwt --in " + (dir / "odd.vol").string() + " --out " + (dir / "o").string()) == 2);
  CHECK(run("dwt --in " + (dir / "missing.vol").string() + " --out " + (dir / "m").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("checkerboard CSV") {
  const auto dir = scratch("checker");
  REQUIRE(run("checkerboard --seeds 3 --kernel 3 --stride 2 --out " + (dir / "cb.csv").string()) == 0);
  std::ifstream is(dir / "cb.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "seed,method,phase_imbalance");
  CHECK(count_lines(dir / "cb.csv") == 1 + 2 * 3);
  fs::remove_all(dir);
}

TEST_CASE("phantoms, preprocess, train and eval") {
  const auto dir = scratch("pipeline");
  const auto raw = dir / "raw", prep = dir / "prep", runs = dir / "run";
  REQUIRE(run("--seed 4 phantoms --out " + raw.string() + " --n 3 --shape 32 --classes 3") == 0);
  CHECK(load_dataset(raw).dataset.cases.size() == 3);
  REQUIRE(run("preprocess --in " + raw.string() + " --out " + prep.string()) == 0);
  CHECK(load_dataset(prep).normalized);

  std::ofstream(dir / "run.cfg") << "# tiny run\nbase_channels=2\nchannel_cap=4\nbatch=1\n";
  REQUIRE(run("--seed 1 --epochs 1 --config " + (dir / "run.cfg").string() + " train --data " + prep.string() +
              " --out " + runs.string() + " --val-cases 1") == 0);
  CHECK(fs::exists(runs / "latest.nvckpt"));
  CHECK(count_lines(runs / "train_log.csv") == 2);

  REQUIRE(run("eval --checkpoint " + (runs / "latest.nvckpt").string() + " --data " + prep.string() + " --out " +
              (dir / "metrics.csv").string()) == 0);
  std::ifstream is(dir / "metrics.csv");
  auto rows = read_metrics_csv(is);
  CHECK(rows.size() == 3 * 2);

  std::ofstream(dir / "bad.cfg") << "not_a_key=3\n";
  CHECK(run("--config " + (dir / "bad.cfg").string() + " train --data " + prep.string() + " --out " +
            runs.string()) == 2);
  CHECK(run("--epochs 0 train --data " + prep.string() + " --out " + runs.string()) == 2);
  CHECK(run("train --data " + (dir / "nowhere").string() + " --out " + runs.string()) == 3);
  CHECK(run("--seed 1 --epochs 2 --lr 1e30 --config " + (dir / "run.cfg").string() + " train --data " +
            prep.string() + " --out " + (dir / "nan").string() + " --val-cases 1") == 4);
  fs::remove_all(dir);
}

TEST_CASE("argument errors") {
  CHECK(run("--bogus") == 2);
  CHECK(run("dwt") == 2);
  CHECK(run("checkerboard --seeds 2 --kernel 3 --stride 0") == 2);
}

}  // TEST_SUITE
