#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bdl/commands.hpp"
#include "bdl/error.hpp"

using namespace bdl;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  return parse_run_config(
      "[data]\nnum_clusters = 60\n"
      "[train]\nsteps = 120\nsteps_per_epoch = 40\nbatch_size = 16\n"
      "[anneal]\nbs_start = 32\nbs_end = 16\nbs_step = 8\nbatches_per_iteration = 4\n"
      "[dump]\nbatches = 2\nbatch_size = 16\n");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "bdl_test_commands") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  fs::path operator/(const char* name) const { return dir / name; }
};

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorKind::kConfig) == kExitConfig);
  CHECK(exit_code_for(ErrorKind::kFormat) == kExitRuntime);
  CHECK(exit_code_for(ErrorKind::kStage) == kExitRuntime);
}

TEST_CASE("train, anneal, eval and dump end to end") {
  const Workspace ws;
  const RunConfig cfg = small_config();
  cmd_gen_data(cfg, ws / "data.bin");
  CHECK(load_dataset(ws / "data.bin") == generate(cfg.data));

  const TrainResult tr = cmd_train(cfg, ws / "data.bin", ws / "pre.ckpt", ws / "pre.csv");
  CHECK(tr.log.size() == 3);
  CHECK(tr.config_hash == config_hash(cfg));
  CHECK(line_count(ws / "pre.csv") == 4);
  const Checkpoint pre = load_checkpoint(ws / "pre.ckpt");
  CHECK(pre.metadata.stage == kStagePreliminary);
  CHECK(pre.metadata.seed == cfg.seed);

  const auto anneal_log = cmd_anneal(cfg, ws / "pre.ckpt", ws / "data.bin", ws / "ann.ckpt", ws / "ann.csv");
  CHECK(anneal_log.size() == 2);
  CHECK(line_count(ws / "ann.csv") == 3);
  CHECK(load_checkpoint(ws / "ann.ckpt").metadata.stage == kStageAnnealed);
  CHECK(kind_of([&] { cmd_anneal(cfg, ws / "ann.ckpt", ws / "data.bin", ws / "x.ckpt", ws / "x.csv"); }) ==
        ErrorKind::kStage);
  CHECK_FALSE(fs::exists(ws / "x.ckpt"));

  const auto rows = cmd_eval(cfg, ws / "ann.ckpt", ws / "data.bin", ws / "eval.csv");
  const auto again = cmd_eval(cfg, ws / "ann.ckpt", ws / "data.bin", std::nullopt);
  REQUIRE(rows.size() == again.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].value == again[i].value);
  CHECK(line_count(ws / "eval.csv") == rows.size() + 1);

  const std::size_t dumped = cmd_dump_distributions(cfg, ws / "pre.ckpt", ws / "data.bin", ws / "dump.csv");
  CHECK(dumped == 2 * 16);
  CHECK(line_count(ws / "dump.csv") == dumped + 1);
  CHECK(slurp(ws / "dump.csv").rfind("batch,d_pos,d_neg,I,W,W_times_dneg,I_pos_minus_neg\n", 0) == 0);
}

TEST_CASE("a zero-iteration schedule copies the model") {
  const Workspace ws;
  RunConfig cfg = small_config();
  cmd_gen_data(cfg, ws / "data.bin");
  cmd_train(cfg, ws / "data.bin", ws / "pre.ckpt", ws / "pre.csv");
  cfg.anneal.bs_end = cfg.anneal.bs_start;
  CHECK(cmd_anneal(cfg, ws / "pre.ckpt", ws / "data.bin", ws / "ann.ckpt", ws / "ann.csv").empty());
  const Checkpoint a = load_checkpoint(ws / "ann.ckpt");
  const Checkpoint b = load_checkpoint(ws / "pre.ckpt");
  CHECK(std::ranges::equal(a.net.parameters(), b.net.parameters()));
}

TEST_CASE("mismatched dataset and model shapes") {
  const Workspace ws;
  RunConfig cfg = small_config();
  cmd_gen_data(cfg, ws / "data.bin");
  RunConfig wide = cfg;
  wide.data.input_dim = 24;
  CHECK(kind_of([&] { cmd_train(wide, ws / "data.bin", ws / "pre.ckpt", ws / "pre.csv"); }) == ErrorKind::kShape);
  CHECK_FALSE(fs::exists(ws / "pre.ckpt"));
  CHECK(kind_of([&] { cmd_eval(cfg, ws / "missing.ckpt", ws / "data.bin", std::nullopt); }) == ErrorKind::kIo);
}

TEST_CASE("gradcheck passes and catches an injected fault") {
  const RunConfig cfg;
  GradcheckOptions opt;
  opt.batches = 3;
  const GradcheckReport ok = cmd_gradcheck(cfg, opt);
  CHECK(ok.passed());
  CHECK(ok.components.size() == 4);
  for (const auto& c : ok.components) {
    CHECK(c.checks > 0);
    CHECK(c.max_rel_error <= 1e-5);
  }
  std::ostringstream report;
  write_gradcheck_report(report, ok);
  CHECK(report.str().find("end_to_end") != std::string::npos);

  opt.inject_fault = true;
  CHECK_FALSE(cmd_gradcheck(cfg, opt).passed());
}
