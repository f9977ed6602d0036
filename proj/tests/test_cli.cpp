#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmhmc/cli.hpp"

using namespace pmhmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("pmhmc_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(std::vector<std::string> args, std::string* output = nullptr) {
  args.insert(args.begin(), "pmhmc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (output) *output = out.str() + err.str();
  return code;
}

std::string write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kGaussian =
    "model.name = gaussian\n"
    "model.T = 10\n"
    "sampler.kind = pm_hmc\n"
    "sampler.n = 4\n"
    "sampler.h = 0.05\n"
    "sampler.steps = 10\n"
    "sampler.iterations = 300\n"
    "sampler.burn_in = 50\n"
    "seed = 3\n";

}  // namespace

TEST_CASE("usage and configuration errors exit with 1") {
  TempDir t("errors");
  CHECK(run({}) == exit_config);
  CHECK(run({"frobnicate", "x.cfg"}) == exit_config);
  CHECK(run({"sample", (t.path / "missing.cfg").string()}) == exit_config);
  const auto bad_key = write_config(t.path, "bad.cfg", "model.name = gaussian\nsampler.nn = 3\n");
  std::string msg;
  CHECK(run({"sample", bad_key}, &msg) == exit_config);
  CHECK(msg.find("sampler.nn") != std::string::npos);
  const auto bad_kind = write_config(t.path, "kind.cfg", "model.name = gaussian\nsampler.kind = nuts\n");
  CHECK(run({"sample", bad_kind, "--out", t.path.string()}) == exit_config);
  const auto burn = write_config(t.path, "burn.cfg", "model.name = gaussian\nsampler.iterations = 5\nsampler.burn_in = 5\n");
  CHECK(run({"sample", burn, "--out", t.path.string()}) == exit_config);
  const auto g = write_config(t.path, "g.cfg", kGaussian);
  CHECK(run({"sample", g, "--n", "2", "--n", "3"}) == exit_config);
  CHECK(run({"--help"}) == exit_ok);
}

TEST_CASE("runtime failures exit with 2") {
  TempDir t("runtime");
  const auto g = write_config(t.path, "g.cfg", kGaussian);
  CHECK(run({"diagnose", g, "--chain", (t.path / "nope.csv").string(), "--out", t.path.string()}) == exit_runtime);
}

TEST_CASE("generate, sample and diagnose") {
  TempDir t("pipeline");
  const auto g = write_config(t.path, "g.cfg", kGaussian);
  const std::string out = t.path.string();
  REQUIRE(run({"generate", g, "--out", out}) == exit_ok);
  CHECK(fs::exists(t.path / "data.csv"));

  std::string log;
  REQUIRE(run({"sample", g, "--out", out, "--dump-weights", "--dump-trajectory"}, &log) == exit_ok);
  CHECK(fs::exists(t.path / "chain.csv"));
  CHECK(fs::exists(t.path / "summary.txt"));
  CHECK(fs::exists(t.path / "weights.csv"));
  CHECK(fs::exists(t.path / "trajectory.csv"));
  CHECK(log.find("seconds/iteration") != std::string::npos);

  const std::string chain1 = slurp(t.path / "chain.csv");
  const std::string summary1 = slurp(t.path / "summary.txt");
  REQUIRE(run({"sample", g, "--out", out}) == exit_ok);
  CHECK(slurp(t.path / "chain.csv") == chain1);
  CHECK(slurp(t.path / "summary.txt") == summary1);

  REQUIRE(run({"sample", g, "--out", out, "--seed", "4", "--iterations", "120"}) == exit_ok);
  CHECK(slurp(t.path / "chain.csv") != chain1);
  REQUIRE(run({"sample", g, "--out", out}) == exit_ok);

  REQUIRE(run({"diagnose", g, "--out", out}, &log) == exit_ok);
  CHECK(fs::exists(t.path / "acf.csv"));
  const std::string report = slurp(t.path / "diagnostics.txt");
  CHECK(report.find("KS statistic") != std::string::npos);
  CHECK(report.find("analytic posterior") != std::string::npos);
}

TEST_CASE("sample reads a dataset file relative to the config") {
  TempDir t("datafile");
  const auto gen = write_config(t.path, "gen.cfg", std::string(kGaussian) + "data.seed = 77\n");
  REQUIRE(run({"generate", gen, "--out", t.path.string()}) == exit_ok);
  const auto use = write_config(t.path, "use.cfg", std::string(kGaussian) + "data_file = data.csv\n");
  const auto same = write_config(t.path, "same.cfg", std::string(kGaussian) + "data.seed = 77\n");
  const fs::path a = t.path / "a", b = t.path / "b";
  REQUIRE(run({"sample", use, "--out", a.string()}) == exit_ok);
  REQUIRE(run({"sample", same, "--out", b.string()}) == exit_ok);
  CHECK(slurp(a / "chain.csv") == slurp(b / "chain.csv"));
}

TEST_CASE("multiple chains and other samplers") {
  TempDir t("chains");
  const auto g = write_config(t.path, "g.cfg",
                              "model.name = diffraction\nmodel.T = 8\nsampler.kind = pm_slice\nsampler.n = 4\n"
                              "sampler.iterations = 120\nsampler.tuning_iterations = 100\nsampler.chains = 2\n"
                              "diagnose.lambda_threshold = 0.5\n");
  REQUIRE(run({"sample", g, "--out", t.path.string()}) == exit_ok);
  CHECK(fs::exists(t.path / "chain_0.csv"));
  CHECK(fs::exists(t.path / "chain_1.csv"));
  REQUIRE(run({"diagnose", g, "--out", t.path.string(), "--chain", (t.path / "chain_1.csv").string()}) == exit_ok);
  CHECK(slurp(t.path / "diagnostics.txt").find("mode high occupancy") != std::string::npos);
}

TEST_CASE("minimal convergence run emits a two-N slope") {
  TempDir t("conv");
  const auto c = write_config(t.path, "c.cfg",
                              "model.name = gaussian\nconvergence.seeds = 2\nconvergence.dt = 1e-3\n"
                              "convergence.grid_points = 101\n");
  std::string log;
  REQUIRE(run({"convergence", c, "--n", "1", "--n", "4", "--out", t.path.string(), "--dump-trajectory"}, &log) ==
          exit_ok);
  CHECK(log.find("slope") != std::string::npos);
  CHECK(fs::exists(t.path / "flow_errors.csv"));
  CHECK(fs::exists(t.path / "slope.txt"));
  CHECK(fs::exists(t.path / "fan_N4.csv"));
  const std::string errors = slurp(t.path / "flow_errors.csv");
  CHECK(std::count(errors.begin(), errors.end(), '\n') == 5);
  const auto wrong = write_config(t.path, "w.cfg", "model.name = glmm\n");
  CHECK(run({"convergence", wrong, "--n", "1", "--n", "2"}) == exit_config);
}

TEST_CASE("diagnostics are unchanged by a CSV round trip") {
  const auto model_cfg = std::string(kGaussian);
  std::stringstream in(model_cfg);
  const Config cfg = Config::parse(in);
  const ModelSpec spec = model_spec_from_config(cfg);
  const auto model = make_model(spec, load_or_generate_data(cfg, spec));
  const Chain chain = run_chain(*model, sampler_config_from(cfg), Vector::Zero(1));
  std::stringstream csv;
  write_chain_csv(csv, chain);
  const Chain back = read_chain_csv(csv, chain.config.burn_in);
  const AcfReport a = acf_report(chain, 20), b = acf_report(back, 20);
  CHECK(a.acf[0].acf == b.acf[0].acf);
  CHECK(a.ess == b.ess);
  const NormalSummary post = static_cast<const GaussianHierarchicalModel&>(*model).posterior();
  CHECK(ks_against_analytic(chain.trace(0), post).p_value == ks_against_analytic(back.trace(0), post).p_value);
}
