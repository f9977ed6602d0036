#include <doctest.h>

#include <set>
#include <sstream>

#include "pmhmc/config.hpp"
#include "pmhmc/datasets.hpp"
#include "pmhmc/rng.hpp"

using namespace pmhmc;

TEST_CASE("config parsing") {
  std::stringstream in(
      "# comment\n"
      "model.name = gaussian\n"
      "\n"
      "sampler.n = 8\n"
      "sampler.h=0.02\n"
      "model.beta = 1, -2.5  3\n"
      "sampler.jitter = true\n");
  const Config c = Config::parse(in);
  CHECK(c.get_string("model.name") == "gaussian");
  CHECK(c.get_size("sampler.n") == 8);
  CHECK(c.get_double("sampler.h") == 0.02);
  CHECK(c.get_list("model.beta") == std::vector<double>{1.0, -2.5, 3.0});
  CHECK(c.get_bool("sampler.jitter", false));
  CHECK(c.get_size("missing", 5) == 5);
  CHECK_FALSE(c.get_optional_list("missing"));
  CHECK_THROWS_AS(c.get_string("missing"), ConfigError);
}

TEST_CASE("malformed configs are rejected") {
  std::stringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_AS(Config::parse(dup), ConfigError);
  std::stringstream noeq("just words\n");
  CHECK_THROWS_AS(Config::parse(noeq), ConfigError);
  std::stringstream bad("n = 1.5x\nm = -3\nb = maybe\n");
  const Config c = Config::parse(bad);
  CHECK_THROWS_AS(c.get_double("n"), ConfigError);
  CHECK_THROWS_AS(c.get_size("m"), ConfigError);
  CHECK_THROWS_AS(c.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("model spec from config") {
  std::stringstream in("model.name = glmm\nmodel.T = 50\nmodel.p_cov = 2\n");
  const ModelSpec s = model_spec_from_config(Config::parse(in));
  CHECK(s.kind == ModelKind::glmm);
  CHECK(s.T == 50);
  CHECK(s.covariate_dim == 2);
  std::stringstream bad("model.name = nope\n");
  CHECK_THROWS_AS(model_spec_from_config(Config::parse(bad)), ConfigError);
  std::stringstream neg("model.name = gaussian\nmodel.sigma1_sq = -1\n");
  CHECK_THROWS_AS(model_spec_from_config(Config::parse(neg)), ConfigError);
}

TEST_CASE("counter-based streams are reproducible and distinct") {
  CounterRng a(5, 1), b(5, 1), c(5, 2), d(6, 1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    seen.insert(x);
    seen.insert(c());
    seen.insert(d());
  }
  CHECK(seen.size() == 300);
  Rng r(1, 0);
  double m = 0.0, v = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    m += z;
    v += z * z;
  }
  CHECK(std::abs(m / n) < 0.01);
  CHECK(v / n == doctest::Approx(1.0).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform_pos();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(r.index(7) < 7);
  }
}
