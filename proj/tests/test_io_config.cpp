#include "hetsub/config.hpp"
#include "hetsub/io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace hetsub;

namespace {

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() /
           ("hetsub_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
  std::filesystem::create_directories(p);
  return p;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST(ParseMatrix, TwoByTwo) {
  std::istringstream in("1,2\n3,4\n");
  Matrix want(2, 2);
  want << 1, 2, 3, 4;
  EXPECT_EQ(io::parse_matrix(in), want);
}

TEST(ParseMatrix, HeaderSkipped) {
  std::istringstream in("# D=2 N=2\n1,2\n3,4\n");
  EXPECT_EQ(io::parse_matrix(in).rows(), 2);
}

TEST(ParseMatrix, RaggedRowsRejectedWithLocation) {
  std::istringstream in("1,2\n3\n");
  try {
    io::parse_matrix(in, "m.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream bad("1,x\n");
  EXPECT_THROW(io::parse_matrix(bad), DataError);
}

TEST(SaveLoadMatrix, RoundTripExact) {
  Rng rng = make_rng(1);
  Matrix m = gaussian_matrix(5, 7, rng);
  m(0, 0) = 1e-300;
  m(1, 1) = -123456789.123456789;
  const auto path = temp_dir() / "m.csv";
  io::save_matrix(path, m);
  EXPECT_EQ(io::load_matrix(path), m);
  EXPECT_THROW(io::load_matrix(temp_dir() / "missing.csv"), DataError);
}

TEST(Labels, OneBasedOnDisk) {
  const auto path = temp_dir() / "labels.txt";
  io::save_labels(path, {0, 1, 1, 0});
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text, "1\n2\n2\n1\n");
  EXPECT_EQ(io::load_labels(path), (Labels{0, 1, 1, 0}));
  std::istringstream bad("1\n0\n");
  EXPECT_THROW(io::parse_labels(bad), DataError);
}

TEST(Ints, StoredAsIs) {
  const auto path = temp_dir() / "groups.txt";
  io::save_ints(path, {1, 2, 2});
  EXPECT_EQ(io::load_ints(path), (std::vector<int>{1, 2, 2}));
}

TEST(Config, DefaultsValidate) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.resolved_q(), 3);
  EXPECT_EQ(c.resolved_rounds(), 50);
  c.base_clusterings = 32;
  EXPECT_EQ(c.resolved_rounds(), 3);
}

TEST(Config, ParsesSections) {
  const auto c = parse(
      "# comment\n"
      "algorithm = ekss\n"
      "ranks = 3,4\n"
      "[run]\n"
      "q-grid = 4,6\n"
      "base_clusterings = 8\n"
      "weighting = literal\n"
      "[synth]\n"
      "nu_high = 30\n"
      "n_high = 300\n"
      "[data]\n"
      "matrix = y.csv\n");
  EXPECT_EQ(c.algorithm, Algorithm::ekss);
  EXPECT_EQ(c.ranks, (std::vector<int>{3, 4}));
  EXPECT_EQ(c.q_grid, (std::vector<int>{4, 6}));
  EXPECT_EQ(c.base_clusterings, 8);
  EXPECT_EQ(c.weighting, Weighting::literal);
  EXPECT_DOUBLE_EQ(c.synth.nu_high, 30.0);
  EXPECT_EQ(c.synth.n_high, 300);
  EXPECT_EQ(c.matrix_path, "y.csv");
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse("clusters = 2\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse("clusters\n"), ConfigError);
  EXPECT_THROW(parse("q = three\n"), ConfigError);
  EXPECT_THROW(parse("init = spectral\n"), ConfigError);
}

TEST(Config, ValidationRules) {
  auto bad = [](const std::string& text) { return [text] { parse(text).validate(); }; };
  EXPECT_THROW(bad("ranks = auto\nalgorithm = tsc\n")(), ConfigError);
  EXPECT_THROW(bad("init = tips\nbase_clusterings = 4\n")(), ConfigError);
  EXPECT_THROW(bad("ranks = 3,3,3\n")(), ConfigError);
  EXPECT_THROW(bad("alpha_noise = 0\n")(), ConfigError);
  EXPECT_THROW(bad("flippa_percentile = 101\n")(), ConfigError);
  EXPECT_THROW(bad("algorithm = oracle\n[data]\nmatrix = y.csv\n")(), ConfigError);
  EXPECT_NO_THROW(bad("ranks = auto\nauto_initial_rank = 8\n")());
  EXPECT_EQ(parse("ranks = auto\nauto_initial_rank = 8\n").resolved_q(), 8);
}

TEST(Config, SeedFromEnvironmentOnlyWhenUnset) {
  ::setenv("HETSUB_SEED", "77", 1);
  ExperimentConfig a;
  apply_seed_env(a);
  EXPECT_EQ(a.seed, 77u);
  ExperimentConfig b = parse("seed = 5\n");
  apply_seed_env(b);
  EXPECT_EQ(b.seed, 5u);
  ::unsetenv("HETSUB_SEED");
}

TEST(Config, IniRoundTrip) {
  ExperimentConfig c = parse("algorithm = alpcahus\nranks = 2,5\nq = 7\nbase_clusterings = 16\n[synth]\nnu_high = 3\n");
  const auto back = parse(to_ini(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, JsonHasSortedKeysAndEveryField) {
  const auto j = to_json(ExperimentConfig{});
  std::vector<std::string> keys;
  for (const auto& [k, v] : j["run"].items()) keys.push_back(k);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  for (const char* k : {"algorithm", "base_clusterings", "q", "seed", "weighting", "init"})
    EXPECT_TRUE(j["run"].contains(k)) << k;
  EXPECT_TRUE(j.contains("synth"));
}
