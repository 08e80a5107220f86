#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cpath/config.hpp"
#include "cpath/errors.hpp"

using namespace cpath;
using namespace cpath::config;

TEST(Toml, ParsesScalarsArraysAndComments) {
  const auto doc = parse_toml(R"(# leading comment
seed = 42
[pretrain]
batch_size = 1_024   # trailing
temperature = 0.5
residual = false
profile = "paper"
stage_channels = [8, 16]
[data]
organs = ["breast", "colon"]
name = "a \"quoted\" \\ word"
)");
  EXPECT_EQ(std::get<std::int64_t>(doc.at("").at("seed").scalar), 42);
  EXPECT_EQ(std::get<std::int64_t>(doc.at("pretrain").at("batch_size").scalar), 1024);
  EXPECT_DOUBLE_EQ(std::get<double>(doc.at("pretrain").at("temperature").scalar), 0.5);
  EXPECT_FALSE(std::get<bool>(doc.at("pretrain").at("residual").scalar));
  EXPECT_EQ(std::get<std::string>(doc.at("pretrain").at("profile").scalar), "paper");
  ASSERT_TRUE(doc.at("pretrain").at("stage_channels").array);
  EXPECT_EQ(doc.at("pretrain").at("stage_channels").array->size(), 2u);
  EXPECT_EQ(std::get<std::string>(doc.at("data").at("organs").array->at(1)), "colon");
  EXPECT_EQ(std::get<std::string>(doc.at("data").at("name").scalar), "a \"quoted\" \\ word");
  EXPECT_EQ(doc.at("pretrain").at("temperature").line, 5);
}

TEST(Toml, SyntaxErrorsCarryLineNumbers) {
  for (const auto& [text, line] : std::vector<std::pair<std::string, std::string>>{
           {"a = 1\nb = \n", "line 2"},
           {"a = 1\na = 2\n", "line 2"},
           {"[s]\n[s]\n", "line 2"},
           {"x = \"open\n", "line 1"},
           {"\n\n[broken\n", "line 3"},
           {"y = [1, 2\n", "line 1"}}) {
    try {
      parse_toml(text);
      FAIL() << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(line), std::string::npos) << e.what();
    }
  }
}

TEST(Config, DefaultsAreDeskProfile) {
  auto c = from_document({});
  EXPECT_EQ(c.profile, "desk");
  EXPECT_EQ(c.pretrain.batch_size, 64);
  EXPECT_EQ(c.pretrain.encoder.input_side, 64);
  EXPECT_DOUBLE_EQ(c.pretrain.optimizer.base_lr, 0.075);
  EXPECT_EQ(c.eval_percents, (std::vector<double>{5, 10, 20, 50, 100}));
}

TEST(Config, OverridesAndDerivedLearningRate) {
  auto c = from_document(parse_toml(R"(
seed = 7
[pretrain]
batch_size = 256
[optim]
kind = "lars"
[eval]
mode = "fine_tune"
percents = [1, 10]
)"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.pretrain.optimizer.base_lr, 0.3);
  EXPECT_EQ(c.eval.mode, eval::Mode::fine_tune);
  EXPECT_DOUBLE_EQ(c.eval.learning_rate(), 1e-4);
  EXPECT_EQ(c.eval_percents, (std::vector<double>{1, 10}));
  c = from_document(parse_toml("[optim]\nkind = \"adam\"\nlr = 0.002\n"));
  EXPECT_DOUBLE_EQ(c.pretrain.optimizer.base_lr, 0.002);
}

TEST(Config, PaperProfile) {
  auto c = from_document(parse_toml("[pretrain]\nprofile = \"paper\"\n"));
  EXPECT_EQ(c.pretrain.batch_size, 512);
  EXPECT_EQ(c.pretrain.encoder.input_side, 224);
}

TEST(Config, RejectsUnknownKeysSectionsAndTypes) {
  for (const std::string text : {"[pretrain]\nbatchsize = 4\n", "[nonsense]\na = 1\n", "[pretrain]\nbatch_size = \"x\"\n",
                                 "[optim]\nkind = \"sgd\"\n", "[pretrain]\nbatch_size = 7\n", "[data]\npercent = 0\n",
                                 "bogus = 1\n"}) {
    EXPECT_THROW(from_document(parse_toml(text)).validate(), ConfigError) << text;
  }
  try {
    from_document(parse_toml("\n[pretrain]\n\nepochz = 3\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(Config, SeedPropagates) {
  auto c = from_document(parse_toml("seed = 99\n"));
  c.propagate_seed();
  EXPECT_EQ(c.pretrain.seed, 99u);
  EXPECT_EQ(c.sampling.seed, 99u);
  EXPECT_EQ(c.eval.seed, 99u);
  EXPECT_EQ(c.cluster.seed, 99u);
}

TEST(Config, ResolvedTomlRoundTrips) {
  auto c = from_document(parse_toml(R"(
seed = 3
[pretrain]
epochs = 12
stage_channels = [8, 16, 32]
[augment]
jitter = "heavy"
crop_min_area = 0.05
[data]
organs = ["lung"]
resolutions = ["20x"]
[eval]
standardize = false
[cluster]
ks = [2, 4, 8]
)"));
  const auto text = to_toml(c);
  auto back = from_document(parse_toml(text));
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.pretrain.epochs, 12);
  EXPECT_EQ(back.pretrain.encoder.stage_channels, (std::vector<int>{8, 16, 32}));
  EXPECT_EQ(back.pretrain.augment.jitter, augment::JitterPreset::heavy);
  EXPECT_EQ(back.sampling.filters.organs, std::set<std::string>{"lung"});
  EXPECT_FALSE(back.eval.standardize);
  EXPECT_EQ(back.elbow_ks, (std::vector<int>{2, 4, 8}));
}

TEST(Config, LoadPrefixesPath) {
  auto dir = std::filesystem::temp_directory_path() / "cpath_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "bad.toml") << "[pretrain]\nwhat = 1\n";
  }
  try {
    load(dir / "bad.toml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.toml"), std::string::npos);
  }
  EXPECT_THROW(load(dir / "absent.toml"), Error);
}

TEST(Config, ResolvedFileIgnoresWorkerCount) {
  auto dir = std::filesystem::temp_directory_path() / "cpath_test_config";
  std::filesystem::create_directories(dir);
  RunConfig a = from_document(parse_toml("seed = 3\n"));
  RunConfig b = a;
  b.pretrain.workers = 4;
  write_resolved(a, dir / "a.toml");
  write_resolved(b, dir / "b.toml");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.toml"), slurp(dir / "b.toml"));
  EXPECT_EQ(load(dir / "b.toml").seed, 3u);
}
