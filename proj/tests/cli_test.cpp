// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dgd/cli/commands.hpp"
#include "support/temp_dir.hpp"

namespace dgd::cli {
namespace {

namespace fs = std::filesystem;
using dgd::testing::TempDir;

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Checkerboard of A ± 0.3 per channel, so each channel's mean is exactly A.
ImageTensor balanced_clean(std::size_t h, std::size_t w, const Rgb& a) {
  ImageTensor img = make_image(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = a[c] + ((x + y) % 2 ? 0.3 : -0.3);
  return img;
}

ImageTensor gradient_clean(std::size_t h, std::size_t w) {
  ImageTensor img = make_image(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(y, x, c) = (static_cast<double>(x * (c + 1) + 3 * y) + 10.0) / static_cast<double>(w * 3 + 3 * h + 10);
  return img;
}

struct Captured {
  int code;
  std::string out, err;
};

template <typename F>
Captured capture(F&& f) {
  std::ostringstream out, err;
  const int code = f(out, err);
  return {code, out.str(), err.str()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DGD_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// Config files

TEST(Config, AppliesKeysAndComments) {
  RunConfig cfg;
  apply_config_text(cfg, "# toy\nseed = 9\nlr=1e-3  # inline\n\nbase_width = 16\nquadrisect = false\ndataset_root = data/x\n",
                    "t.cfg");
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 1e-3);
  EXPECT_EQ(cfg.base_width, 16u);
  EXPECT_FALSE(cfg.quadrisect);
  EXPECT_EQ(cfg.dataset_root, "data/x");
  EXPECT_EQ(cfg.model().g1.base_width, 16u);
  EXPECT_EQ(cfg.model().d.base_width, 64u);
}

TEST(Config, ErrorsCarryFileAndLine) {
  RunConfig cfg;
  try {
    apply_config_text(cfg, "seed = 1\nbogus = 2\n", "my.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("my.cfg:2:", 0), 0u) << e.what();
  }
  EXPECT_THROW(apply_config_text(cfg, "epochs = -3\n", "x"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "lr = fast\n", "x"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "quadrisect = maybe\n", "x"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "just words\n", "x"), ConfigError);
}

TEST(Config, EnvironmentFileThenExplicitFile) {
  TempDir dir;
  write_text(dir / "env.cfg", "seed = 3\nepochs = 7\n");
  write_text(dir / "run.cfg", "epochs = 9\n");
  ::setenv("DGD_CONFIG", (dir / "env.cfg").c_str(), 1);
  const auto cfg = load_run_config(dir / "run.cfg");
  ::unsetenv("DGD_CONFIG");
  EXPECT_EQ(cfg.train.seed, 3u);
  EXPECT_EQ(cfg.train.epochs, 9u);
  EXPECT_EQ(load_run_config().train.epochs, 850u);
}

TEST(Config, HelpListsEveryKey) {
  const auto help = describe_keys();
  for (const auto& k : config_keys()) EXPECT_NE(help.find(k.name), std::string::npos) << k.name;
}

// ---------------------------------------------------------------------------
// Synthesis params

TEST(SynthesisParams, GlobalsAndOverrides) {
  const auto p = parse_synthesis_params("category = reef\nbeta = 0.6, 0.2, 0.1\nveiling = 0.3 0.5 0.6\ndepth = 1\n"
                                        "img7.depth = 2.5\nimg7.beta = 0.4\n",
                                        "p.txt");
  EXPECT_EQ(p.category, "reef");
  const auto base = resolve_spec(p, "other");
  EXPECT_DOUBLE_EQ(*base.depth, 1.0);
  EXPECT_DOUBLE_EQ((*base.beta)[1], 0.2);
  const auto s = resolve_spec(p, "img7");
  EXPECT_DOUBLE_EQ(*s.depth, 2.5);
  EXPECT_DOUBLE_EQ((*s.beta)[2], 0.4);
  EXPECT_DOUBLE_EQ((*s.veiling)[0], 0.3);
}

TEST(SynthesisParams, ReportsLineOfBadEntries) {
  for (const auto& [text, line] : std::vector<std::pair<std::string, std::string>>{
           {"beta = 1\nbogus = 3\n", "p:2:"},
           {"veiling = 1.5\n", "p:1:"},
           {"depth = 1\n\nimg.beta = 1, 2\n", "p:3:"},
           {"model = fancy\n", "p:1:"}}) {
    try {
      parse_synthesis_params(text, "p");
      ADD_FAILURE() << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(std::string(e.what()).rfind(line, 0), 0u) << e.what();
    }
  }
}

TEST(SynthesisParams, IncompleteSpecsAreRejected) {
  EXPECT_THROW(resolve_spec(parse_synthesis_params("beta = 1\n"), "x"), InvalidInput);
  EXPECT_THROW(resolve_spec(parse_synthesis_params("beta = 1\nveiling = 0.5\n"), "x"), InvalidInput);
  EXPECT_THROW(resolve_spec(parse_synthesis_params("model = duntley\nbeta = 1\nveiling = 0.5\ndepth = 1\n"), "x"),
               InvalidInput);
}

// ---------------------------------------------------------------------------
// synthesize

struct SynthFixture {
  TempDir dir;
  fs::path clean = dir / "clean";
  fs::path out = dir / "out";

  explicit SynthFixture(const ImageTensor& img, const std::string& params) {
    fs::create_directories(clean);
    io::write_png(clean / "img.png", img);
    write_text(dir / "params.txt", params);
  }
  Captured run(std::uint64_t seed = 0) const {
    return capture([&](std::ostream& o, std::ostream& e) { return cmd_synthesize(clean, dir / "params.txt", out, seed, o, e); });
  }
  ImageTensor under() const { return io::read_image(out / "synthetic" / "underwater" / "img.png"); }
  ImageTensor ref() const { return io::read_image(out / "synthetic" / "reference" / "img.png"); }
};

TEST(Synthesize, ZeroAttenuationReproducesReference) {
  SynthFixture f(gradient_clean(20, 24), "beta = 0\nveiling = 0.3, 0.5, 0.6\ndepth = 4\n");
  ASSERT_EQ(f.run().code, kExitOk);
  EXPECT_TRUE(std::ranges::equal(f.under().data(), f.ref().data()));
}

TEST(Synthesize, HeavyAttenuationGivesVeilingLight) {
  SynthFixture f(gradient_clean(20, 24), "beta = 50\nveiling = 0.3, 0.5, 0.6\ndepth = 1\n");
  ASSERT_EQ(f.run().code, kExitOk);
  const auto u = f.under();
  const Rgb a{0.3, 0.5, 0.6};
  for (std::size_t p = 0; p < u.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(u[3 * p + c], a[c], 0.5 / 255 + 1e-12);
}

TEST(Synthesize, MatchesFormationModelByHand) {
  SynthFixture f(gradient_clean(20, 24), "beta = 0.6, 0.2, 0.1\nveiling = 0.3, 0.5, 0.6\ndepth = 1\n");
  ASSERT_EQ(f.run().code, kExitOk);
  const auto u = f.under(), j = f.ref();
  const Rgb beta{0.6, 0.2, 0.1}, a{0.3, 0.5, 0.6};
  for (const auto& [y, x] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {3, 17}, {10, 10}, {19, 2}, {19, 23}})
    for (std::size_t c = 0; c < 3; ++c) {
      const double t = std::exp(-beta[c]);
      EXPECT_NEAR(u.at(y, x, c), j.at(y, x, c) * t + a[c] * (1 - t), 0.5 / 255 + 1e-12) << y << "," << x << "," << c;
    }
}

TEST(Synthesize, LogAndDeterminism) {
  SynthFixture f(gradient_clean(16, 16), "beta = 0.5\nveiling = 0.4\ndepth = 2\nnoise_sigma = 0.02\n");
  ASSERT_EQ(f.run(5).code, kExitOk);
  const auto first = slurp(f.out / "synthetic" / "underwater" / "img.png");
  const auto log = read_json_file(f.out / "synthesis.json");
  EXPECT_EQ(log["seed"], 5);
  EXPECT_TRUE(log["images"].contains("img"));
  ASSERT_EQ(f.run(5).code, kExitOk);
  EXPECT_EQ(slurp(f.out / "synthetic" / "underwater" / "img.png"), first);
  ASSERT_EQ(f.run(6).code, kExitOk);
  EXPECT_NE(slurp(f.out / "synthetic" / "underwater" / "img.png"), first);
}

TEST(Synthesize, UnknownOverrideStemWarns) {
  SynthFixture f(gradient_clean(8, 8), "beta = 0.5\nveiling = 0.4\ndepth = 2\nghost.depth = 3\n");
  const auto r = f.run();
  EXPECT_EQ(r.code, kExitWarnings);
  EXPECT_NE(r.err.find("ghost"), std::string::npos);
}

TEST(Synthesize, RoundTripThroughPreparedTargets) {
  const Rgb a{0.3, 0.5, 0.6};
  const Rgb beta{0.6, 0.2, 0.1};
  SynthFixture f(balanced_clean(32, 32, a), "beta = 0.6, 0.2, 0.1\nveiling = 0.3, 0.5, 0.6\ndepth = 1\n");
  io::write_png(f.clean / "img2.png", balanced_clean(32, 32, a));
  ASSERT_EQ(f.run().code, kExitOk);

  RunConfig cfg;
  cfg.dataset_root = f.out.string();
  cfg.cache_dir = (f.dir / "cache").string();
  cfg.resolution = 32;
  cfg.quadrisect = false;
  ASSERT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_prepare_data(cfg, o, e); }).code, kExitOk);
  CachedSamples cache(resolve_prepared_dir(cfg));
  const auto s = cache.load("synthetic/img");
  for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(s.a.value()[c], a[c], 0.02);
  for (std::size_t p = 0; p < s.x1.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(s.t.data[3 * p + c], std::exp(-beta[c]), 0.05);
}

// ---------------------------------------------------------------------------
// prepare-data

TEST(PrepareData, EmptyRootWarns) {
  TempDir dir;
  fs::create_directories(dir / "root");
  RunConfig cfg;
  cfg.dataset_root = (dir / "root").string();
  cfg.cache_dir = (dir / "cache").string();
  const auto r = capture([&](std::ostream& o, std::ostream& e) { return cmd_prepare_data(cfg, o, e); });
  EXPECT_EQ(r.code, kExitWarnings);
  EXPECT_NE(r.err.find("no samples"), std::string::npos);
}

TEST(PrepareData, MissingRootIsFatal) {
  RunConfig cfg;
  EXPECT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_prepare_data(cfg, o, e); }).code, kExitFatal);
  cfg.dataset_root = "/nonexistent/dgd";
  EXPECT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_prepare_data(cfg, o, e); }).code, kExitFatal);
}

TEST(Train, WithoutPreparedCacheIsFatal) {
  TempDir dir;
  RunConfig cfg;
  cfg.prepared_dir = (dir / "nothing").string();
  cfg.output_dir = (dir / "runs").string();
  const auto r = capture([&](std::ostream& o, std::ostream& e) { return cmd_train(cfg, o, e); });
  EXPECT_EQ(r.code, kExitFatal);
  EXPECT_NE(r.err.find("prepare-data"), std::string::npos);
}

// ---------------------------------------------------------------------------
// dewater

TEST(Dewater, PaddingGeometry) {
  EXPECT_EQ(next_multiple(300, 256), 512u);
  EXPECT_EQ(next_multiple(200, 256), 256u);
  EXPECT_EQ(next_multiple(256, 256), 256u);
  const std::vector<std::size_t> expect{0, 1, 2, 3, 2, 1, 0, 1, 2, 3, 2};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(mirror_index(i, 4), expect[i]);
  EXPECT_EQ(mirror_index(5, 1), 0u);

  const auto img = gradient_clean(300, 200);
  const auto padded = reflect_pad(img, 512, 256);
  EXPECT_EQ(padded.height(), 512u);
  EXPECT_EQ(padded.width(), 256u);
  EXPECT_DOUBLE_EQ(padded.at(300, 10, 1), img.at(298, 10, 1));
  EXPECT_DOUBLE_EQ(padded.at(5, 200, 2), img.at(5, 198, 2));
  EXPECT_TRUE(std::ranges::equal(crop(padded, 0, 0, 300, 200).data(), img.data()));
}

TEST(Dewater, PreservesSizeAndIsReproducible) {
  TempDir dir;
  GanModel<float> m(ModelConfig::uniform(4, 3, 4), 1);
  save_checkpoint(dir / "m.dgd", m, CheckpointState{});
  fs::create_directories(dir / "in");
  io::write_png(dir / "in" / "a.png", gradient_clean(30, 21));
  io::write_png(dir / "in" / "b.png", gradient_clean(16, 16));
  auto run = [&](const fs::path& out) {
    return capture([&](std::ostream& o, std::ostream& e) { return cmd_dewater(dir / "m.dgd", dir / "in", out, 4, o, e); });
  };
  ASSERT_EQ(run(dir / "o1").code, kExitOk);
  const auto a = io::read_image(dir / "o1" / "a_dewatered.png");
  EXPECT_EQ(a.height(), 30u);
  EXPECT_EQ(a.width(), 21u);
  ASSERT_EQ(run(dir / "o2").code, kExitOk);
  EXPECT_EQ(slurp(dir / "o1" / "a_dewatered.png"), slurp(dir / "o2" / "a_dewatered.png"));

  fs::remove(dir / "in" / "b.png");
  ASSERT_EQ(run(dir / "o3").code, kExitOk);
  EXPECT_EQ(slurp(dir / "o1" / "a_dewatered.png"), slurp(dir / "o3" / "a_dewatered.png"));
}

TEST(Dewater, BadInputsAreFatal) {
  TempDir dir;
  fs::create_directories(dir / "empty");
  EXPECT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_dewater(dir / "none.dgd", dir / "empty", dir / "o", 0, o, e); }).code,
            kExitFatal);
  GanModel<float> m(ModelConfig::uniform(4, 3, 4), 1);
  save_checkpoint(dir / "m.dgd", m, CheckpointState{});
  EXPECT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_dewater(dir / "m.dgd", dir / "empty", dir / "o", 0, o, e); }).code,
            kExitFatal);
}

// ---------------------------------------------------------------------------
// evaluate

TEST(Evaluate, IdenticalDirectories) {
  TempDir dir;
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "ref");
  for (const auto* name : {"x", "y"}) {
    const auto img = gradient_clean(24, 24);
    io::write_png(dir / "pred" / (std::string(name) + "_dewatered.png"), img);
    io::write_png(dir / "ref" / (std::string(name) + ".png"), img);
  }
  const auto r = capture([&](std::ostream& o, std::ostream& e) {
    return cmd_evaluate(dir / "pred", dir / "ref", dir / "report.csv", o, e);
  });
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = read_json_file(dir / "report.json");
  ASSERT_EQ(j["per_image"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["per_image"][0]["ed_avg"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["per_image"][0]["psnr_db"].get<double>(), 100.0);
  EXPECT_DOUBLE_EQ(j["per_image"][0]["ssim"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
}

TEST(Evaluate, NoReferenceScoresUiqmOnly) {
  TempDir dir;
  fs::create_directories(dir / "pred");
  io::write_png(dir / "pred" / "x.png", gradient_clean(24, 24));
  ASSERT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_evaluate(dir / "pred", std::nullopt, dir / "r", o, e); }).code,
            kExitOk);
  const auto row = read_json_file(dir / "r.json")["per_image"][0];
  EXPECT_TRUE(row["ed_avg"].is_null());
  EXPECT_TRUE(row["uiqm"].is_number());
}

TEST(Evaluate, MismatchedStemsWarnOrFail) {
  TempDir dir;
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "ref");
  io::write_png(dir / "pred" / "a.png", gradient_clean(16, 16));
  io::write_png(dir / "pred" / "b.png", gradient_clean(16, 16));
  io::write_png(dir / "ref" / "b.png", gradient_clean(16, 16));
  io::write_png(dir / "ref" / "c.png", gradient_clean(16, 16));
  const auto r = capture([&](std::ostream& o, std::ostream& e) { return cmd_evaluate(dir / "pred", dir / "ref", dir / "r", o, e); });
  EXPECT_EQ(r.code, kExitWarnings);
  EXPECT_EQ(read_json_file(dir / "r.json")["per_image"].size(), 1u);

  fs::remove(dir / "ref" / "b.png");
  EXPECT_EQ(capture([&](std::ostream& o, std::ostream& e) { return cmd_evaluate(dir / "pred", dir / "ref", dir / "r", o, e); }).code,
            kExitFatal);
}

// ---------------------------------------------------------------------------
// The installed binary

TEST(Binary, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_NE(run_cli("no-such-command"), 0);
  fs::create_directories(dir / "empty");
  EXPECT_EQ(run_cli("prepare-data --root \"" + (dir / "empty").string() + "\" --out \"" + (dir / "cache").string() + "\""),
            kExitWarnings);
  write_text(dir / "bad.txt", "bogus = 1\n");
  fs::create_directories(dir / "clean");
  io::write_png(dir / "clean" / "c.png", gradient_clean(8, 8));
  EXPECT_EQ(run_cli("synthesize --clean \"" + (dir / "clean").string() + "\" --params \"" + (dir / "bad.txt").string() +
                    "\" --out \"" + (dir / "o").string() + "\""),
            kExitFatal);
  EXPECT_EQ(run_cli("train --set bogus=1"), kExitFatal);
}

TEST(Binary, EndToEndIsByteReproducible) {
  TempDir dir;
  fs::create_directories(dir / "clean");
  for (int i = 0; i < 3; ++i) io::write_png(dir / "clean" / ("c" + std::to_string(i) + ".png"), gradient_clean(64 + 8 * i, 72));
  write_text(dir / "p.txt", "beta = 0.8, 0.4, 0.2\nveiling = 0.1, 0.4, 0.5\ndepth = 1\n");
  write_text(dir / "run.cfg", "base_width = 2\ndepth = 3\ndisc_base_width = 2\nepochs = 1\nbatch_size = 2\nresolution = 32\n"
                              "quadrisect = true\n");
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  for (const auto* tag : {"a", "b"}) {
    const fs::path root = dir / tag;
    ASSERT_EQ(run_cli("synthesize --clean " + q(dir / "clean") + " --params " + q(dir / "p.txt") + " --out " + q(root / "data")), 0);
    ASSERT_EQ(run_cli("prepare-data --config " + q(dir / "run.cfg") + " --root " + q(root / "data") + " --out " + q(root / "cache")), 0);
    ASSERT_EQ(run_cli("train --config " + q(dir / "run.cfg") + " --root " + q(root / "data") + " --cache " + q(root / "cache") +
                      " --out " + q(root / "run")),
              0);
  }
  EXPECT_EQ(slurp(dir / "a" / "run" / "history.csv"), slurp(dir / "b" / "run" / "history.csv"));
  EXPECT_EQ(slurp(dir / "a" / "run" / "checkpoints" / "epoch_000001.dgd"),
            slurp(dir / "b" / "run" / "checkpoints" / "epoch_000001.dgd"));
}

}  // namespace
}  // namespace dgd::cli
