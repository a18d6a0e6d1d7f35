#include "sac/config.hpp"
#include "sac/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace sac;

TEST(Config, Defaults) {
  Config cfg;
  EXPECT_EQ(cfg.k, 10u);
  EXPECT_EQ(cfg.alpha, 0.5);
  EXPECT_EQ(cfg.d_phi, 0.1);
  EXPECT_EQ(cfg.d_e, 1024u);
  EXPECT_EQ(cfg.d_j, 1024u);
  EXPECT_EQ(cfg.word_dim, 300u);
  EXPECT_EQ(cfg.batch_size, 12u);
  EXPECT_EQ(cfg.lr, 0.001);
  EXPECT_EQ(cfg.momentum, 0.9);
  EXPECT_EQ(cfg.weight_decay, 1e-5);
  EXPECT_EQ(cfg.lr_decay, 0.9);
  EXPECT_EQ(cfg.lr_decay_every, 2u);
  EXPECT_EQ(cfg.epochs, 20u);
  EXPECT_EQ(cfg.aug_prob, 1.0);
  EXPECT_EQ(cfg.combine, drop::Combine::kOr);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, DumpRoundTrips) {
  Config cfg;
  cfg.set("alpha", "0.3");
  cfg.set("widths", "4, 8,16");
  cfg.set("d-phi", "0.25");
  cfg.set("mode", "localized");
  cfg.set("combine", "and");
  Config back;
  for (const auto& [k, v] : parse_key_values(cfg.dump(), "dump")) back.set(k, v);
  EXPECT_EQ(back.dump(), cfg.dump());
  EXPECT_EQ(back.widths, (std::vector<std::size_t>{4, 8, 16}));
  EXPECT_EQ(back.d_phi, 0.25);
}

TEST(Config, FileThenOverride) {
  const auto path = std::filesystem::temp_directory_path() / "sac_cfg_test.txt";
  std::ofstream(path) << "# comment\nk = 5\n\nalpha=0.7  # trailing\n";
  Config cfg = load_config(path);
  EXPECT_EQ(cfg.k, 5u);
  EXPECT_EQ(cfg.alpha, 0.7);
  cfg.set("k", "2");
  EXPECT_EQ(cfg.k, 2u);
}

TEST(Config, RejectsBadInput) {
  Config cfg;
  EXPECT_THROW(cfg.set("nope", "1"), Error);
  EXPECT_THROW(cfg.set("k", "ten"), Error);
  EXPECT_THROW(cfg.set("alpha", "0.5x"), Error);
  EXPECT_THROW(cfg.set("mode", "fast"), Error);
  EXPECT_THROW(parse_key_values("k 5\n", "inline"), Error);
  cfg.set("alpha", "1.5");
  EXPECT_THROW(cfg.validate(), Error);
  cfg = Config{};
  cfg.set("d_phi", "1");
  EXPECT_THROW(cfg.validate(), Error);
  cfg = Config{};
  cfg.set("pooled_blocks", "9");
  EXPECT_THROW(cfg.validate(), Error);
}
