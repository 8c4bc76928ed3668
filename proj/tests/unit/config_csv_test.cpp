#include "nemon/config.hpp"
#include "nemon/csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace nemon {
namespace {

TEST(ConfigTest, ParsesDottedKeys) {
  const Config cfg = Config::parse("# header\nmodel.n = 100\n\ntrain.lr=0.015\nattack.kinds = fgsm, pgdm\n");
  EXPECT_EQ(cfg.get_int("model.n", 0), 100);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.lr", 0), 0.015);
  EXPECT_EQ(cfg.get_strings("attack.kinds", {}), (std::vector<std::string>{"fgsm", "pgdm"}));
  EXPECT_EQ(cfg.get_double("missing", 2.5), 2.5);
  EXPECT_THROW(cfg.require_string("missing"), ConfigError);
  EXPECT_EQ(cfg.canonical(), "attack.kinds=fgsm, pgdm\nmodel.n=100\ntrain.lr=0.015\n");
  EXPECT_EQ(cfg.canonical({"model.n"}), "attack.kinds=fgsm, pgdm\ntrain.lr=0.015\n");
}

TEST(ConfigTest, RejectsMalformed) {
  EXPECT_THROW(Config::parse("novalue\n"), ConfigError);
  EXPECT_THROW(Config::parse("a=1\na=2\n"), ConfigError);
  EXPECT_THROW(Config::parse("=1\n"), ConfigError);
  const Config cfg = Config::parse("x = abc\ny = 1.5\nz = -1\n");
  EXPECT_THROW(cfg.get_double("x", 0), ConfigError);
  EXPECT_THROW(cfg.get_int("y", 0), ConfigError);
  EXPECT_THROW(cfg.get_u64("z", 0), ConfigError);
  EXPECT_THROW(cfg.get_bool("x", false), ConfigError);
}

TEST(ConfigTest, Hashing) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(CsvTest, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(42LL), "42");
  for (double v : {0.1 + 0.2, 1e-300, -123.456e7, 5e-324}) EXPECT_EQ(parse_number(format_number(v)), v);
  EXPECT_TRUE(std::isnan(parse_number("nan")));
  EXPECT_THROW(parse_number("1.0x"), CsvError);
}

TEST(CsvTest, RoundTripIsByteExact) {
  CsvTable t;
  t.header = {"epsilon", "empirical_accuracy", "certified_accuracy", "attack_kind"};
  t.add_row({format_number(0.05), format_number(0.9), format_number(1.0 / 3.0), "fgsm"});
  t.add_row({format_number(0.1), format_number(0.5), format_number(0.0), "fgsm"});
  const std::string text = emit_csv(t);
  EXPECT_EQ(text.substr(0, 56), "epsilon,empirical_accuracy,certified_accuracy,attack_kin");
  const CsvTable back = parse_csv(text);
  EXPECT_EQ(emit_csv(back), text);
  EXPECT_DOUBLE_EQ(back.number(0, "certified_accuracy"), 1.0 / 3.0);
  EXPECT_THROW(back.column("nope"), CsvError);
  EXPECT_THROW(t.add_row({"a"}), CsvError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), CsvError);
  EXPECT_THROW(parse_csv("a,b\n1,2"), CsvError);
}

}  // namespace
}  // namespace nemon
