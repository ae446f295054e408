#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "fedq/core_ml.hpp"
#include "fedq/data.hpp"
#include "fedq/errors.hpp"

using namespace fedq;

namespace {

std::filesystem::path fixture_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "fedq_data_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_bytes(const std::filesystem::path& p,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

void be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

// 4 images of 2x2 pixels plus labels {0,1,2,1}.
std::vector<std::uint8_t> idx_images() {
  std::vector<std::uint8_t> b;
  be32(b, 0x803);
  be32(b, 4);
  be32(b, 2);
  be32(b, 2);
  const std::uint8_t px[16] = {0,  255, 128, 64,  10, 20,  30,  40,
                               50, 60,  70,  80,  90, 100, 110, 120};
  b.insert(b.end(), px, px + 16);
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t count) {
  std::vector<std::uint8_t> b;
  be32(b, 0x801);
  be32(b, count);
  const std::uint8_t lab[4] = {0, 1, 2, 1};
  b.insert(b.end(), lab, lab + count);
  return b;
}

bool message_contains(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("synthetic data is balanced, bounded, deterministic") {
  rng_stream r1 = rng_stream::derive(71, rng_domain::test);
  rng_stream r2 = rng_stream::derive(71, rng_domain::test);
  const dataset a = generate_synthetic(1000, 8, 4, 3.0, r1);
  const dataset b = generate_synthetic(1000, 8, 4, 3.0, r2);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  REQUIRE(a.n == 1000);
  REQUIRE(a.dim == 8);
  std::vector<int> counts(4, 0);
  for (int y : a.y) ++counts[static_cast<std::size_t>(y)];
  for (int c : counts) CHECK(c == 250);
  double lo = 1.0, hi = 0.0;
  for (double v : a.x) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0);  // min-max normalization touches both ends
  CHECK(hi == 1.0);

  rng_stream r3 = rng_stream::derive(71, rng_domain::test);
  CHECK_THROWS_AS(generate_synthetic(100, 3, 4, 1.0, r3), config_error);
  CHECK_THROWS_AS(generate_synthetic(100, 8, 4, -1.0, r3), config_error);
  CHECK_THROWS_AS(generate_synthetic(0, 8, 4, 1.0, r3), config_error);
}

TEST_CASE("widely separated classes are linearly learnable") {
  rng_stream rng = rng_stream::derive(72, rng_domain::test);
  const dataset d = generate_synthetic(600, 20, 4, 10.0, rng);
  std::vector<int> all(static_cast<std::size_t>(d.n));
  for (int i = 0; i < d.n; ++i) all[static_cast<std::size_t>(i)] = i;
  const batch full = gather(d, all);

  model m;
  m.spec = {model_kind::logistic, d.dim, d.n_classes, 0};
  m.w.assign(static_cast<std::size_t>(param_count(m.spec)), 0.0);
  for (int it = 0; it < 50; ++it) m = sgd_step(m, gradient(m, full), 3.0);
  CHECK(evaluate(m, d).accuracy >= 0.99);
}

TEST_CASE("indistinguishable classes stay near chance accuracy") {
  rng_stream rng = rng_stream::derive(73, rng_domain::test);
  const dataset d = generate_synthetic(2000, 8, 4, 0.0, rng);
  std::vector<int> all(static_cast<std::size_t>(d.n));
  for (int i = 0; i < d.n; ++i) all[static_cast<std::size_t>(i)] = i;
  const batch full = gather(d, all);
  model m;
  m.spec = {model_kind::logistic, d.dim, d.n_classes, 0};
  m.w.assign(static_cast<std::size_t>(param_count(m.spec)), 0.0);
  for (int it = 0; it < 50; ++it) m = sgd_step(m, gradient(m, full), 3.0);
  CHECK(std::abs(evaluate(m, d).accuracy - 0.25) <= 0.05);
}

TEST_CASE("idx loader recovers a hand-built fixture exactly") {
  const auto dir = fixture_dir();
  const auto img = dir / "images.idx";
  const auto lab = dir / "labels.idx";
  write_bytes(img, idx_images());
  write_bytes(lab, idx_labels(4));

  const dataset d = load_idx(img.string(), lab.string());
  CHECK(d.n == 4);
  CHECK(d.dim == 4);
  CHECK(d.n_classes == 3);
  CHECK(d.y == std::vector<int>{0, 1, 2, 1});
  CHECK(d.x[0] == 0.0);
  CHECK(d.x[1] == 1.0);
  CHECK(d.x[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(d.x[3] == doctest::Approx(64.0 / 255.0).epsilon(1e-15));
  CHECK(d.x[15] == doctest::Approx(120.0 / 255.0).epsilon(1e-15));

  // loading twice gives the same dataset
  const dataset d2 = load_idx(img.string(), lab.string());
  CHECK(d2.x == d.x);
  CHECK(d2.y == d.y);
}

TEST_CASE("idx loader reports malformed files precisely") {
  const auto dir = fixture_dir();
  const auto img = dir / "images.idx";
  const auto lab = dir / "labels.idx";
  write_bytes(img, idx_images());
  write_bytes(lab, idx_labels(4));

  // truncated image data: header promises 4 images, file holds 1.5
  auto trunc = idx_images();
  trunc.resize(16 + 6);
  const auto img_t = dir / "trunc.idx";
  write_bytes(img_t, trunc);
  try {
    load_idx(img_t.string(), lab.string());
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(message_contains(e, "truncated at image 1"));
    CHECK(message_contains(e, "trunc.idx"));
  }

  // image/label record counts disagree
  const auto lab3 = dir / "labels3.idx";
  write_bytes(lab3, idx_labels(3));
  try {
    load_idx(img.string(), lab3.string());
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(message_contains(e, "4 images vs 3 labels"));
  }

  // wrong magic in either file
  auto badmagic = idx_images();
  badmagic[3] = 0x07;
  const auto img_b = dir / "badmagic.idx";
  write_bytes(img_b, badmagic);
  CHECK_THROWS_AS(load_idx(img_b.string(), lab.string()), data_error);
  CHECK_THROWS_AS(load_idx(img.string(), img.string()), data_error);
  CHECK_THROWS_AS(load_idx((dir / "missing.idx").string(), lab.string()),
                  data_error);
}

TEST_CASE("csv loader parses, splits the label column, and normalizes") {
  const auto dir = fixture_dir();
  const auto p = dir / "tiny.csv";
  write_text(p, "5.0,0,1.0\n3.0,1,2.0\n1.0,0,3.0\n");
  const dataset d = load_csv(p.string(), 1, false);
  CHECK(d.n == 3);
  CHECK(d.dim == 2);
  CHECK(d.n_classes == 2);
  CHECK(d.y == std::vector<int>{0, 1, 0});
  // column minima/maxima map to 0/1
  CHECK(d.x == std::vector<double>{1.0, 0.0, 0.5, 0.5, 0.0, 1.0});

  // header rows are skipped on request
  const auto ph = dir / "tiny_header.csv";
  write_text(ph, "a,b,c\n5.0,0,1.0\n3.0,1,2.0\n1.0,0,3.0\n");
  const dataset dh = load_csv(ph.string(), 1, true);
  CHECK(dh.x == d.x);
  CHECK(dh.y == d.y);

  // constant feature columns normalize to zero
  const auto pc = dir / "constant.csv";
  write_text(pc, "2.0,0\n2.0,1\n2.0,0\n");
  const dataset dc = load_csv(pc.string(), 1, false);
  CHECK(dc.x == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("csv loader names the offending row and column") {
  const auto dir = fixture_dir();
  const auto p = dir / "bad.csv";
  write_text(p, "1.0,0,2.0\n1.0,xx,2.0\n");
  try {
    load_csv(p.string(), 0, false);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(message_contains(e, "row 2"));
    CHECK(message_contains(e, "column 1"));
    CHECK(message_contains(e, "'xx'"));
  }

  const auto pl = dir / "badlabel.csv";
  write_text(pl, "1.0,1.5\n2.0,0\n");
  try {
    load_csv(pl.string(), 1, false);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(message_contains(e, "row 1"));
    CHECK(message_contains(e, "label"));
  }

  const auto pn = dir / "neg.csv";
  write_text(pn, "1.0,-1\n2.0,0\n");
  CHECK_THROWS_AS(load_csv(pn.string(), 1, false), data_error);

  const auto pw = dir / "width.csv";
  write_text(pw, "1.0,0,2.0\n1.0,1\n");
  try {
    load_csv(pw.string(), 0, false);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(message_contains(e, "row 2"));
    CHECK(message_contains(e, "expected 3"));
  }

  const auto po = dir / "outofrange.csv";
  write_text(po, "1.0,0\n");
  CHECK_THROWS_AS(load_csv(po.string(), 5, false), data_error);
  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string(), 0, false), data_error);
}

TEST_CASE("gather copies rows and validates indices") {
  rng_stream rng = rng_stream::derive(74, rng_domain::test);
  const dataset d = generate_synthetic(20, 5, 2, 1.0, rng);
  const batch b = gather(d, {3, 7, 3});
  REQUIRE(b.n == 3);
  CHECK(b.dim == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(b.x[static_cast<std::size_t>(k)] == d.x[3 * 5 + static_cast<std::size_t>(k)]);
    CHECK(b.x[static_cast<std::size_t>(5 + k)] ==
          d.x[7 * 5 + static_cast<std::size_t>(k)]);
    CHECK(b.x[static_cast<std::size_t>(10 + k)] ==
          d.x[3 * 5 + static_cast<std::size_t>(k)]);
  }
  CHECK(b.y[0] == d.y[3]);
  CHECK(b.y[1] == d.y[7]);
  CHECK_THROWS_AS(gather(d, {}), dimension_error);
  CHECK_THROWS_AS(gather(d, {20}), dimension_error);
  CHECK_THROWS_AS(gather(d, {-1}), dimension_error);
}
