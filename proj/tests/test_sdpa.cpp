#include <doctest.h>

#include <stosdp/errors.hpp>
#include <stosdp/sdpa.hpp>

#include "support/instances.hpp"

#include <filesystem>
#include <random>
#include <sstream>

using namespace stosdp;
using stosdp::testing::random_sym;

namespace {

BlockSdp random_sdp(std::mt19937_64& rng, int rows) {
  std::normal_distribution<double> g;
  BlockSdp sdp;
  const auto b0 = sdp.add_psd_block(3);
  const auto b1 = sdp.add_psd_block(1);
  const auto n0 = sdp.add_nonneg(g(rng));
  const auto n1 = sdp.add_nonneg(g(rng));
  const auto f0 = sdp.add_free(g(rng));
  sdp.add_cost(b0, random_sym(rng, 3));
  sdp.add_cost(b1, random_sym(rng, 1));
  for (int j = 0; j < rows; ++j) {
    const int r = sdp.add_row(g(rng));
    sdp.add_term(r, b0, random_sym(rng, 3));
    if (j % 2 == 0) sdp.add_term(r, b1, random_sym(rng, 1));
    sdp.add_term(r, n0, g(rng));
    if (j % 3 == 0) sdp.add_term(r, n1, g(rng));
    sdp.add_term(r, f0, g(rng));
  }
  return sdp;
}

SdpaImport round_trip(const BlockSdp& sdp, const SdpaSidecar& side) {
  std::stringstream dat, car;
  write_sdpa(dat, sdp);
  write_sidecar(car, side);
  return read_sdpa(dat, car);
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const BlockSdp sdp = random_sdp(rng, 2 + k % 4);
    const auto back = round_trip(sdp, SdpaSidecar{sdp.num_nonneg(), sdp.num_free(), {}, std::nullopt});
    CHECK(structurally_equal(sdp, back.sdp, 0.0));
    CHECK(back.sdp.num_psd_blocks() == sdp.num_psd_blocks());
    CHECK(back.sdp.num_nonneg() == sdp.num_nonneg());
    CHECK(back.sdp.num_free() == sdp.num_free());
  }
}

TEST_CASE("known layout of a tiny problem") {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::from_rows({{1, 0}, {0, 0}}));
  const auto x = sdp.add_nonneg(2.0);
  const int r = sdp.add_row(0.25);
  sdp.add_term(r, y, SymMatrix::from_rows({{0, 0.5}, {0.5, 0}}));
  sdp.add_term(r, x, 1.0);

  std::stringstream out;
  write_sdpa(out, sdp);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(out, line)) {
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) continue;
    tokens.push_back(line);
  }
  REQUIRE(tokens.size() >= 4);
  CHECK(tokens[0].find('1') == 0);
  CHECK(tokens[1].find('2') == 0);
  CHECK(tokens[2].find("2 -1") != std::string::npos);
  CHECK(tokens[3].find("0.25") != std::string::npos);
  // F0 = -C: entry (1,1) of block 1 is -1, the nonneg cost becomes -2.
  CHECK(out.str().find("0 1 1 1 -1") != std::string::npos);
  CHECK(out.str().find("0 2 1 1 -2") != std::string::npos);
  CHECK(out.str().find("1 1 1 2 0.5") != std::string::npos);
}

TEST_CASE("sidecar carries binaries and big-M") {
  std::mt19937_64 rng(8);
  const BlockSdp sdp = random_sdp(rng, 3);
  const SdpaSidecar side{sdp.num_nonneg(), sdp.num_free(), {1}, 12.5};
  const auto back = round_trip(sdp, side);
  CHECK(back.side.n_nonneg == 2);
  CHECK(back.side.n_free == 1);
  CHECK(back.side.binary_nonneg == std::vector<int>{1});
  REQUIRE(back.side.big_M.has_value());
  CHECK(*back.side.big_M == 12.5);
}

TEST_CASE("export and import through files") {
  std::mt19937_64 rng(21);
  const BlockSdp sdp = random_sdp(rng, 4);
  const auto dir = std::filesystem::temp_directory_path() / "stosdp_sdpa_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "problem.dat-s";
  export_sdpa(path, sdp, {0}, 3.0);
  CHECK(std::filesystem::exists(path));
  CHECK(std::filesystem::exists(path.string() + ".sidecar"));
  const auto back = import_sdpa(path);
  CHECK(structurally_equal(sdp, back.sdp, 0.0));
  CHECK(back.side.binary_nonneg == std::vector<int>{0});
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(import_sdpa(dir / "missing.dat-s"), ParseError);
}

TEST_CASE("imported problem solves to the same value") {
  BlockSdp sdp;
  const auto y = sdp.add_psd_block(2);
  sdp.add_cost(y, SymMatrix::identity(2));
  const auto f = sdp.add_free(0.5);
  const int r = sdp.add_row(1.0);
  sdp.add_term(r, y, SymMatrix::from_rows({{1, 0}, {0, -1}}));
  const int r2 = sdp.add_row(2.0);
  sdp.add_term(r2, f, 1.0);
  sdp.add_term(r2, y, SymMatrix::from_rows({{0, 1}, {1, 0}}));
  const auto back = round_trip(sdp, SdpaSidecar{0, 1, {}, std::nullopt});
  const auto a = solve(sdp);
  const auto b = solve(back.sdp);
  REQUIRE(a.optimal());
  REQUIRE(b.optimal());
  CHECK(a.pobj == doctest::Approx(b.pobj).epsilon(1e-9));
}

TEST_CASE("malformed input is rejected") {
  auto parse = [](const std::string& dat, const std::string& car) {
    std::stringstream d(dat), c(car);
    return read_sdpa(d, c);
  };
  const std::string car = "stosdp-sdpa-sidecar 1\nnonneg 0\nfree 0\nbinary 0\nbig_M none\n";
  CHECK_THROWS_AS(parse("", car), ParseError);
  CHECK_THROWS_AS(parse("1\n1\n2\n1.0\n0 1 1 1\n", car), ParseError);
  CHECK_THROWS_AS(parse("1\n1\n2\n1.0\n0 2 1 1 1\n", car), ParseError);
  CHECK_THROWS_AS(parse("1\n1\n2\n1.0\n0 1 3 1 1\n", car), ParseError);
  CHECK_THROWS_AS(parse("1\n1\nabc\n1.0\n", car), ParseError);
  CHECK_THROWS_AS(parse("1\n1\n2\n1.0\n0 1 1 1 1\n", "garbage\n"), ParseError);
  // A free pair whose halves disagree.
  const std::string free_car = "stosdp-sdpa-sidecar 1\nnonneg 0\nfree 1\nbinary 0\nbig_M none\n";
  CHECK_THROWS_AS(parse("1\n1\n-2\n1.0\n1 1 1 1 1\n1 1 2 2 1\n", free_car), ParseError);
  CHECK_NOTHROW(parse("1\n1\n-2\n1.0\n1 1 1 1 1\n1 1 2 2 -1\n", free_car));
}
