#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "heareq/rng.hpp"
#include "heareq/spectra.hpp"

#include "oracle_helpers.hpp"

using namespace heareq;

namespace {

FrequencyResponse fr_of(std::vector<cplx> bins, int nf) {
  return FrequencyResponse(std::move(bins), nf, SampleRate());
}

}  // namespace

TEST_CASE("type invariants are enforced") {
  SECTION("sample rate must be positive and finite") {
    REQUIRE_THROWS_AS(SampleRate(0.0), DataError);
    REQUIRE_THROWS_AS(SampleRate(-1.0), DataError);
    REQUIRE(SampleRate().hertz == 40000.0);
  }
  SECTION("impulse response rejects empty and non-finite taps") {
    REQUIRE_THROWS_AS(ImpulseResponse({}, SampleRate()), DimensionError);
    REQUIRE_THROWS_AS(ImpulseResponse({1.0, std::nan("")}, SampleRate()), DataError);
  }
  SECTION("one-sided bin count must match the fft size") {
    REQUIRE_THROWS_AS(fr_of({{1, 0}, {1, 0}}, 4), DimensionError);
    REQUIRE_THROWS_AS(fr_of({{1, 0}, {1, 0}, {1, 0}}, 3), DimensionError);
    REQUIRE_NOTHROW(fr_of({{1, 0}, {1, 0}, {1, 0}}, 4));
  }
  SECTION("bin frequencies cover DC through Nyquist") {
    const FrequencyResponse fr = fr_of({{1, 0}, {1, 0}, {1, 0}}, 4);
    REQUIRE(fr.bin_freq(0) == 0.0);
    REQUIRE(fr.bin_freq(1) == 10000.0);
    REQUIRE(fr.bin_freq(2) == 20000.0);
    REQUIRE(fr.nyquist() == 20000.0);
  }
  SECTION("band edges must be ordered and inside the grid") {
    REQUIRE_THROWS_AS((Band{2000.0, 1000.0}.validate(20000.0)), ConfigError);
    REQUIRE_THROWS_AS((Band{0.0, 30000.0}.validate(20000.0)), ConfigError);
    REQUIRE_NOTHROW((Band{0.0, 20000.0}.validate(20000.0)));
  }
}

TEST_CASE("phasor_turns is exact on the axes") {
  REQUIRE(phasor_turns(0.0) == cplx(1.0, 0.0));
  REQUIRE(phasor_turns(0.25) == cplx(0.0, 1.0));
  REQUIRE(phasor_turns(-0.25) == cplx(0.0, -1.0));
  REQUIRE(phasor_turns(0.5) == cplx(-1.0, 0.0));
  REQUIRE(phasor_turns(-0.5) == cplx(-1.0, 0.0));
  REQUIRE(phasor_turns(3.0) == cplx(1.0, 0.0));
  REQUIRE(phasor_turns(-2.75) == cplx(0.0, 1.0));
  REQUIRE(std::abs(phasor_turns(1.0 / 3.0) - std::polar(1.0, 2.0 * M_PI / 3.0)) < 1e-15);
}

TEST_CASE("ir_to_fr matches hand values and the direct DFT") {
  SECTION("unit impulse has a flat spectrum") {
    const FrequencyResponse fr = ir_to_fr(ImpulseResponse({1, 0, 0, 0}, SampleRate()), 4);
    REQUIRE(fr.n_bins() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(fr[k].real() == Catch::Approx(1.0).margin(1e-15));
      REQUIRE(fr[k].imag() == Catch::Approx(0.0).margin(1e-15));
    }
  }
  SECTION("one-sample delay gives the phase ramp 1, -i, -1") {
    const FrequencyResponse fr = ir_to_fr(ImpulseResponse({0, 1, 0, 0}, SampleRate()), 4);
    REQUIRE(std::abs(fr[0] - cplx(1, 0)) < 1e-15);
    REQUIRE(std::abs(fr[1] - cplx(0, -1)) < 1e-15);
    REQUIRE(std::abs(fr[2] - cplx(-1, 0)) < 1e-15);
  }
  SECTION("four ones at Nf=8 match the direct summation oracle") {
    const std::vector<double> taps{1, 1, 1, 1};
    const FrequencyResponse fr = ir_to_fr(ImpulseResponse(taps, SampleRate()), 8);
    const std::vector<cplx> ref = oracle::dft(taps, 8);
    for (std::size_t k = 0; k < fr.n_bins(); ++k)
      REQUIRE(std::abs(fr[k] - ref[k]) < 1e-12);
    REQUIRE(std::abs(fr[1] - cplx(1.0, -2.414213562373095)) < 1e-12);
    REQUIRE(std::abs(fr[2] - cplx(0.0, 0.0)) < 1e-12);
    REQUIRE(std::abs(fr[3] - cplx(1.0, -0.41421356237309515)) < 1e-12);
  }
  SECTION("random taps match the oracle on the one-sided grid") {
    SeedStream stream(11, 1);
    std::vector<double> taps(24);
    for (double& t : taps) t = stream.uniform(-1.0, 1.0);
    const FrequencyResponse fr = ir_to_fr(ImpulseResponse(taps, SampleRate()), 32);
    const std::vector<cplx> ref = oracle::dft(taps, 32);
    for (std::size_t k = 0; k < fr.n_bins(); ++k)
      REQUIRE(std::abs(fr[k] - ref[k]) < 1e-11);
  }
  SECTION("DC and Nyquist come out exactly real") {
    SeedStream stream(12, 2);
    std::vector<double> taps(16);
    for (double& t : taps) t = stream.uniform(-1.0, 1.0);
    const FrequencyResponse fr = ir_to_fr(ImpulseResponse(taps, SampleRate()), 16);
    REQUIRE(fr[0].imag() == 0.0);
    REQUIRE(fr[8].imag() == 0.0);
  }
  SECTION("no silent truncation") {
    REQUIRE_THROWS_AS(ir_to_fr(ImpulseResponse({1, 2, 3, 4, 5}, SampleRate()), 4),
                      DimensionError);
    REQUIRE_THROWS_AS(ir_to_fr(ImpulseResponse({1}, SampleRate()), 5), DimensionError);
  }
}

TEST_CASE("fr_to_ir inverts ir_to_fr") {
  SECTION("round trip within 1e-10 for random taps of many lengths") {
    SeedStream stream(21, 3);
    for (int len : {1, 2, 7, 31, 64}) {
      std::vector<double> taps(static_cast<std::size_t>(len));
      for (double& t : taps) t = stream.uniform(-2.0, 2.0);
      const ImpulseResponse back =
          fr_to_ir(ir_to_fr(ImpulseResponse(taps, SampleRate()), 64), len);
      for (int n = 0; n < len; ++n)
        REQUIRE(back.taps()[static_cast<std::size_t>(n)] ==
                Catch::Approx(taps[static_cast<std::size_t>(n)]).margin(1e-10));
    }
  }
  SECTION("flat spectrum of ones is the unit impulse") {
    const ImpulseResponse ir = fr_to_ir(fr_of({{1, 0}, {1, 0}, {1, 0}}, 4), 4);
    REQUIRE(ir.taps()[0] == Catch::Approx(1.0).margin(1e-12));
    for (int n = 1; n < 4; ++n)
      REQUIRE(ir.taps()[static_cast<std::size_t>(n)] == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("random conjugate-symmetric spectrum matches the inverse oracle") {
    SeedStream stream(22, 4);
    const FrequencyResponse fr = oracle::random_fr(stream, 16, SampleRate());
    const ImpulseResponse ir = fr_to_ir(fr, 16);
    const std::vector<cplx> ref = oracle::idft(oracle::mirror(fr));
    for (int n = 0; n < 16; ++n) {
      REQUIRE(std::abs(ref[static_cast<std::size_t>(n)].imag()) < 1e-12);
      REQUIRE(ir.taps()[static_cast<std::size_t>(n)] ==
              Catch::Approx(ref[static_cast<std::size_t>(n)].real()).margin(1e-11));
    }
  }
  SECTION("non-real DC or Nyquist is rejected") {
    REQUIRE_THROWS_AS(fr_to_ir(fr_of({{1, 0.5}, {1, 0}, {1, 0}}, 4), 4), InvariantError);
    REQUIRE_THROWS_AS(fr_to_ir(fr_of({{1, 0}, {1, 0}, {1, 0.5}}, 4), 4), InvariantError);
  }
  SECTION("output length must stay within the fft size") {
    const FrequencyResponse fr = fr_of({{1, 0}, {1, 0}, {1, 0}}, 4);
    REQUIRE_THROWS_AS(fr_to_ir(fr, 0), DimensionError);
    REQUIRE_THROWS_AS(fr_to_ir(fr, 5), DimensionError);
  }
}

TEST_CASE("delay_phase realizes time shifts") {
  SECTION("zero shift is the identity") {
    const FrequencyResponse fr = delay_phase(8, SampleRate(), 0.0);
    for (std::size_t k = 0; k < fr.n_bins(); ++k) REQUIRE(fr[k] == cplx(1.0, 0.0));
  }
  SECTION("one whole sample matches the one-sample-delay DFT") {
    const double one_sample = 1.0 / 40000.0;
    const FrequencyResponse fr = delay_phase(4, SampleRate(), one_sample);
    REQUIRE(fr[0] == cplx(1.0, 0.0));
    REQUIRE(fr[1] == cplx(0.0, -1.0));
    REQUIRE(fr[2] == cplx(-1.0, 0.0));
  }
  SECTION("the -1.6 ms causality shift advances by 64 samples") {
    const FrequencyResponse fr = delay_phase(1024, SampleRate(), -0.0016);
    for (std::size_t k = 0; k < fr.n_bins(); k += 37) {
      const cplx expect = std::polar(1.0, 2.0 * M_PI * static_cast<double>(k) * 64.0 / 1024.0);
      REQUIRE(std::abs(fr[k] - expect) < 1e-12);
    }
    REQUIRE(fr[0] == cplx(1.0, 0.0));
    REQUIRE(fr[512].imag() == 0.0);
  }
  SECTION("whole-sample shifts keep DC and Nyquist exactly real") {
    // Bit-exact realness holds whenever shift_seconds * rate round-trips to an
    // integral double. That covers the production 1.6 ms chain delay at 40 kHz
    // and every sample count below.
    REQUIRE(0.0016 * 40000.0 == 64.0);
    for (int d : {-4, -1, 1, 2, 5, 64}) {
      REQUIRE((d / 40000.0) * 40000.0 == static_cast<double>(d));
      const FrequencyResponse fr = delay_phase(16, SampleRate(), d / 40000.0);
      REQUIRE(fr[0].imag() == 0.0);
      REQUIRE(fr[8].imag() == 0.0);
    }
  }
  SECTION("shifts that miss the integral grid by an ulp stay real to 1e-12") {
    // -3/40000 does not round-trip through the rate, so the Nyquist phasor
    // lands an ulp off the exact quarter-turn branch. The residue must stay
    // at floating-point noise level.
    REQUIRE((-3.0 / 40000.0) * 40000.0 != -3.0);
    const FrequencyResponse fr = delay_phase(16, SampleRate(), -3.0 / 40000.0);
    REQUIRE(std::abs(fr[0].imag()) < 1e-12);
    REQUIRE(std::abs(fr[8].imag()) < 1e-12);
  }
}

TEST_CASE("atf containers validate grids") {
  SeedStream stream(31, 5);
  const FrequencyResponse a = oracle::random_fr(stream, 16, SampleRate());
  const FrequencyResponse b = oracle::random_fr(stream, 16, SampleRate());
  const FrequencyResponse other_grid = oracle::random_fr(stream, 32, SampleRate());

  AtfSet good{"s1", 1, a, b, a, b, a};
  REQUIRE_NOTHROW(good.validate());

  AtfSet bad{"s1", 1, a, b, a, b, other_grid};
  REQUIRE_THROWS_AS(bad.validate(), DimensionError);

  AtfDatabase db;
  db.sets.push_back(good);
  AtfSet second{"s2", 1, other_grid, other_grid, other_grid, other_grid, other_grid};
  db.sets.push_back(second);
  REQUIRE_THROWS_AS(db.validate(), DimensionError);
}
