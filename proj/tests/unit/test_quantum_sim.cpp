#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "qfx/quantum_sim.hpp"
#include "selftest.hpp"

using namespace qfx;
using std::numbers::pi;

namespace {

double amp_re(const StateVector& s, std::size_t i) { return s.amplitudes()[i].real(); }

}  // namespace

TEST_CASE("init_state") {
  const auto s1 = init_state(1);
  CHECK(s1.dimension() == 2);
  CHECK(amp_re(s1, 0) == 1.0);
  CHECK(amp_re(s1, 1) == 0.0);
  CHECK(init_state(3).norm() == 1.0);
  CHECK(init_state(8).dimension() == 256);
  CHECK_THROWS_AS(init_state(0), std::out_of_range);
  CHECK_THROWS_AS(init_state(13), std::out_of_range);
}

TEST_CASE("R_y rotations") {
  auto s = init_state(1);
  apply_ry(s, 0, pi);
  CHECK(std::abs(amp_re(s, 1) - 1.0) <= 1e-12);
  CHECK(std::abs(amp_re(s, 0)) <= 1e-12);

  auto h = init_state(1);
  apply_ry(h, 0, pi / 2);
  CHECK(std::abs(amp_re(h, 0) - std::sqrt(0.5)) <= 1e-12);
  CHECK(std::abs(amp_re(h, 1) - std::sqrt(0.5)) <= 1e-12);

  auto id = init_state(2);
  apply_ry(id, 1, 0.0);
  CHECK(amp_re(id, 0) == 1.0);

  CHECK_THROWS(apply_ry(id, 2, 0.1));
  CHECK_THROWS(apply_ry(id, -1, 0.1));
}

TEST_CASE("CNOT truth table and involution") {
  // |10> with qubit 0 (control) written first: qubit 0 set.
  auto s = init_state(2);
  apply_ry(s, 0, pi);
  apply_cnot(s, 0, 1);
  CHECK(std::abs(amp_re(s, 3) - 1.0) <= 1e-12);

  auto z = init_state(2);
  apply_cnot(z, 0, 1);
  CHECK(amp_re(z, 0) == 1.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(0.0, 2 * pi);
  auto r = init_state(3);
  for (int q = 0; q < 3; ++q) apply_ry(r, q, a(rng));
  const auto before = r;
  apply_cnot(r, 2, 0);
  apply_cnot(r, 2, 0);
  for (std::size_t i = 0; i < r.dimension(); ++i) CHECK(r.amplitudes()[i] == before.amplitudes()[i]);

  CHECK_THROWS(apply_cnot(r, 1, 1));
  CHECK_THROWS(apply_cnot(r, 0, 3));
}

TEST_CASE("Z expectations") {
  CHECK(expect_z(init_state(1), 0) == 1.0);
  auto bell = init_state(2);
  apply_ry(bell, 0, pi / 2);
  apply_cnot(bell, 0, 1);
  CHECK(std::abs(expect_z(bell, 0)) <= 1e-12);
  CHECK(std::abs(expect_z(bell, 1)) <= 1e-12);
  const auto r = checks::ry_expectation(100);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("norm conservation over random gate sequences") {
  const auto r = checks::norm_conservation(10'000, 17);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("VQC forward") {
  const VqcSpec spec{4, 4, 2};
  const std::vector<double> zeros(spec.param_count(), 0.0);
  for (double e : vqc_forward(spec, zeros, std::vector<double>(4, 0.0))) CHECK(e == 1.0);

  const VqcSpec one{1, 1, 1};
  const double th = 0.7;
  CHECK(std::abs(vqc_forward(one, std::vector<double>{th}, std::vector<double>{0.0})[0] - std::cos(th)) <= 1e-12);

  const auto r = checks::vqc_dense_oracle(50, 21);
  CHECK_MESSAGE(r.pass, r.detail);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(spec.param_count()), x(4);
  for (double& v : p) v = u(rng) * 2 * pi;
  for (double& v : x) v = u(rng);
  CHECK(vqc_forward(spec, p, x) == vqc_forward(spec, p, x));

  CHECK_THROWS(vqc_forward(spec, p, std::vector<double>(3, 0.0)));
  CHECK_THROWS(vqc_forward(spec, std::vector<double>(7, 0.0), x));
  CHECK_THROWS((VqcSpec{4, 5, 1}.validate()));
}

TEST_CASE("parameter-shift gradients") {
  const VqcSpec one{1, 1, 1};
  for (double th : {0.3, 1.1, 2.5}) {
    const auto g = vqc_gradient(one, std::vector<double>{th}, std::vector<double>{0.0}, std::vector<double>{1.0});
    CHECK(std::abs(g.params[0] + std::sin(th)) <= 1e-12);
  }
  const auto at_max = vqc_gradient(one, std::vector<double>{0.0}, std::vector<double>{0.0}, std::vector<double>{1.0});
  CHECK(std::abs(at_max.params[0]) <= 1e-12);

  const auto r = checks::vqc_gradients(100, 33);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("state trace dump") {
  const auto path = std::filesystem::temp_directory_path() / "qfx_state_trace.csv";
  write_state_csv(init_state(2), path);
  CHECK(std::filesystem::exists(path));
  std::filesystem::remove(path);
}
