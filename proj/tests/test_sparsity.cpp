#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/autodiff.hpp"
#include "spaloc/sparsity.hpp"

#include <random>
#include <sstream>

using namespace spaloc;

namespace {

// Loop-based reference forms.
double ref_hoyer(const std::vector<double>& x) {
  double a = 0, b = 0;
  for (double v : x) {
    a += std::fabs(v);
    b += v * v;
  }
  return (a / std::sqrt(b) - 1) / (std::sqrt(double(x.size())) - 1);
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("hoyer fixed points") {
  CHECK(hoyer(vec({0, 0, 1, 0})) == doctest::Approx(0.0));
  CHECK(hoyer(vec({1, 1, 1, 1, 1})) == doctest::Approx(1.0));
  CHECK(hoyer(vec({3, 4})) == doctest::Approx(ref_hoyer({3, 4})).epsilon(1e-12));
  CHECK(hoyer(vec({3, 4})) == doctest::Approx(0.965685).epsilon(1e-6));
  CHECK(hoyer(vec({0, 0, 0})) == 0.0);
  CHECK_THROWS_AS(hoyer(vec({2})), UndefinedInputError);
}

TEST_CASE("hoyer_square fixed points") {
  CHECK(hoyer_square(vec({0, 5, 0})) == doctest::Approx(1.0));
  CHECK(hoyer_square(Eigen::VectorXd::Ones(7)) == doctest::Approx(7.0));
  CHECK(hoyer_square(vec({1, 1, 1, 0, 0})) == doctest::Approx(3.0));
  CHECK(hoyer_square(vec({0, 0})) == 1.0);
}

TEST_CASE("l1 and l2 losses") {
  CHECK(l1_loss(Eigen::VectorXd::Zero(4)) == 0.0);
  CHECK(l2_loss(Eigen::VectorXd::Zero(4)) == 0.0);
  CHECK(l1_loss(Eigen::VectorXd::Ones(4)) == 1.0);
  CHECK(l2_loss(Eigen::VectorXd::Ones(4)) == 1.0);
  CHECK(l1_loss(vec({1, -1})) == 1.0);
  CHECK(l2_loss(vec({1, -1})) == 1.0);
}

TEST_CASE("density loss") {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  CHECK(density_loss(std::span(&ones, 1)) == doctest::Approx(1.0));
  const Eigen::VectorXd hot = vec({0, 0, 1, 0});
  CHECK(density_loss(std::span(&hot, 1)) == doctest::Approx(0.25));
  const std::vector<Eigen::VectorXd> two = {vec({1, 1, 0}), vec({1, 0, 0, 0})};
  CHECK(density_loss(two) == doctest::Approx(3.0 / 7.0));
  const std::vector<Eigen::VectorXd> with_empty = {vec({1, 1, 0}), Eigen::VectorXd(0), vec({1, 0, 0, 0})};
  CHECK(density_loss(with_empty) == doctest::Approx(3.0 / 7.0));
  CHECK_THROWS_AS(density_loss(std::span<const Eigen::VectorXd>()), UndefinedInputError);
}

TEST_CASE("bounds and scale invariance over random vectors") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(2, 40);
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution zero(0.3);
  std::uniform_real_distribution<double> scale(-50, 50);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Eigen::VectorXd x(len(rng));
    for (auto& v : x) v = zero(rng) ? 0.0 : gauss(rng);
    if (x.squaredNorm() == 0) continue;
    double c = scale(rng);
    if (c == 0) c = 1;
    const double h = hoyer(x);
    const double hs = hoyer_square(x);
    CHECK(h >= -1e-12);
    CHECK(h <= 1 + 1e-12);
    CHECK(hs >= 1 - 1e-12);
    CHECK(hs <= x.size() + 1e-9);
    CHECK(hoyer(Eigen::VectorXd(c * x)) == doctest::Approx(h).epsilon(1e-9));
    CHECK(hoyer_square(Eigen::VectorXd(c * x)) == doctest::Approx(hs).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 9000);
}

TEST_CASE("hoyer-square density gradient matches finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Parameter<double> p("g", 9, 1);
  for (Index i = 0; i < 9; ++i) p.value(i, 0) = u(rng);
  Parameter<double> q("h", 4, 1);
  for (Index i = 0; i < 4; ++i) q.value(i, 0) = u(rng);
  auto eval = [&](const ValueTable<double>& g1, const ValueTable<double>& g2) {
    Tape<double> t(false);
    return ops::hoyer_square_density(t, {t.constant(g1), t.constant(g2)}).scalar();
  };
  Tape<double> tape;
  auto v1 = tape.constant(p.value);
  auto v2 = tape.constant(q.value);
  auto d = ops::hoyer_square_density(tape, {v1, v2});
  tape.backward(d);
  const double h = 1e-6;
  double worst = 0;
  for (int which = 0; which < 2; ++which) {
    const ValueTable<double>& base = which == 0 ? p.value : q.value;
    const ValueTable<double>& grad = which == 0 ? v1.grad() : v2.grad();
    for (Index i = 0; i < base.rows(); ++i) {
      ValueTable<double> up = base, dn = base;
      up(i, 0) += h;
      dn(i, 0) -= h;
      const double num = which == 0 ? (eval(up, q.value) - eval(dn, q.value)) / (2 * h)
                                    : (eval(p.value, up) - eval(p.value, dn)) / (2 * h);
      worst = std::max(worst, std::fabs(num - grad(i, 0)) / std::max(std::fabs(num), 1e-8));
    }
  }
  CHECK(worst < 1e-4);
  CHECK(d.scalar() == doctest::Approx((hoyer_square(p.value) + hoyer_square(q.value)) / 13.0));
}

TEST_CASE("density report aggregates over arity >= 1") {
  DensityReport r;
  r.entries.push_back({0, 0, 1, 1, 1, 1.0});
  r.entries.push_back({0, 1, 10, 5, 10, 3.0});
  r.entries.push_back({0, 2, 100, 10, 100, 7.0});
  CHECK(r.density_percent() == doctest::Approx(100.0 * 15 / 110));
  CHECK(r.peak_rows() == 100);
  std::ostringstream os;
  r.write_csv(os);
  CHECK(os.str().rfind("layer,arity,rows,retained_frac,hs\n", 0) == 0);
}
