#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "rbmlab/error.hpp"
#include "rbmlab/verify.hpp"

using namespace rbm;

namespace {

std::vector<KernelSample> free_gaussian_samples(double t_hi) {
  std::vector<KernelSample> out;
  for (int i = 0; i <= 20; ++i) {
    const double t = 1e-3 * std::pow(t_hi / 1e-3, i / 20.0);
    for (double d : {0.0, 0.01, 0.03, 0.1, 0.2}) {
      const double p = std::exp(-d * d / (2 * t)) / (2 * M_PI * t);
      out.push_back({t, {0, 0}, {d, 0}, p});
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("free gaussian constants") {
    const BoundFit fit = fit_gaussian_bound(free_gaussian_samples(1e-2));
    CHECK(fit.constants.at("a") == doctest::Approx(1 / (2 * M_PI)).epsilon(0.02));
    CHECK(fit.constants.at("b") == doctest::Approx(2.0).epsilon(0.02));
    CHECK(fit.passed);
    CHECK(fit.max_violation <= 1e-6);
    CHECK(fit.samples == 105);
  }

  TEST_CASE("single sample is met with equality") {
    const BoundFit fit = fit_gaussian_bound({{0.1, {0, 0}, {0.1, 0.1}, 0.7}});
    CHECK(fit.boundary_fraction == 1.0);
    CHECK(std::abs(fit.max_violation) <= 1e-6);
  }

  TEST_CASE("gaussian constants grow with the window") {
    const auto samples = free_gaussian_samples(0.5);
    double previous = 0.0;
    for (double r : {0.2, 0.4, 0.8}) {
      std::vector<KernelSample> inside;
      for (const auto& s : samples) {
        if (s.t < r * r) inside.push_back(s);
      }
      const BoundFit fit = fit_gaussian_bound(inside, r, 0.2);
      CHECK(fit.constants.at("a") >= previous * (1 - 1e-12));
      previous = fit.constants.at("a");
      CHECK(fit.window.at("R") == r);
    }
    CHECK_THROWS_AS(fit_gaussian_bound(samples, 0.2), InvalidInput);
    CHECK_THROWS_AS(fit_gaussian_bound({}), InvalidInput);
    CHECK_THROWS_AS(fit_gaussian_bound({{0.0, {0, 0}, {0, 0}, 1.0}}), InvalidInput);
  }

  TEST_CASE("exit fit on synthetic data") {
    std::vector<ExitSample> samples;
    for (double r : {0.1, 0.2}) {
      for (double t : {0.005, 0.01, 0.02, 0.04, 0.08}) {
        samples.push_back({r, t, 0.3 * std::exp(-1.7 * r * r / t), 0.0});
      }
    }
    const BoundFit fit = fit_exit_bound(samples);
    CHECK(fit.constants.at("gamma") == doctest::Approx(1.7).epsilon(0.03));
    CHECK(fit.constants.at("c") == doctest::Approx(0.3).epsilon(0.03));
    CHECK(fit.passed);
    CHECK(fit.max_violation <= 0.05);

    std::vector<ExitSample> flat;
    for (int i = 1; i <= 5; ++i) flat.push_back({0.1 * i, 0.01 * i * i, 0.1, 0.0});
    CHECK_THROWS_AS(fit_exit_bound(flat), InvalidInput);
    CHECK_THROWS_AS(fit_exit_bound({{0.1, 0.01, 0.1, 0.0}}), InvalidInput);
  }

  TEST_CASE("quarter time of planar brownian motion") {
    std::vector<DisplacementSample> samples;
    for (double r : {0.05, 0.1}) {
      for (int k = 0; k <= 80; ++k) {
        const double u = 0.1 + 0.005 * k;
        samples.push_back({{0.5, 0.5}, r, u * r * r, std::exp(-1 / (2 * u)), 0.0});
      }
    }
    std::vector<double> candidates;
    for (int k = 0; k <= 60; ++k) candidates.push_back(0.2 + 0.005 * k);
    const BoundFit fit = quarter_time(samples, candidates);
    // P(|X_t - x| >= r) = exp(-r^2 / (2t)) crosses 1/4 at t / r^2 = 1 / (2 ln 4)
    CHECK(fit.constants.at("delta") == doctest::Approx(1 / (2 * std::log(4.0))).epsilon(0.015));
    CHECK(fit.passed);
    CHECK_FALSE(fit.has_flag("floor"));

    std::vector<DisplacementSample> heavy;
    for (double u : {0.3, 0.4, 0.5}) heavy.push_back({{0, 0}, 0.1, u * 0.01, 0.5, 0.0});
    const BoundFit low = quarter_time(heavy, candidates);
    CHECK(low.has_flag("floor"));
    CHECK_FALSE(low.passed);

    std::vector<DisplacementSample> light;
    for (double u : {0.3, 0.4, 0.5}) light.push_back({{0, 0}, 0.1, u * 0.01, 0.01, 0.0});
    CHECK(quarter_time(light, candidates).has_flag("censored"));
    CHECK_THROWS_AS(quarter_time(light, candidates, 0.1), InvalidInput);
  }

  TEST_CASE("kato rate") {
    std::vector<ModulusSample> curve;
    for (int i = 0; i <= 16; ++i) {
      const double t = 1e-3 * std::pow(100.0, i / 16.0);
      curve.push_back({t, 0.8 * std::sqrt(t)});
    }
    const BoundFit fit = fit_kato_rate(curve);
    CHECK(fit.constants.at("alpha") == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.constants.at("C") == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(fit.passed);

    auto bumped = curve;
    bumped[5].modulus = 2 * bumped[6].modulus;
    const BoundFit bad = fit_kato_rate(bumped);
    CHECK_FALSE(bad.passed);
    CHECK_FALSE(bad.diagnostics.empty());

    std::vector<ModulusSample> narrow(curve.begin(), curve.begin() + 6);
    CHECK_THROWS_AS(fit_kato_rate(narrow), InvalidInput);
    CHECK_THROWS_AS(fit_kato_rate({curve.begin(), curve.begin() + 3}), InvalidInput);
  }

  TEST_CASE("sobolev scans") {
    SobolevScanOptions opts;
    opts.spacing = 0.1;
    opts.optimizer.restarts = 4;
    const BoundFit square = sobolev_scan(Domain::rectangle(2, 1), {1.0, 1.5, 2.0}, opts);
    CHECK(square.has_flag("not_a_horn"));
    CHECK(square.series.at("S").size() == 3);

    opts.spacing = 0.05;
    const BoundFit horn = sobolev_scan(Domain::horn(1, 1, 16), {4, 8, 16}, opts);
    CHECK(horn.passed);
    CHECK(horn.constants.at("strictly_increasing") == 1.0);
    CHECK(horn.constants.at("growth_ratio") > 1.0);
    CHECK_THROWS_AS(sobolev_scan(Domain::horn(1, 1, 8), {4, 2}, opts), InvalidInput);
  }

  TEST_CASE("fit reports are deterministic") {
    const auto samples = free_gaussian_samples(1e-2);
    const BoundFit a = fit_gaussian_bound(samples);
    const BoundFit b = fit_gaussian_bound(samples);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.data_hash.size() == 64);
    auto changed = samples;
    changed[3].p *= 1.01;
    CHECK(fit_gaussian_bound(changed).data_hash != a.data_hash);
    const auto parsed = nlohmann::json::parse(a.to_json());
    CHECK(parsed.at("kind") == "gaussian");
    CHECK(parsed.at("constants").at("a").get<double>() == doctest::Approx(a.constants.at("a")));
  }
}
