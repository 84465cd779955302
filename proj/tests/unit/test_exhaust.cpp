#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "rbmlab/error.hpp"
#include "rbmlab/exhaust.hpp"

using namespace rbm;

namespace {

struct HornLadder {
  Domain domain = Domain::horn(1, 1, 16.3);
  std::shared_ptr<const Grid> grid;
  ExhaustionLadder ladder;

  HornLadder() {
    grid = std::make_shared<const Grid>(build_grid(domain, 0.075));
    LadderOptions o;
    o.schedule = {4, 8, 16};
    o.scheme = TruncationScheme::x_cut;
    o.center = {1, 0};
    o.radius = 1.5;
    o.eps = 0.2;
    o.eigen_count = 250;
    o.t_max = 1.0;
    ladder = build_ladder(grid, domain, o);
  }

  double t_min() const {
    double t = 0.0;
    for (const auto& sd : ladder.levels) t = std::max(t, sd.t_min);
    return t;
  }
};

const HornLadder& horn_ladder() {
  static const HornLadder h;
  return h;
}

}  // namespace

TEST_SUITE("exhaust") {
  TEST_CASE("saturated ladder on a bounded domain") {
    const Domain sq = Domain::rectangle(1, 1);
    auto grid = std::make_shared<const Grid>(build_grid(sq, 0.1));
    LadderOptions o;
    o.schedule = {1.3, 2.0};
    o.scheme = TruncationScheme::ball;
    o.center = {0.5, 0.5};
    o.radius = 0.3;
    o.eps = 0.2;
    o.eigen_count = 100;
    const ExhaustionLadder l = build_ladder(grid, sq, o);
    REQUIRE(l.depth() == 2);
    CHECK(l.masks[0] == l.masks[1]);
    const int x = *grid->locate({0.15, 0.85});
    const int y = *grid->locate({0.5, 0.5});
    for (double t : {0.01, 0.1, 0.5}) {
      const CertifiedKernel a = certified_kernel(l, 0, t, x, y);
      const CertifiedKernel b = certified_kernel(l, 1, t, x, y);
      CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9));
      CHECK(a.exit_probability <= 1e-8);
      const LimitEstimate lim = limit_kernel(l, t, x, y, 1e-6);
      CHECK(lim.reached);
      CHECK(lim.level_used == 0);
    }
    const LimitEstimate never = limit_kernel(l, 0.1, x, y, 0.0);
    CHECK_FALSE(never.reached);
    CHECK(never.level_used == 1);
  }

  TEST_CASE("horn ladder structure") {
    const HornLadder& h = horn_ladder();
    CHECK(h.ladder.depth() == 3);
    for (std::size_t n = 0; n + 1 < h.ladder.depth(); ++n) {
      CHECK(h.ladder.masks[n].subset_of(h.ladder.masks[n + 1]));
      CHECK(h.ladder.levels[n].eigenvalues[0] >= h.ladder.levels[n + 1].eigenvalues[0]);
    }
    CHECK(h.ladder.window.subset_of(h.ladder.ball));
    double previous = 0.0;
    for (double t : {0.05, 0.1, 0.3, 1.0}) {
      const double c = h.ladder.c_hat(t);
      CHECK(c > 0.0);
      CHECK(std::isfinite(c));
      CHECK(c >= previous);
      previous = c;
    }
    CHECK_THROWS_AS(h.ladder.c_hat(2.0), InvalidInput);
  }

  TEST_CASE("monotone and sandwiched along the ladder") {
    const HornLadder& h = horn_ladder();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto from = h.ladder.masks[0].indices();
    const auto to = h.ladder.window.indices();
    const double lo = h.t_min();
    int monotone_bad = 0, sandwich_bad = 0;
    for (int s = 0; s < 120; ++s) {
      const double t = lo * std::pow(0.5 / lo, u(rng));
      const int x = from[rng() % from.size()];
      const int y = to[rng() % to.size()];
      for (std::size_t n = 0; n + 1 < h.ladder.depth(); ++n) {
        const CertifiedKernel a = certified_kernel(h.ladder, n, t, x, y);
        const CertifiedKernel b = certified_kernel(h.ladder, n + 1, t, x, y);
        if (a.value > b.value + a.tail + b.tail) ++monotone_bad;
        if (b.value - a.value > a.certificate + a.tail + b.tail) ++sandwich_bad;
      }
    }
    CHECK(monotone_bad == 0);
    CHECK(sandwich_bad == 0);
  }

  TEST_CASE("survival grows with depth") {
    const HornLadder& h = horn_ladder();
    const int x = *h.grid->locate({1.8, 0.0});
    const int y = h.ladder.window.indices().front();
    for (double t : {0.1, 0.5}) {
      double previous = 0.0;
      for (std::size_t n = 0; n < h.ladder.depth(); ++n) {
        const CertifiedKernel c = certified_kernel(h.ladder, n, t, x, y);
        const double surv = survival(h.ladder.levels[n], t, x);
        CHECK(surv >= previous - 1e-6);
        CHECK(c.exit_probability >= 1.0 - surv);
        CHECK(c.certificate == doctest::Approx(c.c_hat * c.exit_probability));
        previous = surv;
      }
    }
    const LimitEstimate lim = limit_kernel(h.ladder, 0.1, x, y, 1e-3);
    CHECK(lim.reached);
    CHECK(lim.certificate <= 1e-3);
  }

  TEST_CASE("part kernel identities") {
    const Grid g = build_grid(Domain::rectangle(1, 1), 0.1);
    const int x = *g.locate({0.45, 0.45});
    const int y = *g.locate({0.55, 0.65});
    const SpectralDecomposition full = eigensolve(assemble_neumann(g), static_cast<int>(g.size()));
    const Mask inner = g.ball({0.5, 0.5}, 0.3);
    const Mask outer = g.ball({0.5, 0.5}, 0.45);
    REQUIRE(inner.subset_of(outer));
    for (double t : {0.01, 0.05, 0.2}) {
      const KernelEstimate whole = part_kernel(g, g.all_cells(), t, x, y, 100);
      const KernelEstimate reference = heat_kernel(full, t, x, y);
      CHECK(whole.value == doctest::Approx(reference.value).epsilon(1e-8));
      const KernelEstimate a = part_kernel(g, inner, t, x, y, 100);
      const KernelEstimate b = part_kernel(g, outer, t, x, y, 100);
      CHECK(a.value <= b.value + a.tail + b.tail);
      CHECK(b.value <= reference.value + b.tail + reference.tail);
      CHECK(a.value > 0.0);
    }
    const int corner = *g.locate({0.02, 0.02});
    CHECK(part_kernel(g, inner, 0.1, corner, y, 100).value == 0.0);
  }

  TEST_CASE("invalid ladders") {
    const Domain h = Domain::horn(1, 1, 16.3);
    auto grid = std::make_shared<const Grid>(build_grid(h, 0.1));
    LadderOptions o;
    o.schedule = {4, 8, 16};
    o.center = {1, 0};
    o.radius = 1.5;
    o.eigen_count = 50;
    o.schedule = {2, 8};
    CHECK_THROWS_AS(build_ladder(grid, h, o), InvalidInput);
    o.schedule = {8, 4};
    CHECK_THROWS_AS(build_ladder(grid, h, o), InvalidInput);
    o.schedule = {};
    CHECK_THROWS_AS(build_ladder(grid, h, o), InvalidInput);
    o.schedule = {4, 8};
    o.eps = 1.5;
    CHECK_THROWS_AS(build_ladder(grid, h, o), InvalidInput);
    o.eps = 0.2;
    o.radius = -1;
    CHECK_THROWS_AS(build_ladder(grid, h, o), InvalidInput);
    CHECK_THROWS_AS(build_ladder(nullptr, h, o), InvalidInput);

    const HornLadder& hl = horn_ladder();
    const int outside = *hl.grid->locate({10.0, 0.0});
    const int inside = hl.ladder.window.indices().front();
    CHECK_THROWS_AS(certified_kernel(hl.ladder, 0, 0.1, inside, outside), InvalidInput);
    CHECK_THROWS_AS(certified_kernel(hl.ladder, 7, 0.1, inside, inside), InvalidInput);
    CHECK_THROWS_AS(limit_kernel(hl.ladder, 0.1, inside, inside, -1.0), InvalidInput);
  }
}
