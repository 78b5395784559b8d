// mrdp - map-reduce data plane model - cache and fct study tests
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "mrdp/analysis.hpp"

using namespace mrdp;

TEST_CASE("cache miss model") {
  FlowModel fm;
  fm.n_flows = 20000;
  fm.rng_seed = 31;

  SECTION("zero unstable fields miss exactly once per flow") {
    fm.unstable_fields = 0;
    auto s = cache_miss_stats(fm);
    REQUIRE(s.misses == fm.n_flows);
    REQUIRE(s.rate == static_cast<double>(fm.n_flows) / static_cast<double>(s.packets));
    REQUIRE(s.packets > fm.n_flows);  // heavy tail produces multi-packet flows
  }

  SECTION("zero entropy collapses to the zero-field case") {
    fm.unstable_fields = 0;
    auto none = cache_miss_stats(fm);
    fm.unstable_fields = 6;
    fm.field_entropy_bits = 0.0;
    auto flat = cache_miss_stats(fm);
    REQUIRE(flat.packets == none.packets);
    REQUIRE(flat.misses == none.misses);
  }

  SECTION("eight high-entropy fields push the miss rate past 0.99") {
    fm.unstable_fields = 8;
    fm.field_entropy_bits = 16.0;
    auto s = cache_miss_stats(fm);
    REQUIRE(s.packets >= 50000);
    REQUIRE(s.rate > 0.99);
  }

  SECTION("misses are monotone in field count under a paired seed") {
    fm.field_entropy_bits = 16.0;
    long long prev = -1;
    long long packets = 0;
    for (int fields : {0, 1, 2, 4, 8}) {
      fm.unstable_fields = fields;
      auto s = cache_miss_stats(fm);
      if (packets) REQUIRE(s.packets == packets);
      packets = s.packets;
      REQUIRE(s.misses >= prev);
      prev = s.misses;
    }
  }

  SECTION("misses are monotone in entropy under a paired seed") {
    fm.unstable_fields = 4;
    long long prev = -1;
    for (double bits : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      fm.field_entropy_bits = bits;
      auto s = cache_miss_stats(fm);
      REQUIRE(s.misses >= prev);
      prev = s.misses;
    }
  }

  SECTION("fixed seed is deterministic, new seed reshuffles") {
    fm.unstable_fields = 3;
    fm.field_entropy_bits = 4.0;
    auto a = cache_miss_stats(fm);
    auto b = cache_miss_stats(fm);
    REQUIRE(a.packets == b.packets);
    REQUIRE(a.misses == b.misses);
    fm.rng_seed = 32;
    auto c = cache_miss_stats(fm);
    REQUIRE(c.packets != a.packets);
  }

  SECTION("bad distribution parameters are rejected") {
    fm.flow_size_dist = "lognormal";
    REQUIRE_THROWS_AS(cache_miss_stats(fm), Error);
    fm.flow_size_dist = "pareto";
    fm.size_min = 0;
    REQUIRE_THROWS_AS(cache_miss_stats(fm), Error);
  }
}

TEST_CASE("flow completion time study") {
  FlowModel fm;
  fm.n_flows = 200;
  fm.unstable_fields = 8;
  fm.field_entropy_bits = 16.0;
  fm.rng_seed = 5;
  LatencyConstants lc;

  SECTION("one-packet flows cost the same under both schemes") {
    double c = flow_completion_ms(fm, lc, FctScheme::Caching, 0, 1);
    double d = flow_completion_ms(fm, lc, FctScheme::Dataplane, 0, 1);
    REQUIRE_THAT(c / d, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }

  SECTION("long flows with per-packet features pay over 1000x") {
    double c = flow_completion_ms(fm, lc, FctScheme::Caching, 0, 10000);
    double d = flow_completion_ms(fm, lc, FctScheme::Dataplane, 0, 10000);
    REQUIRE(c / d >= 1000.0);
  }

  SECTION("stable headers keep caching in the data-plane ballpark") {
    // Only the first packet misses, so the cached rule path is actually a
    // touch cheaper than paying in-switch inference per packet.
    FlowModel stable = fm;
    stable.unstable_fields = 0;
    double c = flow_completion_ms(stable, lc, FctScheme::Caching, 0, 100000);
    double d = flow_completion_ms(stable, lc, FctScheme::Dataplane, 0, 100000);
    REQUIRE(c / d >= 0.5);
    REQUIRE(c / d <= 1.1);
  }

  SECTION("ratio grows monotonically toward the long-flow regime") {
    double prev = 0.0;
    for (long long n : {1ll, 10ll, 100ll, 1000ll, 10000ll}) {
      double c = flow_completion_ms(fm, lc, FctScheme::Caching, 0, n);
      double d = flow_completion_ms(fm, lc, FctScheme::Dataplane, 0, n);
      REQUIRE(c / d >= prev);
      prev = c / d;
    }
  }

  SECTION("dataplane times ignore unstable fields") {
    FlowModel a = fm, b = fm;
    a.unstable_fields = 0;
    b.unstable_fields = 8;
    REQUIRE(fct_compare(a, lc, FctScheme::Dataplane) ==
            fct_compare(b, lc, FctScheme::Dataplane));
  }

  SECTION("per-flow vectors are sized and deterministic") {
    auto v1 = fct_compare(fm, lc, FctScheme::Caching);
    auto v2 = fct_compare(fm, lc, FctScheme::Caching);
    REQUIRE(v1.size() == static_cast<size_t>(fm.n_flows));
    REQUIRE(v1 == v2);
    for (double ms : v1) REQUIRE(ms > 0.0);
  }

  SECTION("non-positive constants are rejected") {
    LatencyConstants bad = lc;
    bad.rule_install_ms = 0.0;
    REQUIRE_THROWS_AS(flow_completion_ms(fm, bad, FctScheme::Caching, 0, 10), Error);
    REQUIRE_THROWS_AS(flow_completion_ms(fm, lc, FctScheme::Caching, 0, 0), Error);
  }
}

TEST_CASE("table reports") {
  SECTION("empty suite yields an empty report") {
    SuiteReport rep = report_tables({});
    REQUIRE(rep.tables.empty());
    REQUIRE(rep.all_ok());
    REQUIRE(report_to_text(rep) == std::string(kReportHeader) + "\n");
  }

  SECTION("full catalog reproduces every table within tolerance") {
    SuiteReport rep = report_tables(benchmark_catalog());
    REQUIRE(rep.all_ok());

    const ReportTable* fu = rep.find("fu_cost");
    REQUIRE(fu != nullptr);
    REQUIRE(fu->rows.size() == 3);
    REQUIRE(fu->rows[0][1] == "3877");
    REQUIRE(fu->rows[1][1] == "8108");
    REQUIRE(fu->rows[2][1] == "20203");

    const ReportTable* apps = rep.find("applications");
    REQUIRE(apps != nullptr);
    REQUIRE(apps->rows.size() == 5);  // four models plus the mean row
    REQUIRE(apps->rows.back()[0] == "mean");

    const ReportTable* kern = rep.find("kernels");
    REQUIRE(kern != nullptr);
    REQUIRE(kern->rows.size() == 9);

    const ReportTable* unroll = rep.find("unroll");
    REQUIRE(unroll != nullptr);
    REQUIRE(unroll->rows.size() == 6);  // conv1d x4 points, svm_lin x2
    // Line-rate fractions 1/8, 1/4, 1/2, 1 in unroll order.
    REQUIRE(unroll->rows[0][3] == "0.125");
    REQUIRE(unroll->rows[1][3] == "0.250");
    REQUIRE(unroll->rows[2][3] == "0.500");
    REQUIRE(unroll->rows[3][3] == "1.000");
  }

  SECTION("renderings carry version headers and all rows") {
    SuiteReport rep = report_tables(benchmark_catalog());
    std::string text = report_to_text(rep);
    REQUIRE(starts_with(text, kReportHeader));
    REQUIRE(text.find("percept") != std::string::npos);
    REQUIRE(text.find("DEVIATION") == std::string::npos);

    std::string csv = report_to_csv(rep);
    REQUIRE(starts_with(csv, kCsvHeader));
    REQUIRE(csv.find("applications,dnn,latency_ns,") != std::string::npos);
    REQUIRE(csv.find("unroll,conv1d,") != std::string::npos);
  }

  SECTION("plot csv analogs are well formed") {
    FlowModel fm;
    fm.n_flows = 2000;
    fm.rng_seed = 17;
    std::string cache = cache_curve_csv(fm, {0, 2, 4}, {4.0, 16.0});
    REQUIRE(starts_with(cache, kCsvHeader));
    REQUIRE(std::count(cache.begin(), cache.end(), '\n') == 2 + 6);

    LatencyConstants lc;
    std::string fct = fct_curve_csv(fm, lc, {1, 100, 10000});
    REQUIRE(fct.find("caching") != std::string::npos);
    REQUIRE(fct.find("dataplane") != std::string::npos);
    REQUIRE(std::count(fct.begin(), fct.end(), '\n') == 2 + 6);
  }
}
