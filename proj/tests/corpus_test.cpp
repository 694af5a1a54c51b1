#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "slotmax/corpus.hpp"
#include "slotmax/pipelines.hpp"
#include "support/oracles.hpp"

namespace slotmax {
namespace {

std::vector<Billboard> billboards_from(const std::string& body) {
  std::istringstream in(std::string(kBillboardHeader) + "\n" + body);
  return parse_billboards(in);
}

std::vector<TrajectoryRecord> trajectories_from(const std::string& body) {
  std::istringstream in(std::string(kTrajectoryHeader) + "\n" + body);
  return parse_trajectories(in);
}

template <typename Fn>
std::size_t error_line(Fn&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TEST(ParseBillboards, ReadsRow) {
  const auto b = billboards_from("b139,40.7128,-74.0060,600,25\n");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].id, "b139");
  EXPECT_DOUBLE_EQ(b[0].latitude, 40.7128);
  EXPECT_DOUBLE_EQ(b[0].longitude, -74.0060);
  EXPECT_DOUBLE_EQ(b[0].panel_size, 600.0);
  EXPECT_DOUBLE_EQ(b[0].cost, 25.0);
}

TEST(ParseBillboards, EmptyDataSection) {
  EXPECT_TRUE(billboards_from("").empty());
}

TEST(ParseBillboards, Rejects) {
  EXPECT_THROW(billboards_from("b1,0,0,0,1\n"), ValidationError);
  EXPECT_THROW(billboards_from("b1,0,0,-3,1\n"), ValidationError);
  EXPECT_THROW(billboards_from("b1,0,0,5,-1\n"), ValidationError);
  EXPECT_THROW(billboards_from("b1,0,0,5,1\nb1,1,1,5,1\n"), ValidationError);
  EXPECT_THROW(billboards_from("b1,95,0,5,1\n"), InputError);
  EXPECT_EQ(error_line([] { billboards_from("b1,0,0,5,1\nb2,0,0,5\n"); }), 3u);
  EXPECT_EQ(error_line([] { billboards_from("b1,x,0,5,1\n"); }), 2u);
  EXPECT_EQ(error_line([] { billboards_from("b1,0,0,5,1,9\n"); }), 2u);
}

TEST(ParseBillboards, WrongHeader) {
  std::istringstream in("id,lat,lon,panel_size,cost\nb1,0,0,5,1\n");
  EXPECT_THROW(parse_billboards(in), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(parse_billboards(empty), ParseError);
}

TEST(ParseBillboards, MissingFile) {
  EXPECT_THROW(parse_billboards(std::string("/nonexistent/billboards.csv")),
               InputError);
}

TEST(ParseTrajectories, ReadsRow) {
  const auto t = trajectories_from("u225,40.6413,-73.7781,1400,1600\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].user_id, "u225");
  EXPECT_EQ(t[0].t_start, 1400);
  EXPECT_EQ(t[0].t_end, 1600);
}

TEST(ParseTrajectories, RepeatedUser) {
  const auto t = trajectories_from("u1,0,0,1,2\nu1,0,0,3,4\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].user_id, t[1].user_id);
}

TEST(ParseTrajectories, StartAfterEnd) {
  try {
    trajectories_from("u1,0,0,10,5\n");
    FAIL() << "no error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("t_start exceeds t_end"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseTrajectories, NonIntegerTime) {
  EXPECT_EQ(error_line([] { trajectories_from("u1,0,0,1.5,4\n"); }), 2u);
}

TEST(ParseTrajectories, CarriageReturns) {
  std::istringstream in(std::string(kTrajectoryHeader) + "\r\nu1,0,0,1,2\r\n");
  EXPECT_EQ(parse_trajectories(in).size(), 1u);
}

TEST(RoundTrip, SyntheticTables) {
  SyntheticSpec spec;
  spec.n_billboards = 20;
  spec.n_users = 50;
  spec.seed = 7;
  const auto data = generate_synthetic(spec);
  std::ostringstream bo;
  std::ostringstream to;
  write_billboards(bo, data.billboards);
  write_trajectories(to, data.trajectories);
  std::istringstream bi(bo.str());
  std::istringstream ti(to.str());
  EXPECT_EQ(parse_billboards(bi), data.billboards);
  EXPECT_EQ(parse_trajectories(ti), data.trajectories);
}

TEST(RoundTrip, AwkwardDoubles) {
  std::vector<Billboard> b{{"a", 0.1 + 0.2, -179.999999999, 1e-7, 0.0},
                           {"c", -89.5, 1.0 / 3.0, 123456.789, 7.25}};
  std::ostringstream out;
  write_billboards(out, b);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_billboards(in), b);
}

std::vector<Billboard> boards(std::size_t m) {
  std::vector<Billboard> out;
  for (std::size_t i = 0; i < m; ++i) {
    out.push_back({"b" + std::to_string(i), 0.0, 0.0, 1.0, 1.0});
  }
  return out;
}

TEST(EnumerateSlots, Counts) {
  EXPECT_EQ(enumerate_slots(boards(76), 0, 1440, 5).size(), 21888u);
  EXPECT_EQ(enumerate_slots(boards(2), 0, 1440, 60).size(), 48u);
  EXPECT_EQ(enumerate_slots(boards(1), 100, 105, 5).size(), 1u);
  EXPECT_TRUE(enumerate_slots(boards(0), 0, 60, 5).empty());
}

TEST(EnumerateSlots, CountProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = rng.below(6);
    const Minutes delta = 1 + static_cast<Minutes>(rng.below(30));
    const Minutes windows = static_cast<Minutes>(rng.below(50));
    const Minutes t1 = static_cast<Minutes>(rng.below(1000)) - 500;
    const auto slots = enumerate_slots(boards(m), t1, t1 + windows * delta, delta);
    ASSERT_EQ(slots.size(), m * static_cast<std::size_t>(windows));
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& s = slots[i];
      EXPECT_EQ(s.slot_index, i);
      EXPECT_EQ(s.window_end - s.window_start, delta);
      const auto w = static_cast<Minutes>(i % static_cast<std::size_t>(windows));
      EXPECT_EQ(s.window_start, t1 + w * delta);
      EXPECT_EQ(s.billboard_id, "b" + std::to_string(i / static_cast<std::size_t>(windows)));
    }
  }
}

TEST(EnumerateSlots, Rejects) {
  EXPECT_THROW(enumerate_slots(boards(1), 0, 1440, 7), ValidationError);
  EXPECT_THROW(enumerate_slots(boards(1), 0, 60, 0), ValidationError);
  EXPECT_THROW(enumerate_slots(boards(1), 60, 0, 5), ValidationError);
}

TEST(Haversine, KnownValues) {
  EXPECT_EQ(haversine_m(40.7, -74.0, 40.7, -74.0), 0.0);
  EXPECT_NEAR(haversine_m(0, 0, 0, 1), 111194.9, 1.0);
  EXPECT_NEAR(haversine_m(0, 0, 0, 1), 6371000.0 * std::numbers::pi / 180.0, 1e-6);
}

TEST(Haversine, AgreesWithVectorForm) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-80, 80);
    const double b = rng.uniform(-180, 180);
    const double c = rng.uniform(-80, 80);
    const double d = rng.uniform(-180, 180);
    const double h = haversine_m(a, b, c, d);
    EXPECT_NEAR(h, testing::arc_m(a, b, c, d), 1e-6 * std::max(1.0, h));
    EXPECT_DOUBLE_EQ(h, haversine_m(c, d, a, b));
  }
}

TEST(ExposureModel, PanelRatioAndClamp) {
  const std::vector<Billboard> b{{"small", 0, 0, 300, 1}, {"big", 0, 0, 600, 1}};
  const std::vector<TrajectoryRecord> t{{"u", 0, 0, 0, 10}};
  const auto slots = enumerate_slots(b, 0, 10, 10);
  const auto model = build_exposure_model(b, t, slots, 100);
  EXPECT_DOUBLE_EQ(model.probability(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(model.probability(1, 0), 1.0 - 1e-12);
  EXPECT_LT(model.probability(1, 0), 1.0);
}

TEST(ExposureModel, RadiusExcludesAll) {
  // ~200 m north of every billboard.
  const std::vector<Billboard> b{{"a", 0, 0, 1, 1}, {"c", 0, 0, 2, 1}};
  const double lat = 200.0 / (6371000.0 * std::numbers::pi / 180.0);
  const std::vector<TrajectoryRecord> t{{"u", lat, 0, 0, 60}};
  const auto model = build_exposure_model(b, t, enumerate_slots(b, 0, 60, 5), 100);
  EXPECT_EQ(model.nonzero_count(), 0u);
  EXPECT_EQ(model.user_count(), 1u);
}

TEST(ExposureModel, SharedEndpointCounts) {
  const std::vector<Billboard> b{{"a", 0, 0, 1, 1}};
  const std::vector<TrajectoryRecord> t{{"u", 0, 0, 100, 160}};
  const auto slots = enumerate_slots(b, 100, 280, 60);  // [100,160] [160,220] [220,280]
  const auto model = build_exposure_model(b, t, slots, 100);
  EXPECT_GT(model.probability(0, 0), 0.0);
  EXPECT_GT(model.probability(1, 0), 0.0);
  EXPECT_EQ(model.probability(2, 0), 0.0);
}

TEST(ExposureModel, RepeatExposureCountsOnce) {
  const std::vector<Billboard> b{{"a", 0, 0, 1, 1}, {"c", 0, 0, 4, 1}};
  const std::vector<TrajectoryRecord> t{
      {"u", 0, 0, 0, 5}, {"u", 0, 0.0001, 2, 4}, {"u", 0, 0, 3, 3}};
  const auto model = build_exposure_model(b, t, enumerate_slots(b, 0, 10, 10), 100);
  ASSERT_EQ(model.exposures(0).size(), 1u);
  EXPECT_DOUBLE_EQ(model.singleton_influence(0), 0.25);
}

TEST(ExposureModel, RejectsBadLists) {
  using L = std::vector<std::vector<Exposure>>;
  EXPECT_THROW(ExposureModel(2, L{{{2, 0.5}}}), ValidationError);
  EXPECT_THROW(ExposureModel(2, L{{{1, 0.5}, {0, 0.5}}}), ValidationError);
  EXPECT_THROW(ExposureModel(2, L{{{0, 0.5}, {0, 0.5}}}), ValidationError);
  EXPECT_THROW(ExposureModel(2, L{{{0, 1.5}}}), ValidationError);
  EXPECT_THROW(ExposureModel(2, L{{{0, -0.1}}}), ValidationError);
}

// Every stored pair is re-derived from the raw tables with an independent
// distance formula, and no qualifying pair is missing.
TEST(ExposureModel, RoundTripAudit) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.n_billboards = 15;
    spec.n_users = 120;
    spec.horizon = 240;
    spec.delta = 15;
    spec.hotspots = seed % 2 ? 3 : 0;
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const auto slots = enumerate_slots(data.billboards, 0, 240, 15);
    const double lambda = 60.0 * static_cast<double>(seed);
    const auto model =
        build_exposure_model(data.billboards, data.trajectories, slots, lambda);

    double max_panel = 0;
    for (const auto& bb : data.billboards) max_panel = std::max(max_panel, bb.panel_size);
    std::map<std::string, UserIndex> user_of;
    for (const auto& r : data.trajectories) {
      user_of.emplace(r.user_id, static_cast<UserIndex>(user_of.size()));
    }
    ASSERT_EQ(model.user_count(), user_of.size());
    const auto ids = model.user_ids();

    testing::Dense expected(slots.size(), std::vector<double>(model.user_count(), 0.0));
    for (const auto& s : slots) {
      const auto& bb = *std::find_if(data.billboards.begin(), data.billboards.end(),
                                     [&](const Billboard& x) { return x.id == s.billboard_id; });
      for (const auto& r : data.trajectories) {
        const bool time = std::max(r.t_start, s.window_start) <= std::min(r.t_end, s.window_end);
        const bool near = testing::arc_m(bb.latitude, bb.longitude, r.latitude,
                                         r.longitude) <= lambda;
        if (time && near) {
          const auto it = std::find(ids.begin(), ids.end(), r.user_id);
          expected[s.slot_index][static_cast<std::size_t>(it - ids.begin())] =
              testing::clamp_p(bb.panel_size / max_panel);
        }
      }
    }
    std::size_t pairs = 0;
    for (SlotIndex s = 0; s < slots.size(); ++s) {
      UserIndex prev = 0;
      bool first = true;
      for (const auto& e : model.exposures(s)) {
        EXPECT_TRUE(first || e.user > prev);
        EXPECT_GT(e.prob, 0.0);
        EXPECT_LE(e.prob, 1.0 - 1e-12);
        prev = e.user;
        first = false;
      }
      for (UserIndex u = 0; u < model.user_count(); ++u) {
        EXPECT_EQ(model.probability(s, u), expected[s][u]) << s << ' ' << u;
        if (expected[s][u] > 0) ++pairs;
      }
    }
    EXPECT_EQ(model.nonzero_count(), pairs);
    EXPECT_GT(pairs, 0u);
  }
}

TEST(ExposureModel, TransposeMatches) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto m = testing::random_micro(rng, 12, 8);
    for (UserIndex u = 0; u < m.model.user_count(); ++u) {
      std::size_t count = 0;
      for (const auto& se : m.model.user_exposures(u)) {
        EXPECT_EQ(se.prob, m.p[se.slot][u]);
        ++count;
      }
      std::size_t expected = 0;
      for (const auto& row : m.p) expected += row[u] > 0 ? 1 : 0;
      EXPECT_EQ(count, expected);
    }
  }
}

TEST(CoverageCounts, BruteForceRecount) {
  SyntheticSpec spec;
  spec.n_billboards = 10;
  spec.n_users = 80;
  spec.horizon = 120;
  spec.delta = 10;
  spec.seed = 21;
  const auto data = generate_synthetic(spec);
  const auto slots = enumerate_slots(data.billboards, 0, 120, 10);
  const auto model = build_exposure_model(data.billboards, data.trajectories, slots, 250);
  const auto counts = coverage_counts(model, data.trajectories);
  for (const auto& s : slots) {
    const auto& bb = data.billboards[s.slot_index / 12];
    std::size_t expected = 0;
    for (const auto& r : data.trajectories) expected += covers(bb, s, r, 250) ? 1 : 0;
    EXPECT_EQ(counts[s.slot_index], expected);
  }
  EXPECT_THROW(coverage_counts(testing::two_slot_model(), data.trajectories),
               std::invalid_argument);
}

}  // namespace
}  // namespace slotmax
