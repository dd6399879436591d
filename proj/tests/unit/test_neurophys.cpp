#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hpnet/errors.hpp"
#include "hpnet/neurophys.hpp"

using namespace hpnet;

namespace {

HPNetConfig small_config() {
  HPNetConfig c;
  c.levels = 2;
  c.channels = {2, 3};
  c.block_depth = 5;
  c.block_stride = 5;
  c.frame_height = c.frame_width = 8;
  return c;
}

}  // namespace

TEST_CASE("protocol geometry") {
  StimulusProtocol paired;
  CHECK(paired.length() == 27);
  CHECK(paired.late_window() == std::pair<std::size_t, std::size_t>{17, 27});
  StimulusProtocol fam;
  fam.kind = ProtocolKind::StaticFamiliarity;
  CHECK(fam.length() == 20);
  CHECK(fam.late_window() == std::pair<std::size_t, std::size_t>{15, 20});
  paired.image2_dur = 0;
  CHECK_THROWS_AS(paired.validate(), ContractError);
}

TEST_CASE("paired sequences show gray, image, gap, image") {
  const auto pool = make_texture_pool(8, 8, 8, 3);
  CHECK(pool == make_texture_pool(8, 8, 8, 3));
  StimulusProtocol p;
  const auto set = build_protocol_sequences(p, pool, 4, 17);
  REQUIRE(set.exposed.size() == 4);
  REQUIRE(set.control.size() == 4);
  for (const auto& seq : set.exposed) {
    REQUIRE(seq.frames.size() == 27);
    CHECK(seq.condition == "predicted");
    CHECK(seq.frames[0] == Frame(8, 8, kGray));
    CHECK(seq.frames[5] == pool[seq.first]);
    CHECK(seq.frames[15] == Frame(8, 8, kGray));
    CHECK(seq.frames[17] == pool[seq.second]);
    CHECK(seq.frames[26] == pool[seq.second]);
  }
  // Same first and second images, re-paired with no predicted pair kept.
  std::multiset<std::size_t> f1, f2, s1, s2;
  std::set<std::pair<std::size_t, std::size_t>> predicted;
  for (const auto& s : set.exposed) f1.insert(s.first), s1.insert(s.second), predicted.insert({s.first, s.second});
  for (const auto& s : set.control) {
    f2.insert(s.first), s2.insert(s.second);
    CHECK(s.condition == "unpredicted");
    CHECK(predicted.count({s.first, s.second}) == 0);
  }
  CHECK(f1 == f2);
  CHECK(s1 == s2);
  const auto again = build_protocol_sequences(p, pool, 4, 17);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.control[i].second == set.control[i].second);
  CHECK_THROWS_AS(build_protocol_sequences(p, pool, 5, 17), ContractError);
  CHECK_THROWS_AS(build_protocol_sequences(p, pool, 1, 17), ContractError);
}

TEST_CASE("familiarity sets are disjoint halves of the pool") {
  const auto pool = make_texture_pool(6, 8, 8, 4);
  StimulusProtocol p;
  p.kind = ProtocolKind::StaticFamiliarity;
  const auto set = build_protocol_sequences(p, pool, 3, 2);
  std::set<std::size_t> fam, nov;
  for (const auto& s : set.exposed) {
    fam.insert(s.first);
    CHECK(s.frames.size() == 20);
  }
  for (const auto& s : set.control) {
    nov.insert(s.first);
    CHECK(s.condition == "novel");
  }
  CHECK(fam.size() == 3);
  CHECK(nov.size() == 3);
  for (auto i : fam) CHECK(nov.count(i) == 0);
}

TEST_CASE("suppression index") {
  const std::vector<double> a{1, 2, 3, 4}, zero(4, 0.0);
  CHECK(suppression_index(a, a, 0, 4) == 0.0);
  CHECK(suppression_index(a, zero, 1, 3) == 1.0);
  CHECK(suppression_index(zero, a, 1, 3) == -1.0);
  const std::vector<double> b{0, 1, 1, 0};
  CHECK(suppression_index(a, b, 1, 3) == doctest::Approx((2.5 - 1.0) / 3.5));
  CHECK_THROWS_AS(suppression_index(zero, zero, 0, 4), UndefinedResultError);
  CHECK_THROWS_AS(suppression_index(a, {1, 2}, 0, 2), DimensionError);
  CHECK_THROWS_AS(suppression_index(a, a, 2, 2), ContractError);
  CHECK_THROWS_AS(suppression_index(a, a, 0, 5), ContractError);
}

TEST_CASE("protocol blocks pad with gray up to whole blocks") {
  const auto c = small_config();
  std::vector<Frame> frames(27, Frame(8, 8, 0.25));
  const auto blocks = protocol_blocks(c, frames);
  CHECK(blocks.size() == 6);
  CHECK(block_frame(blocks[5], 1).at(0, 0) == 0.25);
  CHECK(block_frame(blocks[5], 2).at(0, 0) == kGray);
}

TEST_CASE("a zero-weight network is silent") {
  const auto c = small_config();
  const auto params = HPNetParams::zeros(c);
  const auto pool = make_texture_pool(4, 8, 8, 1);
  const auto set = build_protocol_sequences(StimulusProtocol{}, pool, 2, 1);
  for (auto unit : {UnitKind::E, UnitKind::P, UnitKind::R})
    for (std::size_t l = 0; l < 2; ++l) {
      const auto tr = measure_responses(c, params, set.exposed, unit, l, 27);
      CHECK(tr.values.size() == 27);
      CHECK(tr.condition == "predicted");
      for (double v : tr.values) CHECK(v == 0.0);
    }
  CHECK_THROWS_AS(measure_responses(c, params, set.exposed, UnitKind::E, 2, 27), ContractError);
  const auto res = run_protocol(c, params, StimulusProtocol{}, set);
  CHECK(res.indices.size() == 6);
  for (const auto& r : res.indices) CHECK(std::isnan(r.index));
  CHECK(res.traces.size() == 12);
}

TEST_CASE("identical conditions give zero indices") {
  const auto c = small_config();
  Rng rng(5);
  const auto params = HPNetParams::initialize(c, rng);
  const auto pool = make_texture_pool(4, 8, 8, 1);
  auto set = build_protocol_sequences(StimulusProtocol{}, pool, 2, 1);
  set.control = set.exposed;
  for (const auto& r : run_protocol(c, params, StimulusProtocol{}, set).indices)
    if (!std::isnan(r.index)) CHECK(r.index == 0.0);
}

TEST_CASE("trace writer format") {
  ResponseTrace t;
  t.unit = UnitKind::R;
  t.level = 1;
  t.condition = "novel";
  t.values = {0.5, 0.25};
  std::ostringstream os;
  write_traces(os, {t});
  CHECK(os.str() == "# hpnet-neurophys v1\n0\tnovel\tR\t2\t0.5\n1\tnovel\tR\t2\t0.25\n");
}
