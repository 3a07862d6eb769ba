#include "doctest.h"

#include "helper/radio/radio_medium.hpp"

using namespace helper;
using namespace helper::radio;

namespace {

RadioMedium medium(std::vector<RadioMedium::Station> stations, double ber = 0.0,
                   double range = 2000.0) {
  LinkParams lp;
  lp.range_m = range;
  lp.ber = {ber};
  return RadioMedium(lp, std::move(stations), 1);
}

HelperPacket data(std::size_t payload) {
  HelperPacket p;
  p.payload.assign(payload, 0xAB);
  return p;
}

}  // namespace

TEST_CASE("ideal channel delivers an uncorrupted frame in range") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {100, 0}}});
  auto id = m.begin(node_id(0), data(10), {}, 0.0, 0.1);
  auto rx = m.finish(id);
  REQUIRE(rx.size() == 1);
  CHECK(rx[0].node == node_id(1));
  CHECK_FALSE(rx[0].corrupted());
  CHECK(rx[0].probe_intact_bits == kProbeBits);
}

TEST_CASE("out-of-range listeners hear nothing") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {2500, 0}}});
  CHECK_FALSE(m.in_range(node_id(0), node_id(1)));
  CHECK(m.finish(m.begin(node_id(0), data(10), {}, 0.0, 0.1)).empty());
}

TEST_CASE("overlapping transmissions collide at a common receiver") {
  // 0 and 2 are hidden from each other; 1 hears both.
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {1500, 0}}, {node_id(2), {3000, 0}}});
  auto a = m.begin(node_id(0), data(10), {}, 0.0, 0.1);
  auto b = m.begin(node_id(2), data(10), {}, 0.05, 0.1);
  auto ra = m.finish(a);
  auto rb = m.finish(b);
  REQUIRE(ra.size() == 1);
  REQUIRE(rb.size() == 1);
  CHECK(ra[0].collided);
  CHECK(rb[0].collided);
}

TEST_CASE("a transmitting radio cannot receive") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {100, 0}}});
  auto a = m.begin(node_id(0), data(10), {}, 0.0, 0.1);
  auto b = m.begin(node_id(1), data(10), {}, 0.01, 0.1);
  CHECK(m.finish(a)[0].collided);
  CHECK(m.finish(b)[0].collided);
}

TEST_CASE("channel activity detection") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {1000, 0}}, {node_id(2), {2500, 0}}});
  CHECK_FALSE(m.cad_busy(node_id(1), 0.0));
  auto id = m.begin(node_id(0), data(100), {}, 0.0, 0.3);
  CHECK(m.cad_busy(node_id(1), 0.1));
  // Node 2 is 2500 m from the transmitter: hidden terminal.
  CHECK_FALSE(m.cad_busy(node_id(2), 0.1));
  CHECK_FALSE(m.cad_busy(node_id(0), 0.1));
  m.finish(id);
  CHECK_FALSE(m.cad_busy(node_id(1), 0.2));
}

TEST_CASE("bit errors damage regions independently and replay by seed") {
  auto run = [] {
    auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {100, 0}}}, 0.01);
    std::vector<std::size_t> probes;
    for (int i = 0; i < 50; ++i) {
      auto rx = m.finish(m.begin(node_id(0), data(50), {}, i, 0.1));
      probes.push_back(rx.at(0).probe_intact_bits);
    }
    return probes;
  };
  auto a = run();
  CHECK(a == run());
  double mean = 0;
  for (auto v : a) mean += static_cast<double>(v);
  mean /= static_cast<double>(a.size());
  CHECK(mean == doctest::Approx(128 * 0.99).epsilon(0.03));
}

TEST_CASE("dead radios neither send nor hear") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {100, 0}}});
  m.kill(node_id(1));
  CHECK(m.finish(m.begin(node_id(0), data(1), {}, 0.0, 0.1)).empty());
  CHECK_THROWS(m.begin(node_id(1), data(1), {}, 0.0, 0.1));
}

TEST_CASE("transmit cost and truncation at the energy floor") {
  HelperPacket p = data(200);
  TransmissionStrategy s{5000.0, 0.1};
  CHECK(tx_cost(p, s).nanojoules() == 40'800'000);
  auto full = charge_for(p, s, Energy::from_joules(1.0));
  CHECK_FALSE(full.truncated);
  CHECK(full.airtime == doctest::Approx(0.408));
  auto cut = charge_for(p, s, Energy::from_nanojoules(10'000'000));
  CHECK(cut.truncated);
  CHECK(cut.cost.nanojoules() == 10'000'000);
  CHECK(cut.airtime == doctest::Approx(0.1));
}

TEST_CASE("truncated frames are never decodable") {
  auto m = medium({{node_id(0), {0, 0}}, {node_id(1), {100, 0}}});
  auto rx = m.finish(m.begin(node_id(0), data(1), {}, 0.0, 0.01, true));
  CHECK_FALSE(rx.at(0).decodable());
}
