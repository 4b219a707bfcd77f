#include <gtest/gtest.h>

#include "tpka/energy.hpp"
#include "tpka/protocol.hpp"
#include "tpka/simulator.hpp"

using namespace tpka;

namespace {

// Node 1 with `d` neighbours 2..d+1. It initiates towards the first half
// and answers the second half, which initiate towards it.
struct Star {
  KeyStream rng{21};
  BaseStation bs{rng, 16};
  std::vector<SensorNode> nodes;
  ThirdParty tp;

  explicit Star(int d) {
    for (int i = 1; i <= d + 1; ++i) nodes.push_back(bs.provision_sensor(NodeId{static_cast<std::uint64_t>(i)}));
    tp = bs.provision_third_party(NodeId{500}, 9);
    for (int i = 1; i <= d; ++i) handshake(nodes[0], nodes[i], true, rng);
    const auto advert = tp_advertise(tp);
    for (auto& n : nodes) sensor_accept_tp(n, *advert, 1);
    for (int i = 1; i <= d; ++i) {
      if (i <= d / 2) {
        nodes[0].initiate_for.insert(nodes[i].id);
      } else {
        nodes[i].initiate_for.insert(nodes[0].id);
      }
    }
    for (auto& n : nodes) {
      if (n.initiate_for.empty()) continue;
      for (const auto& req : request_keys(n)) {
        for (const auto& resp : tp_serve_request(tp, req)) {
          const auto confirm = initiator_accept_response(n, resp, rng);
          auto& peer = nodes[confirm.sealed.key_hint.value - 1];
          responder_accept_confirm(peer, confirm);
        }
      }
    }
  }
};

}  // namespace

TEST(Energy, SensorCountsForTwentyNeighbours) {
  Star star(20);
  const auto& c = star.nodes[0].ledger.agreement;
  EXPECT_EQ(c.encrypt.ops, 20u);
  EXPECT_EQ(c.transmit.ops, 20u);
  EXPECT_EQ(c.hash.ops, 21u);
  EXPECT_EQ(c.decrypt.ops, 20u);
  EXPECT_EQ(c.receive.ops, 20u);
  EXPECT_EQ(c.keygen.ops, 10u);
  EXPECT_EQ(star.nodes[0].established.size(), 20u);

  const auto e = expected_sensor_counts(20);
  EXPECT_EQ(e.encrypt, 20);
  EXPECT_EQ(e.hash, 21);
  EXPECT_EQ(e.keygen, 10);
}

TEST(Energy, SensorEnergyMatchesTheClosedForm) {
  Star star(20);
  const EnergyModel m;
  const auto got = energy_accounting(star.nodes[0].ledger.agreement, m);
  const auto want = expected_sensor_energy(20, m);
  EXPECT_NEAR(got.encrypt, want.encrypt, 1e-9);
  EXPECT_NEAR(got.decrypt, want.decrypt, 1e-9);
  EXPECT_NEAR(got.hash, want.hash, 1e-9);
  EXPECT_NEAR(got.keygen, want.keygen, 1e-9);
  EXPECT_NEAR(got.transmit, want.transmit, 1e-9);
  EXPECT_NEAR(got.receive, want.receive, 1e-9);
}

TEST(Energy, ThirdPartyCountsPerRequester) {
  Star star(20);
  // Requester 1 lists 10 peers; each of nodes 12..21 lists one.
  EXPECT_EQ(star.tp.ledger.requesters_served, 11u);
  const auto& c = star.tp.ledger.agreement;
  EXPECT_EQ(c.receive.ops, 20u);
  EXPECT_EQ(c.decrypt.ops, 20u);
  EXPECT_EQ(c.encrypt.ops, 20u);
  EXPECT_EQ(c.transmit.ops, 20u);
  EXPECT_EQ(c.hash.ops, 11u * 2u + 20u * 3u);
  EXPECT_EQ(c.keygen.ops, 0u);
}

TEST(Energy, IsolatedNodeSpendsOnlyOnDiscovery) {
  Star star(0);
  const auto& n = star.nodes[0];
  EXPECT_EQ(n.ledger.agreement.encrypt.ops + n.ledger.agreement.transmit.ops + n.ledger.agreement.keygen.ops, 0u);
  EXPECT_EQ(n.ledger.agreement.hash.ops, 1u);  // advert verification
  const EnergyModel m;
  EXPECT_NEAR(energy_accounting(n.ledger.agreement, m).total(), 16 * m.hash_uj, 1e-12);
}

TEST(Energy, ExactLinearCombination) {
  OpCounters c;
  c.encrypt.add({1, 2, 1, 1, 1}, 3);
  c.decrypt.add({0, 2, 1, 0, 0}, 2);
  c.hash.add(tally::keyed_hash_input, 5);
  c.keygen.add(tally::key, 1);
  c.transmit.add({1, 4, 1, 1, 1}, 2);
  c.receive.add({1, 3, 0, 1, 1}, 4);
  EnergyModel m;
  m.encrypt_uj = 1;
  m.decrypt_uj = 2;
  m.hash_uj = 3;
  m.keygen_uj = 4;
  m.transmit_uj = 5;
  m.receive_uj = 6;
  const auto e = energy_accounting(c, m);
  // bytes: encrypt 3*(4+16+16+12+16)=192, decrypt 2*32=64, hash 5*24=120,
  // keygen 16, transmit 2*(4+32+16+12+16)=160, receive 4*(4+24+12+16)=224
  EXPECT_DOUBLE_EQ(e.encrypt, 192 * 1.0);
  EXPECT_DOUBLE_EQ(e.decrypt, 64 * 2.0);
  EXPECT_DOUBLE_EQ(e.hash, 120 * 3.0);
  EXPECT_DOUBLE_EQ(e.keygen, 16 * 4.0);
  EXPECT_DOUBLE_EQ(e.transmit, 160 * 5.0);
  EXPECT_DOUBLE_EQ(e.receive, 224 * 6.0);
  EXPECT_DOUBLE_EQ(e.total(), 192 + 128 + 360 + 64 + 800 + 1344);
}

TEST(Energy, DoublingPacketSizesDoublesCommunication) {
  Star star(12);
  EnergyModel m;
  EnergyModel big = m;
  big.header_bytes *= 2;
  big.id_bytes *= 2;
  big.key_bytes *= 2;
  big.nonce_bytes *= 2;
  big.tag_bytes *= 2;
  const auto a = energy_accounting(star.nodes[0].ledger, m);
  const auto b = energy_accounting(star.nodes[0].ledger, big);
  EXPECT_NEAR(b.communication(), 2 * a.communication(), 1e-9);
  EXPECT_NEAR(b.total(), 2 * a.total(), 1e-9);
  // Costs enter linearly too.
  EnergyModel slow_radio = m;
  slow_radio.transmit_uj *= 3;
  EXPECT_NEAR(energy_accounting(star.nodes[0].ledger, slow_radio).transmit, 3 * a.transmit, 1e-9);
  EXPECT_NEAR(energy_accounting(star.nodes[0].ledger, slow_radio).receive, a.receive, 1e-12);
}

TEST(Energy, ModelValidation) {
  EnergyModel m;
  EXPECT_NO_THROW(m.validate());
  m.hash_uj = 0;
  EXPECT_THROW(m.validate(), Error);
  m = {};
  m.tag_bytes = -1;
  EXPECT_THROW(m.validate(), Error);
}

TEST(Energy, SimulatedCountsTrackTheModel) {
  geometry::DeploymentConfig cfg;
  cfg.sensors = 2000;
  cfg.third_parties = 400;
  cfg.density = 20;
  cfg.scenario = geometry::Scenario::C;
  cfg.seed = 4;
  const auto rep = run_key_establishment(deploy(cfg, EdgeMode::torus, cfg.seed), cfg);
  ASSERT_FALSE(rep.operation_counts.empty());
  for (const auto& c : rep.operation_counts) {
    if (c.role == "sensor") {
      EXPECT_LT(c.relative_gap, 0.10) << c.op;
    }
  }
  // Per-node energies add up to the role totals.
  double sum = 0;
  for (std::size_t i = 0; i < rep.sensors; ++i) sum += rep.energy_uj_per_node[i];
  EXPECT_NEAR(sum, rep.sensor.energy.total(), 1e-6 * sum);
}
