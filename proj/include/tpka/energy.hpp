#ifndef TPKA_ENERGY_HPP
#define TPKA_ENERGY_HPP

#include <array>
#include <cstdint>
#include <string>

#include "tpka/accounting.hpp"
#include "tpka/key.hpp"

namespace tpka {

/// Per-byte operation costs (uJ/byte) for an 8-bit ATmega128L-class node
/// with a 915 MHz radio, plus the packet size table used to turn layout
/// units into bytes.
struct EnergyModel {
  double encrypt_uj = 1.62;   // AES-128
  double decrypt_uj = 2.49;   // AES-128
  double hash_uj = 5.90;      // SHA-1
  double keygen_uj = 11.4;    // key generation
  double receive_uj = 28.6;
  double transmit_uj = 59.2;

  double header_bytes = 4;
  double id_bytes = 8;
  double key_bytes = 16;
  double nonce_bytes = 12;
  double tag_bytes = 16;

  void validate() const {
    for (double c : {encrypt_uj, decrypt_uj, hash_uj, keygen_uj, receive_uj, transmit_uj}) {
      if (!(c > 0.0)) throw Error(Errc::invalid_config, "energy costs must be strictly positive");
    }
    for (double s : {header_bytes, id_bytes, key_bytes, nonce_bytes, tag_bytes}) {
      if (!(s >= 0.0)) throw Error(Errc::invalid_config, "packet sizes must be non-negative");
    }
  }

  double bytes(const ByteTally& t) const noexcept {
    return static_cast<double>(t.header) * header_bytes + static_cast<double>(t.id) * id_bytes +
           static_cast<double>(t.key) * key_bytes + static_cast<double>(t.nonce) * nonce_bytes +
           static_cast<double>(t.tag) * tag_bytes;
  }
};

struct EnergyBreakdown {
  double encrypt = 0;
  double decrypt = 0;
  double hash = 0;
  double keygen = 0;
  double transmit = 0;
  double receive = 0;

  double computation() const noexcept { return encrypt + decrypt + hash + keygen; }
  double communication() const noexcept { return transmit + receive; }
  double total() const noexcept { return computation() + communication(); }

  EnergyBreakdown& operator+=(const EnergyBreakdown& o) noexcept {
    encrypt += o.encrypt;
    decrypt += o.decrypt;
    hash += o.hash;
    keygen += o.keygen;
    transmit += o.transmit;
    receive += o.receive;
    return *this;
  }
};

/// Energy = sum over operations of bytes processed x per-byte cost.
inline EnergyBreakdown energy_accounting(const OpCounters& c, const EnergyModel& m) {
  return {m.bytes(c.encrypt.bytes) * m.encrypt_uj, m.bytes(c.decrypt.bytes) * m.decrypt_uj,
          m.bytes(c.hash.bytes) * m.hash_uj,       m.bytes(c.keygen.bytes) * m.keygen_uj,
          m.bytes(c.transmit.bytes) * m.transmit_uj, m.bytes(c.receive.bytes) * m.receive_uj};
}

inline EnergyBreakdown energy_accounting(const NodeLedger& ledger, const EnergyModel& m) {
  OpCounters all = ledger.agreement;
  all += ledger.discovery;
  all += ledger.relay;
  return energy_accounting(all, m);
}

/// Operation counts of the analytic overhead model, as doubles since d is a
/// mean.
struct ExpectedCounts {
  double encrypt = 0;
  double decrypt = 0;
  double hash = 0;
  double keygen = 0;
  double transmit = 0;
  double receive = 0;
};

/// Sensor with d neighbours, initiating half of its links: encrypt and send
/// d packets, hash d + 1 times, receive and decrypt d packets, draw d / 2
/// keys.
inline ExpectedCounts expected_sensor_counts(double d) { return {d, d, d + 1.0, d / 2.0, d, d}; }

/// Third party serving one sensor: receive and decrypt d / 2 packets, hash
/// d + d / 2 + 3 times, encrypt and send d / 2 packets.
inline ExpectedCounts expected_tp_counts(double d) { return {d / 2.0, d / 2.0, d + d / 2.0 + 3.0, 0.0, d / 2.0, d / 2.0}; }

/// Energy of the analytic counts when every packet has the default layout
/// of this implementation (per-neighbour requests of two ids, share and
/// confirm payloads of two ids and a key).
inline EnergyBreakdown expected_sensor_energy(double d, const EnergyModel& m) {
  const double half = d / 2.0;
  const ByteTally request_pt{0, 2, 0, 0, 0};
  const ByteTally pair_pt{0, 2, 1, 0, 0};
  const ByteTally sealed_frame_extra{1, 2, 0, 1, 1};
  const double request_wire = m.bytes(request_pt + sealed_frame_extra);
  const double pair_wire = m.bytes(pair_pt + sealed_frame_extra);
  EnergyBreakdown e;
  e.encrypt = (half * m.bytes(request_pt) + half * m.bytes(pair_pt)) * m.encrypt_uj;
  e.transmit = (half * request_wire + half * pair_wire) * m.transmit_uj;
  e.hash = (d * m.bytes(tally::keyed_hash_input) + m.bytes(tally::chain_hash_input)) * m.hash_uj;
  e.decrypt = d * m.bytes(pair_pt) * m.decrypt_uj;
  e.receive = d * pair_wire * m.receive_uj;
  e.keygen = half * m.bytes(tally::key) * m.keygen_uj;
  return e;
}

inline EnergyBreakdown expected_tp_energy(double d, const EnergyModel& m) {
  const double half = d / 2.0;
  const ByteTally request_pt{0, 2, 0, 0, 0};
  const ByteTally pair_pt{0, 2, 1, 0, 0};
  const ByteTally sealed_frame_extra{1, 2, 0, 1, 1};
  EnergyBreakdown e;
  e.receive = half * m.bytes(request_pt + sealed_frame_extra) * m.receive_uj;
  e.decrypt = half * m.bytes(request_pt) * m.decrypt_uj;
  e.hash = (d + half + 3.0) * m.bytes(tally::keyed_hash_input) * m.hash_uj;
  e.encrypt = half * m.bytes(pair_pt) * m.encrypt_uj;
  e.transmit = half * m.bytes(pair_pt + sealed_frame_extra) * m.transmit_uj;
  return e;
}

}  // namespace tpka

#endif  // TPKA_ENERGY_HPP
