#ifndef TPKA_TRACE_HPP
#define TPKA_TRACE_HPP

// Newline-delimited JSON event trace.

#include <cstdint>
#include <ostream>
#include <string_view>

#include <json.hpp>

#include "tpka/protocol.hpp"

namespace tpka {

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* out = nullptr) : out_(out) {}

  bool enabled() const noexcept { return out_ != nullptr; }

  void record(Round round, std::string_view event, NodeId sender, NodeId receiver, std::string_view tag,
              std::string_view outcome) {
    if (!out_) return;
    nlohmann::ordered_json j;
    j["round"] = round;
    j["event"] = event;
    j["sender"] = sender.value;
    j["receiver"] = receiver.value;
    j["tag"] = tag;
    j["outcome"] = outcome;
    *out_ << j.dump() << '\n';
  }

 private:
  std::ostream* out_;
};

}  // namespace tpka

#endif  // TPKA_TRACE_HPP
