#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fcooper::netsim {

struct LinkModel {
  double bandwidth_bps = 27e6;
  double prop_delay_s = 0.002;
  double loss_rate = 0.0;  // per message, [0, 1)

  void validate() const;  // throws std::invalid_argument
};

// "dsrc" (27 Mb/s, 2 ms), "dsrc-low" (6 Mb/s, 2 ms), "mmwave" (1 Gb/s, 1 ms)
LinkModel link_profile(const std::string& name);

// serialization + propagation; store-and-forward
double transmit_time(const LinkModel& link, uint64_t bytes);

struct StageTimings {
  double encode_s = 0.050;
  double pack_s = 0.002;
  double fuse_s = 0.010;
  double detect_s = 0.200;
};

enum class EventKind { FrameCaptured, SendStart, Arrival, Drop, FusionDone, DetectionDone };

const char* event_name(EventKind k);

struct SimEvent {
  int64_t time_us = 0;
  std::string actor;
  EventKind kind = EventKind::FrameCaptured;
  uint64_t bytes = 0;
  std::string stage;
};

struct ScenarioConfig {
  struct Vehicle {
    std::string id;
    uint64_t payload_bytes = 0;
  };
  std::vector<Vehicle> vehicles;
  std::string edge_id = "edge";
  LinkModel link;
  StageTimings timings;
  double duration_s = 5.0;           // floor(duration) exchange rounds per sender
  double exchange_interval_s = 1.0;  // the 1 Hz schedule
  uint64_t seed = 0;
};

struct ExchangeRecord {
  std::string vehicle;
  int round = 0;
  bool dropped = false;
  double capture_s = 0, encode_s = 0, pack_s = 0, transmit_s = 0, fuse_s = 0, detect_s = 0;
  double total_s = 0;
};

struct ScenarioResult {
  std::vector<SimEvent> log;  // strictly ordered by (time, actor, kind)
  std::vector<ExchangeRecord> exchanges;
};

// Deterministic discrete-event run: same configuration and seed give a
// byte-identical log.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

enum class Strategy { Raw, VFF, SFF };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct SceneStats {
  uint64_t payload_bytes = 0;     // wire bytes of the feature message; 0 derives from the fields below
  uint64_t in_range_points = 0;   // raw strategy payload basis
  uint64_t voxel_count = 0;       // voxel strategy payload basis
  double compression_ratio = 1.0;
  uint64_t result_bytes = 1024;   // detection result returned by the edge
};

struct LatencyBudget {
  double encode_s = 0, pack_s = 0, transmit_s = 0, fuse_s = 0, detect_s = 0,
         result_return_s = 0;
  double total_s = 0;         // full capture-to-result path
  double vehicle_side_s = 0;  // edge offload: pack + transmit + result return
  uint64_t payload_bytes = 0;
};

// Closed-form per-stage budget for one exchange under the given link.
LatencyBudget latency_budget(Strategy strategy, const SceneStats& stats,
                             const LinkModel& link, const StageTimings& timings);

}  // namespace fcooper::netsim
