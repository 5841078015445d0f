#include "fcooper/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "fcooper/rng.hpp"
#include "fcooper/wire.hpp"

namespace fcooper::netsim {

void LinkModel::validate() const {
  if (!(bandwidth_bps > 0.0))
    throw std::invalid_argument("link: bandwidth must be positive");
  if (prop_delay_s < 0.0) throw std::invalid_argument("link: negative delay");
  if (loss_rate < 0.0 || loss_rate >= 1.0)
    throw std::invalid_argument("link: loss rate must be in [0, 1)");
}

LinkModel link_profile(const std::string& name) {
  if (name == "dsrc") return {27e6, 0.002, 0.0};
  if (name == "dsrc-low") return {6e6, 0.002, 0.0};
  if (name == "mmwave") return {1e9, 0.001, 0.0};
  throw std::invalid_argument("unknown link profile: " + name);
}

double transmit_time(const LinkModel& link, uint64_t bytes) {
  link.validate();
  return static_cast<double>(bytes) * 8.0 / link.bandwidth_bps + link.prop_delay_s;
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::FrameCaptured: return "frame_captured";
    case EventKind::SendStart: return "send_start";
    case EventKind::Arrival: return "arrival";
    case EventKind::Drop: return "drop";
    case EventKind::FusionDone: return "fusion_done";
    case EventKind::DetectionDone: return "detection_done";
  }
  return "?";
}

namespace {

int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.link.validate();
  if (!(cfg.duration_s > 0.0))
    throw std::invalid_argument("scenario: duration must be positive");
  if (cfg.vehicles.empty())
    throw std::invalid_argument("scenario: no vehicles configured");
  if (!(cfg.exchange_interval_s > 0.0))
    throw std::invalid_argument("scenario: bad exchange interval");
  std::unordered_set<std::string> ids{cfg.edge_id};
  for (const auto& v : cfg.vehicles) {
    if (v.id.empty()) throw std::invalid_argument("scenario: empty actor id");
    if (!ids.insert(v.id).second)
      throw std::invalid_argument("scenario: duplicate actor id " + v.id);
  }

  const int rounds = static_cast<int>(std::floor(cfg.duration_s));
  ScenarioResult res;
  for (size_t vi = 0; vi < cfg.vehicles.size(); ++vi) {
    const auto& v = cfg.vehicles[vi];
    for (int round = 0; round < rounds; ++round) {
      // loss draw keyed by (seed, vehicle, round) so the outcome does not
      // depend on iteration order
      SplitMix64 rng(mix_seed(cfg.seed, mix_seed(vi + 1, static_cast<uint64_t>(round))));
      const bool dropped = rng.next_unit() < cfg.link.loss_rate;

      ExchangeRecord rec;
      rec.vehicle = v.id;
      rec.round = round;
      rec.dropped = dropped;
      rec.capture_s = round * cfg.exchange_interval_s;
      rec.encode_s = cfg.timings.encode_s;
      rec.pack_s = cfg.timings.pack_s;
      rec.transmit_s = transmit_time(cfg.link, v.payload_bytes);
      rec.fuse_s = cfg.timings.fuse_s;
      rec.detect_s = cfg.timings.detect_s;

      const double t_capture = rec.capture_s;
      const double t_send = t_capture + rec.encode_s + rec.pack_s;
      const double t_arrive = t_send + rec.transmit_s;

      res.log.push_back({to_us(t_capture), v.id, EventKind::FrameCaptured, 0, "capture"});
      res.log.push_back({to_us(t_send), v.id, EventKind::SendStart, v.payload_bytes, "transmit"});
      if (dropped) {
        res.log.push_back({to_us(t_arrive), cfg.edge_id, EventKind::Drop, v.payload_bytes, "transmit"});
        rec.total_s = t_arrive - t_capture;
      } else {
        const double t_fused = t_arrive + rec.fuse_s;
        const double t_detect = t_fused + rec.detect_s;
        res.log.push_back({to_us(t_arrive), cfg.edge_id, EventKind::Arrival, v.payload_bytes, "transmit"});
        res.log.push_back({to_us(t_fused), cfg.edge_id, EventKind::FusionDone, 0, "fuse"});
        res.log.push_back({to_us(t_detect), cfg.edge_id, EventKind::DetectionDone, 0, "detect"});
        rec.total_s = t_detect - t_capture;
      }
      res.exchanges.push_back(std::move(rec));
    }
  }

  std::sort(res.log.begin(), res.log.end(), [](const SimEvent& a, const SimEvent& b) {
    if (a.time_us != b.time_us) return a.time_us < b.time_us;
    if (a.actor != b.actor) return a.actor < b.actor;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return res;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Raw: return "raw";
    case Strategy::VFF: return "vff";
    case Strategy::SFF: return "sff";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "raw") return Strategy::Raw;
  if (name == "vff") return Strategy::VFF;
  if (name == "sff") return Strategy::SFF;
  throw std::invalid_argument("unknown strategy: " + name);
}

LatencyBudget latency_budget(Strategy strategy, const SceneStats& stats,
                             const LinkModel& link, const StageTimings& timings) {
  LatencyBudget b;
  uint64_t payload = stats.payload_bytes;
  if (payload == 0) {
    switch (strategy) {
      case Strategy::Raw:
        payload = stats.in_range_points * wire::kRawPointBytes;
        break;
      case Strategy::VFF:
        payload = static_cast<uint64_t>(std::llround(
            static_cast<double>(wire::kVoxelBodyHeaderBytes +
                                stats.voxel_count * wire::kVoxelEntryBytes) *
            stats.compression_ratio));
        break;
      case Strategy::SFF:
        break;  // SFF payload comes from measured wire bytes
    }
  }
  b.payload_bytes = payload;
  // raw clouds skip the feature encoder on the vehicle
  b.encode_s = strategy == Strategy::Raw ? 0.0 : timings.encode_s;
  b.pack_s = timings.pack_s;
  b.transmit_s = transmit_time(link, payload);
  b.fuse_s = timings.fuse_s;
  b.detect_s = timings.detect_s;
  b.result_return_s = transmit_time(link, stats.result_bytes);
  b.total_s = b.encode_s + b.pack_s + b.transmit_s + b.fuse_s + b.detect_s + b.result_return_s;
  b.vehicle_side_s = b.pack_s + b.transmit_s + b.result_return_s;
  return b;
}

}  // namespace fcooper::netsim
