#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "medsim/policy/wire.hpp"

namespace medsim::policy {

inline constexpr int kDefaultTimeoutMs = 5000;

enum class EventKind { fallback, clamp };

/// One entry of policy_events.csv. Fallback reasons: timeout, malformed,
/// schema, channel_closed. Clamp reasons: negative, over_order,
/// over_inventory, over_budget.
struct PolicyEvent {
  Day day = 0;
  std::string agent;
  EventKind kind = EventKind::fallback;
  std::string reason;
  std::string detail;

  friend bool operator==(const PolicyEvent&, const PolicyEvent&) = default;
};

inline constexpr const char* kPolicyEventHeader = "day,agent,kind,reason,detail";
void write_event_row(std::ostream& out, const PolicyEvent& event);

/// Hard constraints applied to every external decision; each change is
/// appended to `events`. Shapes must already match the observation.
/// Orders and quantities are clamped at zero; shipments are capped at the
/// order, then scaled down to inventory by largest remainder; allocations are
/// scaled down to the available supply by largest remainder.
void sanitize(agents::HospitalDecision& d, const agents::HospitalObservation& obs, std::vector<PolicyEvent>& events);
void sanitize(agents::DistributorDecision& d, const agents::DistributorObservation& obs,
              std::vector<PolicyEvent>& events);
void sanitize(agents::ManufacturerDecision& d, const agents::ManufacturerObservation& obs,
              std::vector<PolicyEvent>& events);

/// A child process speaking the line protocol on stdin/stdout.
class Channel {
 public:
  explicit Channel(const std::string& command);
  ~Channel();
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  enum class Status { ok, timeout, closed, overlong };
  /// Writes one line and waits up to `timeout_ms` for one line back.
  Status exchange(const std::string& request, int timeout_ms, std::string& response);
  void close();
  bool alive() const { return pid_ > 0; }

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

/// Policy backed by an external process. Anything other than a well-formed,
/// schema-valid response within the deadline falls back to the built-in
/// decision for that agent and day. After a timeout or a closed channel the
/// child is stopped and every later call falls back immediately, so a stale
/// response can never be paired with a later request.
class ExternalPolicy final : public agents::Policy {
 public:
  explicit ExternalPolicy(const std::string& command, int timeout_ms = kDefaultTimeoutMs);

  agents::HospitalDecision decide(const agents::HospitalObservation& obs) override;
  agents::DistributorDecision decide(const agents::DistributorObservation& obs) override;
  agents::ManufacturerDecision decide(const agents::ManufacturerObservation& obs) override;

  const std::vector<PolicyEvent>& events() const { return events_; }
  int fallbacks() const;
  int clamps() const;

 private:
  template <typename Dec, typename Obs>
  Dec run(const Obs& obs);

  std::unique_ptr<Channel> channel_;
  int timeout_ms_;
  std::vector<PolicyEvent> events_;
};

}  // namespace medsim::policy
