#include "medsim/policy/adapter.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <numeric>
#include <ostream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "medsim/core/apportion.hpp"

namespace medsim::policy {

void write_event_row(std::ostream& out, const PolicyEvent& e) {
  std::string detail = e.detail;
  std::replace_if(detail.begin(), detail.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
  out << e.day << ',' << e.agent << ',' << (e.kind == EventKind::fallback ? "fallback" : "clamp") << ','
      << e.reason << ',' << detail << '\n';
}

namespace {

void clamp_event(std::vector<PolicyEvent>& events, Day day, const AgentId& a, std::string reason,
                 std::string detail) {
  events.push_back({day, a.name(), EventKind::clamp, std::move(reason), std::move(detail)});
}

void clamp_negative(PerDrug<Units>& row, Day day, const AgentId& a, const std::string& what,
                    std::vector<PolicyEvent>& events) {
  for (std::size_t d = 0; d < row.size(); ++d)
    if (row[d] < 0) {
      clamp_event(events, day, a, "negative", what + " drug " + std::to_string(d) + ": " + std::to_string(row[d]) + " -> 0");
      row[d] = 0;
    }
}

// Scales column d of `rows` down to `limit` by largest remainder.
void scale_column(std::vector<PerDrug<Units>>& rows, std::size_t d, Units limit, Day day, const AgentId& a,
                  const std::string& reason, std::vector<PolicyEvent>& events) {
  Units sum = 0;
  std::vector<double> w;
  for (const auto& r : rows) {
    sum += r[d];
    w.push_back(static_cast<double>(r[d]));
  }
  if (sum <= limit) return;
  const auto scaled = largest_remainder(w, std::max<Units>(limit, 0));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i][d] = scaled[i];
  clamp_event(events, day, a, reason,
              "drug " + std::to_string(d) + ": " + std::to_string(sum) + " -> " + std::to_string(limit));
}

}  // namespace

void sanitize(agents::HospitalDecision& d, const agents::HospitalObservation& obs, std::vector<PolicyEvent>& events) {
  clamp_negative(d.orders, obs.day, obs.agent, "order", events);
}

void sanitize(agents::DistributorDecision& dec, const agents::DistributorObservation& obs,
              std::vector<PolicyEvent>& events) {
  for (std::size_t k = 0; k < dec.shipments.size(); ++k) {
    auto& row = dec.shipments[k];
    clamp_negative(row, obs.day, obs.agent, "shipment " + std::to_string(k), events);
    for (std::size_t d = 0; d < row.size(); ++d)
      if (row[d] > obs.orders[k].quantity[d]) {
        clamp_event(events, obs.day, obs.agent, "over_order",
                    "shipment " + std::to_string(k) + " drug " + std::to_string(d) + ": " + std::to_string(row[d]) +
                        " -> " + std::to_string(obs.orders[k].quantity[d]));
        row[d] = obs.orders[k].quantity[d];
      }
  }
  for (std::size_t d = 0; d < obs.inventory.size(); ++d)
    scale_column(dec.shipments, d, obs.inventory[d], obs.day, obs.agent, "over_inventory", events);
}

void sanitize(agents::ManufacturerDecision& dec, const agents::ManufacturerObservation& obs,
              std::vector<PolicyEvent>& events) {
  for (std::size_t r = 0; r < dec.allocation.size(); ++r)
    clamp_negative(dec.allocation[r], obs.day, obs.agent, "allocation " + std::to_string(r), events);
  for (std::size_t d = 0; d < obs.available.size(); ++d)
    scale_column(dec.allocation, d, obs.available[d], obs.day, obs.agent, "over_budget", events);
}

Channel::Channel(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);
  int in[2], out[2];
  if (pipe(in) != 0) return;
  if (pipe(out) != 0) {
    ::close(in[0]);
    ::close(in[1]);
    return;
  }
  const pid_t pid = fork();
  if (pid == 0) {
    setpgid(0, 0);
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    ::close(in[0]);
    ::close(in[1]);
    ::close(out[0]);
    ::close(out[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in[0]);
  ::close(out[1]);
  if (pid < 0) {
    ::close(in[1]);
    ::close(out[0]);
    return;
  }
  setpgid(pid, pid);
  pid_ = pid;
  to_child_ = in[1];
  from_child_ = out[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

Channel::~Channel() { close(); }

void Channel::close() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // The shell may fork the command instead of exec'ing it; stop the whole group.
    kill(-pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

Channel::Status Channel::exchange(const std::string& request, int timeout_ms, std::string& response) {
  if (pid_ <= 0) return Status::closed;
  const std::string line = request + '\n';
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return Status::closed;
    written += static_cast<std::size_t>(n);
  }
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
      response = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return Status::ok;
    }
    if (pending_.size() > kMaxLineBytes) return Status::overlong;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return Status::timeout;
    pollfd p{from_child_, POLLIN, 0};
    const int rc = poll(&p, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) return Status::closed;
    if (rc == 0) return Status::timeout;
    char buf[65536];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return Status::closed;
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

ExternalPolicy::ExternalPolicy(const std::string& command, int timeout_ms)
    : channel_(std::make_unique<Channel>(command)), timeout_ms_(timeout_ms) {}

int ExternalPolicy::fallbacks() const {
  return static_cast<int>(std::count_if(events_.begin(), events_.end(),
                                        [](const auto& e) { return e.kind == EventKind::fallback; }));
}

int ExternalPolicy::clamps() const { return static_cast<int>(events_.size()) - fallbacks(); }

template <typename Dec, typename Obs>
Dec ExternalPolicy::run(const Obs& obs) {
  const Observation wrapped = obs;
  auto fallback = [&](std::string reason, std::string detail) {
    events_.push_back({obs.day, obs.agent.name(), EventKind::fallback, std::move(reason), std::move(detail)});
    return std::get<Dec>(builtin_decide(wrapped));
  };
  if (!channel_->alive()) return fallback("channel_closed", "external policy is not running");

  std::string line;
  switch (channel_->exchange(encode_request(wrapped, timeout_ms_), timeout_ms_, line)) {
    case Channel::Status::ok:
      break;
    case Channel::Status::timeout:
      channel_->close();
      return fallback("timeout", "no response within " + std::to_string(timeout_ms_) + " ms");
    case Channel::Status::overlong:
      channel_->close();
      return fallback("malformed", "response line exceeds " + std::to_string(kMaxLineBytes) + " bytes");
    case Channel::Status::closed:
      channel_->close();
      return fallback("channel_closed", "external policy exited");
  }

  Dec dec;
  try {
    dec = std::get<Dec>(decode_response(line, wrapped));
  } catch (const WireError& e) {
    return fallback(e.reason(), e.what());
  }
  if constexpr (std::is_same_v<Dec, agents::HospitalDecision>) {
    if (dec.criticality.empty() || dec.forecast.empty()) {
      const auto b = agents::hospital_decide(obs);
      if (dec.criticality.empty()) dec.criticality = b.criticality;
      if (dec.forecast.empty()) dec.forecast = b.forecast;
    }
  } else if constexpr (std::is_same_v<Dec, agents::ManufacturerDecision>) {
    dec.fairness = agents::fairness_weights(obs.severity, obs.alpha);
  }
  sanitize(dec, obs, events_);
  return dec;
}

agents::HospitalDecision ExternalPolicy::decide(const agents::HospitalObservation& obs) {
  return run<agents::HospitalDecision>(obs);
}

agents::DistributorDecision ExternalPolicy::decide(const agents::DistributorObservation& obs) {
  return run<agents::DistributorDecision>(obs);
}

agents::ManufacturerDecision ExternalPolicy::decide(const agents::ManufacturerObservation& obs) {
  return run<agents::ManufacturerDecision>(obs);
}

}  // namespace medsim::policy
