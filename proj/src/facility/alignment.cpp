#include "iccs/facility/alignment.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

#include "iccs/logging.hpp"

namespace iccs::facility {

namespace {

constexpr std::size_t kMaxAxes = 4;
constexpr Millis kMoveTimeout{10000};

conduit::ConnectionPolicy device_policy() {
  conduit::ConnectionPolicy p;
  p.wait_for_presence = true;
  p.refresh_on_failure = true;
  p.max_attempts = 3;
  p.call_timeout = Millis(2000);
  return p;
}

json initial_state() {
  json s = {{"phase", "idle"}, {"best", 0.0}, {"iteration", 0}, {"sensor", 0.0}, {"shutter", "unknown"}};
  return s;
}

}  // namespace

std::string_view to_string(AlignPhase p) {
  switch (p) {
    case AlignPhase::kIdle: return "idle";
    case AlignPhase::kAligning: return "aligning";
    case AlignPhase::kAligned: return "aligned";
    case AlignPhase::kFault: return "fault";
  }
  return "?";
}

AlignmentLcu::AlignmentLcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context)
    : Lcu(spec, context, initial_state()),
      context_(context),
      actuator_name_(spec.params.at("actuator").get<std::string>()),
      sensor_name_(spec.params.at("sensor").get<std::string>()),
      shutter_name_(spec.params.at("shutter").get<std::string>()),
      operator_(spec.params.value("operator", spec.name)),
      latency_(spec.params.value("latency_ms", 50)),
      initial_step_(spec.params.value("step", 0.1)),
      min_step_(spec.params.value("min_step", 0.001)) {
  if (latency_.count() <= 0) throw Error(ErrorCode::kBadArgs, fmt::format("{}: latency_ms must be > 0", name()));
  if (!(min_step_ > 0 && initial_step_ >= min_step_)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: need step >= min_step > 0", name()));
  }
  add_mapper("summary", [](const json& s) { return supervisory::project_keys(s, {"phase", "best", "iteration"}); });
  add_mapper("positions", [](const json& s) {
    std::vector<std::string> keys;
    for (std::size_t i = 0; i < kMaxAxes; ++i) keys.push_back(fmt::format("p{}", i));
    return supervisory::project_keys(s, keys);
  });
  add_mapper("signal", [](const json& s) { return supervisory::project_keys(s, {"sensor", "shutter"}); });

  auto options = context.client_options(device_policy());
  actuator_ = std::make_shared<conduit::Client>(actuator_name_, options);
  sensor_ = std::make_shared<conduit::Client>(sensor_name_, options);
  shutter_ = std::make_shared<conduit::Client>(shutter_name_, options);

  expose("align", [this](const json& a) {
    align(a.at("threshold").get<double>(), a.at("max_iters").get<int>());
    return json{{"phase", "aligning"}};
  });
  expose("abort", [this](const json&) {
    abort();
    return json(nullptr);
  });
  expose("reset", [this](const json&) {
    reset();
    return json(nullptr);
  });
}

AlignmentLcu::~AlignmentLcu() { on_shutdown(); }

void AlignmentLcu::on_ready() {
  auto self = conduit::format_ref(context_.self_ref(name()));
  auto open = [&](conduit::Client& device, const char* field, double precision) {
    auto reply = device.invoke("begin_monitoring", {{"field", field},
                                                    {"precision", precision},
                                                    {"latency_ms", latency_.count()},
                                                    {"subscriber", self}});
    return reply.at("monitor").get<std::uint64_t>();
  };
  std::uint64_t s = open(*sensor_, "value", 0.0);
  std::uint64_t a = open(*actuator_, "moves_completed", 0.0);
  std::uint64_t h = open(*shutter_, "state", 0.0);
  // One-off read of where the axes start; everything after comes from monitors.
  auto start = actuator_->invoke("get_state").at("positions").get<std::vector<double>>();
  json delta;
  for (std::size_t i = 0; i < start.size() && i < kMaxAxes; ++i) delta[fmt::format("p{}", i)] = start[i];
  evolve(delta);
  std::lock_guard lock(mu_);
  sensor_monitor_ = s;
  actuator_monitor_ = a;
  shutter_monitor_ = h;
  cv_.notify_all();
}

void AlignmentLcu::close_monitors() {
  std::uint64_t s, a, h;
  {
    std::lock_guard lock(mu_);
    s = std::exchange(sensor_monitor_, 0);
    a = std::exchange(actuator_monitor_, 0);
    h = std::exchange(shutter_monitor_, 0);
  }
  // Best effort and quick: the devices may already be gone at shutdown.
  auto end = [](conduit::Client& device, std::uint64_t id) {
    auto ref = device.ref();
    if (id == 0 || !ref) return;
    conduit::ConnectionPolicy once;
    once.call_timeout = Millis(300);
    try {
      conduit::invoke(*ref, "end_monitoring", {{"monitor", id}}, once);
    } catch (const Error& e) {
      log::debug("end_monitoring {}: {}", id, e.what());
    }
  };
  end(*sensor_, s);
  end(*actuator_, a);
  end(*shutter_, h);
}

void AlignmentLcu::on_shutdown() {
  abort_ = true;
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  close_monitors();
  Lcu::on_shutdown();
}

std::size_t AlignmentLcu::monitors_open() const {
  std::lock_guard lock(mu_);
  return (sensor_monitor_ ? 1 : 0) + (actuator_monitor_ ? 1 : 0) + (shutter_monitor_ ? 1 : 0);
}

void AlignmentLcu::on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t,
                             const statusmon::StatusReport& report) {
  json delta;
  {
    std::unique_lock lock(mu_);
    // A report can beat on_ready's bookkeeping; wait for the ids briefly.
    cv_.wait_for(lock, Millis(1000), [&] { return sensor_monitor_ != 0 || abort_; });
    if (publisher == sensor_name_ && monitor == sensor_monitor_) {
      double v = std::get<double>(report.value);
      observed_.sensor = v;
      ++observed_.sensor_reports;
      delta["sensor"] = v;
    } else if (publisher == actuator_name_ && monitor == actuator_monitor_) {
      observed_.moves_completed = static_cast<std::uint64_t>(std::get<double>(report.value));
    } else if (publisher == shutter_name_ && monitor == shutter_monitor_) {
      observed_.shutter = std::get<std::string>(report.value);
      delta["shutter"] = observed_.shutter;
    } else {
      return;
    }
    cv_.notify_all();
  }
  if (!delta.empty()) evolve(delta);
}

AlignPhase AlignmentLcu::phase() const {
  std::lock_guard lock(mu_);
  return phase_;
}

AlignPhase AlignmentLcu::wait_settled(Millis timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return phase_ != AlignPhase::kAligning; });
  return phase_;
}

void AlignmentLcu::set_phase(AlignPhase p, json extra) {
  {
    std::lock_guard lock(mu_);
    phase_ = p;
    cv_.notify_all();
  }
  extra["phase"] = std::string(to_string(p));
  evolve(extra);
  if (context_.events) {
    context_.events->post_event("align_phase", name(), extra);
  }
}

void AlignmentLcu::align(double threshold, int max_iters) {
  if (!(threshold > 0 && threshold <= 1)) throw Error(ErrorCode::kBadArgs, "threshold must be in (0, 1]");
  if (max_iters < 1) throw Error(ErrorCode::kBadArgs, "max_iters must be >= 1");
  {
    std::lock_guard lock(mu_);
    if (phase_ != AlignPhase::kIdle) {
      throw Error(ErrorCode::kAppError, fmt::format("{} is {}, not idle", name(), to_string(phase_)));
    }
    if (sensor_monitor_ == 0) throw Error(ErrorCode::kAppError, fmt::format("{} has no monitors", name()));
    phase_ = AlignPhase::kAligning;
  }
  std::string token;
  try {
    if (!context_.reservations) throw Error(ErrorCode::kAppError, "no reservation service");
    token = context_.reservations->reserve(actuator_name_, operator_).token;
  } catch (...) {
    std::lock_guard lock(mu_);
    phase_ = AlignPhase::kIdle;
    throw;
  }
  if (worker_.joinable()) worker_.join();
  abort_ = false;
  set_phase(AlignPhase::kAligning, {{"iteration", 0}});
  worker_ = std::thread([this, threshold, max_iters, token] { run(threshold, max_iters, token); });
}

void AlignmentLcu::abort() {
  abort_ = true;
  cv_.notify_all();
}

void AlignmentLcu::reset() {
  {
    std::lock_guard lock(mu_);
    if (phase_ == AlignPhase::kAligning) {
      throw Error(ErrorCode::kAppError, fmt::format("{} is aligning", name()));
    }
    if (phase_ == AlignPhase::kIdle) return;
    phase_ = AlignPhase::kIdle;
    cv_.notify_all();
  }
  evolve({{"phase", "idle"}});
}

double AlignmentLcu::trial_move(const std::vector<double>& targets, const std::string& token) {
  std::uint64_t completed_before;
  std::uint64_t reports_before;
  {
    std::lock_guard lock(mu_);
    completed_before = observed_.moves_completed.value_or(0);
    reports_before = observed_.sensor_reports;
  }
  actuator_->invoke("move_to", {{"targets", targets}, {"token", token}});

  std::unique_lock lock(mu_);
  bool done = cv_.wait_for(lock, kMoveTimeout, [&] {
    return abort_ || observed_.moves_completed.value_or(0) > completed_before;
  });
  if (abort_) throw Error(ErrorCode::kAppError, "aborted");
  if (!done) throw Error(ErrorCode::kTimeout, fmt::format("{} never reported completion", actuator_name_));
  // The sensor holds its value while the actuator moves, so any report since
  // the move began reflects the settled position. An unchanged value is never
  // reported; give the monitor a few periods before trusting the cache.
  cv_.wait_for(lock, 4 * latency_, [&] { return abort_ || observed_.sensor_reports > reports_before; });
  if (abort_) throw Error(ErrorCode::kAppError, "aborted");
  return observed_.sensor.value_or(0.0);
}

void AlignmentLcu::run(double threshold, int max_iters, std::string token) {
  AlignPhase outcome = AlignPhase::kFault;
  json extra;
  int iteration = 0;
  double best = 0;
  auto positions_delta = [](const std::vector<double>& p) {
    json d = json::object();
    for (std::size_t i = 0; i < p.size() && i < kMaxAxes; ++i) d[fmt::format("p{}", i)] = p[i];
    return d;
  };
  try {
    {
      std::unique_lock lock(mu_);
      if (!cv_.wait_for(lock, 4 * latency_ + Millis(1000), [&] { return observed_.sensor.has_value(); })) {
        throw Error(ErrorCode::kTimeout, "no sensor report");
      }
      best = *observed_.sensor;
    }
    // A single read of the starting point, like on_ready.
    auto base = actuator_->invoke("get_state").at("positions").get<std::vector<double>>();
    auto at = base;
    auto publish = [&] {
      json d = positions_delta(at);
      d["best"] = best;
      d["iteration"] = iteration;
      evolve(d);
    };
    publish();

    double step = initial_step_;
    while (best < threshold && iteration < max_iters) {
      bool improved = false;
      for (std::size_t axis = 0; axis < base.size() && best < threshold && iteration < max_iters; ++axis) {
        for (double dir : {1.0, -1.0}) {
          if (iteration >= max_iters) break;
          auto trial = base;
          trial[axis] += dir * step;
          double value = -1;
          try {
            value = trial_move(trial, token);
            at = trial;
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kOutOfRange) throw;
          }
          ++iteration;
          if (value > best) {
            best = value;
            base = trial;
            improved = true;
          }
          publish();
          if (improved) break;
        }
        if (improved) break;  // restart the sweep at the first axis
      }
      if (!improved) step = std::max(step / 2, min_step_);
    }
    if (best >= threshold) {
      if (at != base) {
        trial_move(base, token);
        at = base;
        publish();
      }
      outcome = AlignPhase::kAligned;
    } else {
      extra["reason"] = fmt::format("threshold {} not reached in {} iterations", threshold, max_iters);
    }
  } catch (const Error& e) {
    extra["reason"] = e.what();
    log::warning("{}: alignment failed: {}", name(), e.what());
  }
  try {
    context_.reservations->release(token);
  } catch (const Error& e) {
    log::warning("{}: release: {}", name(), e.what());
  }
  extra["best"] = best;
  extra["iteration"] = iteration;
  set_phase(outcome, extra);
}

}  // namespace iccs::facility
