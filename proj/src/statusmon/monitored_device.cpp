#include "iccs/statusmon/monitored_device.hpp"

#include <condition_variable>
#include <thread>

#include <fmt/format.h>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/serial_worker.hpp"
#include "iccs/logging.hpp"

namespace iccs::statusmon {

struct MonitoredDevice::Monitor {
  std::uint64_t id = 0;
  MonitorState state;
  Sampler sampler;
  std::unique_ptr<conduit::Client> client;
  std::unique_ptr<kernel::SerialWorker> outbox;
  std::uint64_t seq = 0;

  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  std::thread poller;

  int failures = 0;  // outbox thread only
  std::atomic<bool> abandoned{false};
};

MonitoredDevice::MonitoredDevice(const registry::ObjectSpec& spec, kernel::ProcessContext& context)
    : Configurable(spec.name, spec.scope, spec.type_tag), context_(context) {
  expose("begin_monitoring", [this](const json& a) {
    auto id = begin_monitoring(a.at("field").get<std::string>(), a.value("precision", 0.0),
                               Millis(a.value("latency_ms", 100)),
                               conduit::parse_ref(a.at("subscriber").get<std::string>()));
    return json{{"monitor", id}};
  });
  expose("end_monitoring", [this](const json& a) {
    end_monitoring(a.at("monitor").get<std::uint64_t>());
    return json(nullptr);
  });
  expose("monitored_fields", [this](const json&) { return json(monitored_fields()); });
}

MonitoredDevice::~MonitoredDevice() { on_shutdown(); }

void MonitoredDevice::monitor_field(std::string field, Sampler sampler) {
  fields_[std::move(field)] = std::move(sampler);
}

std::vector<std::string> MonitoredDevice::monitored_fields() const {
  std::vector<std::string> out;
  for (const auto& [f, _] : fields_) out.push_back(f);
  return out;
}

std::size_t MonitoredDevice::active_monitors() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, m] : monitors_) n += m->abandoned ? 0 : 1;
  return n;
}

std::uint64_t MonitoredDevice::begin_monitoring(const std::string& field, double precision,
                                                Millis latency,
                                                const conduit::ObjectRef& subscriber) {
  auto it = fields_.find(field);
  if (it == fields_.end()) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("{} has no field '{}'", name(), field));
  }
  if (!(precision >= 0.0)) throw Error(ErrorCode::kBadArgs, "precision must be >= 0");
  if (latency.count() <= 0) throw Error(ErrorCode::kBadArgs, "latency must be > 0");
  reap_abandoned();

  std::shared_ptr<Monitor> replaced;
  auto m = std::make_shared<Monitor>();
  {
    std::lock_guard lock(mu_);
    for (auto e = monitors_.begin(); e != monitors_.end(); ++e) {
      const auto& s = e->second->state.spec;
      if (s.field == field && s.subscriber == subscriber) {
        replaced = e->second;
        monitors_.erase(e);
        break;
      }
    }
    m->id = next_id_++;
  }
  if (replaced) retire(replaced);

  m->state.spec = MonitorSpec{name(), field, precision, latency, subscriber};
  m->sampler = it->second;
  conduit::ConnectionPolicy policy;
  policy.call_timeout = Millis(1000);
  m->client = std::make_unique<conduit::Client>(subscriber, context_.client_options(policy));
  m->outbox = std::make_unique<kernel::SerialWorker>(kMonitorOutbox);

  // The initial report is taken now so it precedes every change report.
  poll(*m);
  {
    std::lock_guard lock(mu_);
    monitors_[m->id] = m;
  }
  Monitor* raw = m.get();
  m->poller = std::thread([this, raw] {
    std::unique_lock lock(raw->mu);
    const auto period = raw->state.spec.latency;
    while (!raw->cv.wait_for(lock, period, [&] { return raw->stopping; })) {
      lock.unlock();
      poll(*raw);
      lock.lock();
    }
  });
  log::debug("{}: monitor {} on {} (precision {}, latency {} ms) for {}", name(), m->id, field,
             precision, latency.count(), conduit::format_ref(subscriber));
  return m->id;
}

void MonitoredDevice::poll(Monitor& m) {
  FieldValue sample;
  try {
    sample = m.sampler();
  } catch (const std::exception& e) {
    log::debug("{}: sampling {} failed: {}", name(), m.state.spec.field, e.what());
    return;
  }
  ++samples_;
  auto step = poll_step(m.state, sample, now_ms());
  m.state = std::move(step.state);
  if (step.report) emit(m, *step.report);
}

void MonitoredDevice::emit(Monitor& m, const StatusReport& report) {
  json message = {{"publisher", name()},
                  {"monitor", m.id},
                  {"seq", ++m.seq},
                  {"report", to_json(report)}};
  Monitor* raw = &m;
  bool kept = m.outbox->post([this, raw, message = std::move(message)] {
    if (raw->abandoned) return;
    try {
      raw->client->invoke("update", message);
      raw->failures = 0;
    } catch (const Error& e) {
      if (++raw->failures >= kMonitorDeliveryFailures) {
        log::warning("{}: monitor {} abandoned after {} failed deliveries: {}", name(), raw->id,
                     raw->failures, e.what());
        raw->abandoned = true;
        std::lock_guard lock(raw->mu);
        raw->stopping = true;
        raw->cv.notify_all();
      }
    }
  });
  if (!kept) {
    ++dropped_;
    log::warning("{}: monitor {} outbox full; oldest report dropped", name(), m.id);
  }
}

void MonitoredDevice::retire(std::shared_ptr<Monitor> m) {
  {
    std::lock_guard lock(m->mu);
    m->stopping = true;
  }
  m->cv.notify_all();
  if (m->poller.joinable()) m->poller.join();
  m->outbox->stop();
}

void MonitoredDevice::reap_abandoned() {
  std::vector<std::shared_ptr<Monitor>> dead;
  {
    std::lock_guard lock(mu_);
    for (auto it = monitors_.begin(); it != monitors_.end();) {
      if (it->second->abandoned) {
        dead.push_back(it->second);
        it = monitors_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& m : dead) retire(m);
}

void MonitoredDevice::end_monitoring(std::uint64_t id) {
  std::shared_ptr<Monitor> m;
  {
    std::lock_guard lock(mu_);
    auto it = monitors_.find(id);
    if (it == monitors_.end()) {
      throw Error(ErrorCode::kNoSuchObject, fmt::format("{}: no monitor {}", name(), id));
    }
    m = it->second;
    monitors_.erase(it);
  }
  retire(m);
}

void MonitoredDevice::on_shutdown() {
  std::map<std::uint64_t, std::shared_ptr<Monitor>> all;
  {
    std::lock_guard lock(mu_);
    all.swap(monitors_);
  }
  for (auto& [_, m] : all) retire(m);
}

}  // namespace iccs::statusmon
